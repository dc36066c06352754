//! Runtime values, closures and heap cells.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::names::QualifiedRef;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(Arc<str>),
    Ref(QualifiedRef),
    Null,
}

impl Value {
    pub fn str(s: impl AsRef<str>) -> Self {
        Value::Str(Arc::from(s.as_ref()))
    }

    pub fn as_ref(&self) -> Option<QualifiedRef> {
        match self {
            Value::Ref(r) => Some(*r),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Str(_) => "string",
            Value::Ref(_) => "reference",
            Value::Null => "null",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => write!(f, "\"{s}\""),
            Value::Ref(r) => write!(f, "{r}"),
            Value::Null => f.write_str("null"),
        }
    }
}

/// Variable bindings of a thread or of a closure.
pub type Env = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub is_agent: bool,
    /// Attributes plus `self`.
    pub env: Env,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Closure(Closure),
    Value(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeapCell {
    /// Thread number of the lock holder; `None` when unlocked.
    pub owner: Option<u32>,
    pub content: Content,
}

impl HeapCell {
    pub fn unlocked(content: Content) -> Self {
        Self {
            owner: None,
            content,
        }
    }

    pub fn closure(&self) -> Option<&Closure> {
        match &self.content {
            Content::Closure(k) => Some(k),
            Content::Value(_) => None,
        }
    }
}
