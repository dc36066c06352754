use std::fmt;

use thiserror::Error;

use crate::external::ExternError;
use crate::names::{AgentKey, QualifiedRef};
use crate::resolver::ResolverError;
use crate::syntax::ast::Span;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeErrorKind {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("operator {op} cannot be applied to {operands}")]
    OperatorType { op: &'static str, operands: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("condition evaluated to {0}, not a boolean")]
    NonBooleanCondition(String),
    #[error("join on {0}, which is not a thread")]
    JoinOnNonThread(String),
    #[error("expected a reference, found {0}")]
    NotARef(String),
    #[error("expected a host name, found {0}")]
    NotAHost(String),
    #[error("a thread cannot wait on its own reference")]
    WaitOnOwnThread,
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("{class} expects {expected} arguments, found {found}")]
    Arity {
        class: String,
        expected: usize,
        found: usize,
    },
    #[error("{class} has no method {method}")]
    UnknownMethod { class: String, method: String },
    #[error("cannot invoke a method on {0}")]
    InvokeOnNonClosure(String),
    #[error("{0} belongs to another agent")]
    ForeignRef(QualifiedRef),
    #[error("{class} has no attribute {attr}")]
    UnknownAttribute { class: String, attr: String },
    #[error("dangling reference {0}")]
    DanglingRef(QualifiedRef),
    #[error("malformed exec arguments: {0}")]
    BadExec(String),
    #[error(transparent)]
    Extern(#[from] ExternError),
    #[error(transparent)]
    Resolver(#[from] ResolverError),
    #[error("method body ended without return")]
    MissingReturn,
    #[error("no rule applies: {0}")]
    StuckThread(String),
}

/// A failed reduction, located at the thread and instruction that caused it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct RuntimeError {
    pub agent: AgentKey,
    pub thread: Option<u32>,
    pub span: Option<Span>,
    pub kind: RuntimeErrorKind,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(span) = self.span {
            write!(f, "{span}: ")?;
        }
        write!(f, "runtime error in agent {}", self.agent)?;
        if let Some(t) = self.thread {
            write!(f, " thread t{t}")?;
        }
        write!(f, ": {}", self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LaunchError {
    #[error("unknown host {0}")]
    UnknownHost(String),
}
