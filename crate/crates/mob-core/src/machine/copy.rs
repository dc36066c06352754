//! Deep copy of values between agents.
//!
//! Objects are cloned together with the code of their classes, agents are
//! passed by reference. A memo of already copied cells makes cyclic object
//! graphs terminate and keeps sharing inside the copied graph.

use std::collections::HashMap;

use super::error::RuntimeErrorKind;
use super::eval::Heap;
use super::value::{Closure, Content, HeapCell, Value};
use crate::collect::{closure_of, CodeRepo};
use crate::names::{AgentKey, LocalRef, QualifiedRef};

/// Code and heap to add to the destination agent, plus the copied values.
#[derive(Debug, Default)]
pub struct CopyOutcome {
    pub code: CodeRepo,
    pub heap: Heap,
    pub values: Vec<Value>,
}

pub struct Copier<'a> {
    code: &'a CodeRepo,
    heap: &'a Heap,
    src: AgentKey,
    dst: AgentKey,
    next_cell: &'a mut u32,
    memo: HashMap<LocalRef, LocalRef>,
    out: CopyOutcome,
}

/// Copies `values` from agent `src` (with code `code` and heap `heap`) to
/// agent `dst`, allocating fresh cells from `next_cell`.
pub fn copy_seq(
    code: &CodeRepo,
    heap: &Heap,
    src: AgentKey,
    dst: AgentKey,
    next_cell: &mut u32,
    values: &[Value],
) -> Result<CopyOutcome, RuntimeErrorKind> {
    let mut c = Copier {
        code,
        heap,
        src,
        dst,
        next_cell,
        memo: HashMap::new(),
        out: CopyOutcome::default(),
    };
    let mut copied = Vec::with_capacity(values.len());
    for v in values {
        copied.push(c.copy(v)?);
    }
    c.out.values = copied;
    Ok(c.out)
}

impl Copier<'_> {
    fn fresh(&mut self) -> LocalRef {
        let r = LocalRef::Cell(*self.next_cell);
        *self.next_cell += 1;
        r
    }

    fn copy(&mut self, v: &Value) -> Result<Value, RuntimeErrorKind> {
        let r = match v {
            Value::Ref(r) if r.agent == self.src && matches!(r.local, LocalRef::Cell(_)) => *r,
            other => return Ok(other.clone()),
        };
        if let Some(done) = self.memo.get(&r.local) {
            return Ok(Value::Ref(QualifiedRef::new(self.dst, *done)));
        }
        let cell = self
            .heap
            .get(&r.local)
            .ok_or(RuntimeErrorKind::DanglingRef(r))?;
        match &cell.content {
            Content::Closure(k) if k.is_agent => Ok(Value::Ref(r)),
            Content::Closure(k) => {
                let fresh = self.fresh();
                self.memo.insert(r.local, fresh);
                let mut env = k.env.clone();
                for value in env.values_mut() {
                    *value = self.copy(value)?;
                }
                let classes = closure_of(self.code, &k.class)
                    .map_err(|_| RuntimeErrorKind::UnknownClass(k.class.clone()))?;
                self.out.code.extend(classes);
                self.out.heap.insert(
                    fresh,
                    HeapCell::unlocked(Content::Closure(Closure {
                        is_agent: false,
                        env,
                        class: k.class.clone(),
                    })),
                );
                Ok(Value::Ref(QualifiedRef::new(self.dst, fresh)))
            }
            Content::Value(u) => {
                let fresh = self.fresh();
                self.memo.insert(r.local, fresh);
                let u = self.copy(u)?;
                self.out
                    .heap
                    .insert(fresh, HeapCell::unlocked(Content::Value(u)));
                Ok(Value::Ref(QualifiedRef::new(self.dst, fresh)))
            }
        }
    }
}
