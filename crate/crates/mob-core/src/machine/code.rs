//! Instruction sequences, code stacks and running threads.

use std::sync::Arc;

use super::value::Env;
use crate::names::QualifiedRef;
use crate::syntax::ast::{Block, Instr};

/// A persistent instruction sequence: a chain of slices of shared blocks.
/// Prepending a branch or re-entering a loop never copies instructions.
#[derive(Debug, Clone, Default)]
pub struct Code(Option<Arc<Segment>>);

#[derive(Debug)]
struct Segment {
    block: Block,
    start: usize,
    end: usize,
    next: Code,
}

impl Code {
    pub fn empty() -> Self {
        Code(None)
    }

    pub fn from_block(block: &Block) -> Self {
        Self::slice(block, 0, block.len(), Code::empty())
    }

    /// `block[start..end]` followed by `next`.
    pub fn slice(block: &Block, start: usize, end: usize, next: Code) -> Self {
        if start >= end {
            return next;
        }
        Code(Some(Arc::new(Segment {
            block: block.clone(),
            start,
            end,
            next,
        })))
    }

    /// `block ; self`.
    pub fn prepend(&self, block: &Block) -> Self {
        Self::slice(block, 0, block.len(), self.clone())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn head(&self) -> Option<&Instr> {
        self.0.as_ref().map(|s| &s.block[s.start])
    }

    /// The sequence without its head, plus the head's position so that the
    /// head alone can be re-materialised with [`Code::single`].
    pub fn split(&self) -> Option<(&Block, usize, Code)> {
        let s = self.0.as_ref()?;
        let rest = Self::slice(&s.block, s.start + 1, s.end, s.next.clone());
        Some((&s.block, s.start, rest))
    }

    pub fn tail(&self) -> Code {
        self.split().map(|(_, _, rest)| rest).unwrap_or_default()
    }

    /// The single instruction `block[index]`.
    pub fn single(block: &Block, index: usize) -> Self {
        Self::slice(block, index, index + 1, Code::empty())
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        let mut cur = self;
        while let Some(s) = &cur.0 {
            n += s.end - s.start;
            cur = &s.next;
        }
        n
    }
}

/// One code-block of a thread's stack.
#[derive(Debug, Clone)]
pub struct Frame {
    pub env: Env,
    pub code: Code,
    /// Pushed by PushCont: its code ends with the loop's `while`.
    pub is_loop: bool,
}

impl Frame {
    pub fn new(env: Env, code: Code) -> Self {
        Self {
            env,
            code,
            is_loop: false,
        }
    }
}

/// `(t, Q, r)`. The notify pseudo-thread is `(null, ε, r)`.
#[derive(Debug, Clone)]
pub struct Thread {
    pub tref: Option<u32>,
    /// Top of the stack is the last element.
    pub stack: Vec<Frame>,
    pub result: Option<QualifiedRef>,
}

impl Thread {
    pub fn notify(r: QualifiedRef) -> Self {
        Self {
            tref: None,
            stack: Vec::new(),
            result: Some(r),
        }
    }

    pub fn is_notify(&self) -> bool {
        self.tref.is_none() && self.stack.is_empty()
    }

    pub fn top(&self) -> Option<&Frame> {
        self.stack.last()
    }

    pub fn top_mut(&mut self) -> Option<&mut Frame> {
        self.stack.last_mut()
    }

    pub fn head(&self) -> Option<&Instr> {
        self.top().and_then(|f| f.code.head())
    }
}
