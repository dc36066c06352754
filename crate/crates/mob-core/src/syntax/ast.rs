//! Abstract syntax of Mob programs.

use std::fmt;
use std::sync::Arc;

/// Source position. Spans never take part in structural equality, so two
/// trees parsed from differently formatted sources compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// An instruction sequence. Shared so the machine can splice blocks into
/// running code without copying them.
pub type Block = Arc<[Instr]>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub definitions: Vec<Definition>,
    /// Script body; the terminating `exit` is implicit.
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Definition {
    Service(ServiceDef),
    Requires(RequiresDef),
    Class(ClassDef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDef {
    pub name: String,
    pub methods: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequiresDef {
    pub services: Vec<String>,
    pub span: Span,
}

/// A `class` or `agent` definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub is_agent: bool,
    pub name: String,
    pub params: Vec<String>,
    pub provides: Vec<String>,
    pub requires: Vec<String>,
    pub methods: Vec<Method>,
    pub span: Span,
}

impl ClassDef {
    pub fn method(&self, name: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Method {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instr {
    pub kind: InstrKind,
    pub span: Span,
}

impl Instr {
    pub fn new(kind: InstrKind, span: Span) -> Self {
        Instr { kind, span }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstrKind {
    Go(Atom),
    Return(Atom),
    Join(String),
    Wait(String),
    Notify(String),
    Lock(String),
    Unlock(String),
    If {
        cond: Atom,
        then_block: Block,
        else_block: Block,
    },
    While {
        cond: Atom,
        body: Block,
    },
    Break,
    Exit,
    Assign {
        target: String,
        value: AssignValue,
    },
    AttrAssign {
        object: Target,
        attr: String,
        value: Atom,
    },
}

/// Right-hand sides of `x = V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignValue {
    New { class: String, args: Vec<Atom> },
    Fork(Block),
    Bind { service: String, host: Option<Atom> },
    Host,
    Exec(Vec<Atom>),
    Invoke { object: Target, method: String, args: Vec<Atom> },
    ReadAttr { object: Target, attr: String },
    Expr(Expr),
}

/// Object position `o ::= x | self`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    SelfRef,
    Var(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::SelfRef => f.write_str("self"),
            Target::Var(x) => f.write_str(x),
        }
    }
}

/// Values `v ::= o | c | null`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Target(Target),
    Lit(Literal),
    Null,
}

impl Atom {
    pub fn var(name: &str) -> Self {
        Atom::Target(Target::Var(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Int(i64),
    Str(String),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Atom(Atom),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Concat,
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl BinOp {
    pub const ALL: [BinOp; 14] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::Concat,
        BinOp::And,
        BinOp::Or,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Gt,
        BinOp::Le,
        BinOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Concat => "^",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem | BinOp::Concat => 6,
        }
    }
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
        }
    }
}

impl Program {
    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.definitions.iter().filter_map(|d| match d {
            Definition::Class(c) => Some(c),
            _ => None,
        })
    }

    pub fn services(&self) -> impl Iterator<Item = &ServiceDef> {
        self.definitions.iter().filter_map(|d| match d {
            Definition::Service(s) => Some(s),
            _ => None,
        })
    }
}

/// Calls `f` on every instruction of `block`, descending into nested blocks.
pub fn walk_instrs<'a>(block: &'a [Instr], f: &mut impl FnMut(&'a Instr)) {
    for instr in block {
        f(instr);
        match &instr.kind {
            InstrKind::If {
                then_block,
                else_block,
                ..
            } => {
                walk_instrs(then_block, f);
                walk_instrs(else_block, f);
            }
            InstrKind::While { body, .. } => walk_instrs(body, f),
            InstrKind::Assign {
                value: AssignValue::Fork(body),
                ..
            } => walk_instrs(body, f),
            _ => {}
        }
    }
}
