//! Expression evaluation and the lock primitives.

use std::collections::BTreeMap;

use super::error::RuntimeErrorKind;
use super::value::{Content, Env, HeapCell, Value};
use crate::external::SERVICE_CONSTANTS;
use crate::names::{AgentKey, LocalRef, QualifiedRef};
use crate::syntax::ast::{Atom, BinOp, Expr, Literal, Target, UnOp};

pub type Heap = BTreeMap<LocalRef, HeapCell>;

type EvalResult<T> = Result<T, RuntimeErrorKind>;

fn cell(heap: &Heap, me: AgentKey, r: QualifiedRef) -> EvalResult<&HeapCell> {
    if r.agent != me {
        return Err(RuntimeErrorKind::ForeignRef(r));
    }
    heap.get(&r.local).ok_or(RuntimeErrorKind::DanglingRef(r))
}

pub fn has_access(heap: &Heap, me: AgentKey, r: QualifiedRef, t: u32) -> EvalResult<bool> {
    Ok(match cell(heap, me, r)?.owner {
        None => true,
        Some(owner) => owner == t,
    })
}

pub fn try_lock(heap: &mut Heap, me: AgentKey, r: QualifiedRef, t: u32) -> EvalResult<bool> {
    if !has_access(heap, me, r, t)? {
        return Ok(false);
    }
    heap.get_mut(&r.local).expect("checked by has_access").owner = Some(t);
    Ok(true)
}

pub fn try_unlock(heap: &mut Heap, me: AgentKey, r: QualifiedRef, t: u32) -> EvalResult<bool> {
    if !has_access(heap, me, r, t)? {
        return Ok(false);
    }
    heap.get_mut(&r.local).expect("checked by has_access").owner = None;
    Ok(true)
}

fn lookup(env: &Env, name: &str) -> EvalResult<Value> {
    if let Some(v) = env.get(name) {
        return Ok(v.clone());
    }
    SERVICE_CONSTANTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, id)| Value::Int(*id))
        .ok_or_else(|| RuntimeErrorKind::UnboundVariable(name.to_string()))
}

/// Resolves one level of indirection: a local cell holding a closure
/// evaluates to the reference, a cell holding a value to that value.
pub fn resolve(heap: &Heap, me: AgentKey, v: Value) -> EvalResult<Value> {
    match v {
        Value::Ref(r) if r.agent == me && matches!(r.local, LocalRef::Cell(_)) => {
            match &cell(heap, me, r)?.content {
                Content::Closure(_) => Ok(Value::Ref(r)),
                Content::Value(u) => Ok(u.clone()),
            }
        }
        other => Ok(other),
    }
}

pub fn eval_target(heap: &Heap, me: AgentKey, env: &Env, t: &Target) -> EvalResult<Value> {
    let raw = match t {
        Target::SelfRef => lookup(env, "self")?,
        Target::Var(x) => lookup(env, x)?,
    };
    resolve(heap, me, raw)
}

pub fn eval_atom(heap: &Heap, me: AgentKey, env: &Env, a: &Atom) -> EvalResult<Value> {
    match a {
        Atom::Lit(Literal::Int(n)) => Ok(Value::Int(*n)),
        Atom::Lit(Literal::Str(s)) => Ok(Value::str(s)),
        Atom::Lit(Literal::Bool(b)) => Ok(Value::Bool(*b)),
        Atom::Null => Ok(Value::Null),
        Atom::Target(t) => eval_target(heap, me, env, t),
    }
}

pub fn eval_atoms(heap: &Heap, me: AgentKey, env: &Env, atoms: &[Atom]) -> EvalResult<Vec<Value>> {
    atoms.iter().map(|a| eval_atom(heap, me, env, a)).collect()
}

pub fn eval_expr(heap: &Heap, me: AgentKey, env: &Env, e: &Expr) -> EvalResult<Value> {
    match e {
        Expr::Atom(a) => eval_atom(heap, me, env, a),
        Expr::Unary(op, inner) => {
            let u = eval_expr(heap, me, env, inner)?;
            unary(*op, u)
        }
        Expr::Binary(op, l, r) => {
            let a = eval_expr(heap, me, env, l)?;
            let b = eval_expr(heap, me, env, r)?;
            binary(*op, a, b)
        }
    }
}

fn unary(op: UnOp, u: Value) -> EvalResult<Value> {
    match (op, u) {
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnOp::Neg, Value::Int(n)) => Ok(Value::Int(n.wrapping_neg())),
        (op, u) => Err(RuntimeErrorKind::OperatorType {
            op: match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            },
            operands: u.kind().to_string(),
        }),
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> EvalResult<Value> {
    use Value::*;
    let mismatch = |a: &Value, b: &Value| RuntimeErrorKind::OperatorType {
        op: op.symbol(),
        operands: format!("{} and {}", a.kind(), b.kind()),
    };
    Ok(match (op, &a, &b) {
        (BinOp::Eq, _, _) => Bool(a == b),
        (BinOp::Ne, _, _) => Bool(a != b),
        (BinOp::Add, Int(x), Int(y)) => Int(x.wrapping_add(*y)),
        (BinOp::Sub, Int(x), Int(y)) => Int(x.wrapping_sub(*y)),
        (BinOp::Mul, Int(x), Int(y)) => Int(x.wrapping_mul(*y)),
        (BinOp::Div | BinOp::Rem, Int(_), Int(0)) => return Err(RuntimeErrorKind::DivisionByZero),
        (BinOp::Div, Int(x), Int(y)) => Int(x.wrapping_div(*y)),
        (BinOp::Rem, Int(x), Int(y)) => Int(x.wrapping_rem(*y)),
        (BinOp::Concat, Str(x), Str(y)) => Value::str(format!("{x}{y}")),
        (BinOp::Lt, Int(x), Int(y)) => Bool(x < y),
        (BinOp::Gt, Int(x), Int(y)) => Bool(x > y),
        (BinOp::Le, Int(x), Int(y)) => Bool(x <= y),
        (BinOp::Ge, Int(x), Int(y)) => Bool(x >= y),
        (BinOp::And, Bool(x), Bool(y)) => Bool(*x && *y),
        (BinOp::Or, Bool(x), Bool(y)) => Bool(*x || *y),
        _ => return Err(mismatch(&a, &b)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::value::Closure;
    use crate::syntax::ast::{AssignValue, InstrKind};
    use crate::syntax::parse_source;

    const ME: AgentKey = AgentKey(0);

    fn expr(src: &str) -> Expr {
        let p = parse_source(&format!("z = {src}; exit;")).unwrap();
        match &p.body[0].kind {
            InstrKind::Assign {
                value: AssignValue::Expr(e),
                ..
            } => e.clone(),
            _ => unreachable!(),
        }
    }

    fn cell_ref(n: u32) -> QualifiedRef {
        QualifiedRef::new(ME, LocalRef::Cell(n))
    }

    #[test]
    fn arithmetic_and_constants() {
        let env = Env::from([("x".to_string(), Value::Int(5))]);
        let heap = Heap::new();
        assert_eq!(eval_expr(&heap, ME, &env, &expr("x + 2")).unwrap(), Value::Int(7));
        assert_eq!(eval_expr(&heap, ME, &env, &expr("FTP")).unwrap(), Value::Int(4));
        assert_eq!(
            eval_expr(&heap, ME, &env, &expr("\"a\" ^ \"b\"")).unwrap(),
            Value::str("ab")
        );
        assert_eq!(
            eval_expr(&heap, ME, &env, &expr("x / 0")),
            Err(RuntimeErrorKind::DivisionByZero)
        );
        assert!(eval_expr(&heap, ME, &env, &expr("y")).is_err());
        assert_eq!(eval_expr(&heap, ME, &env, &expr("null == null")).unwrap(), Value::Bool(true));
    }

    #[test]
    fn indirection() {
        let mut heap = Heap::new();
        heap.insert(LocalRef::Cell(0), HeapCell::unlocked(Content::Value(Value::Int(7))));
        heap.insert(
            LocalRef::Cell(1),
            HeapCell::unlocked(Content::Closure(Closure {
                is_agent: false,
                env: Env::new(),
                class: "C".into(),
            })),
        );
        let env = Env::from([
            ("x".to_string(), Value::Ref(cell_ref(0))),
            ("o".to_string(), Value::Ref(cell_ref(1))),
        ]);
        assert_eq!(eval_expr(&heap, ME, &env, &expr("x")).unwrap(), Value::Int(7));
        assert_eq!(
            eval_expr(&heap, ME, &env, &expr("o")).unwrap(),
            Value::Ref(cell_ref(1))
        );
    }

    #[test]
    fn locks() {
        let mut heap = Heap::new();
        heap.insert(LocalRef::Cell(0), HeapCell::unlocked(Content::Value(Value::Null)));
        let r = cell_ref(0);
        assert!(try_lock(&mut heap, ME, r, 1).unwrap());
        assert_eq!(heap[&LocalRef::Cell(0)].owner, Some(1));
        assert!(try_lock(&mut heap, ME, r, 1).unwrap());
        assert!(!try_lock(&mut heap, ME, r, 2).unwrap());
        assert!(!try_unlock(&mut heap, ME, r, 2).unwrap());
        assert!(try_unlock(&mut heap, ME, r, 1).unwrap());
        assert_eq!(heap[&LocalRef::Cell(0)].owner, None);
        assert!(matches!(
            has_access(&heap, ME, QualifiedRef::new(AgentKey(3), LocalRef::Cell(0)), 1),
            Err(RuntimeErrorKind::ForeignRef(_))
        ));
    }
}
