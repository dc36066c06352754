//! Random well-scoped programs for the type oracle and the printer
//! round trip. Only classes are generated, so every program passes the
//! restriction checks. Generation follows an intended typing and departs
//! from it with a small probability per operand, which keeps typable and
//! untypable programs both common.

use std::sync::Arc;

use mob_core::syntax::ast::{
    AssignValue, Atom, BinOp, Block, ClassDef, Definition, Expr, Instr, InstrKind, Literal, Method,
    Program, Span, Target, UnOp,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GLOBALS: [&str; 1] = ["IO"];

const POOL: [&str; 6] = ["v0", "v1", "v2", "v3", "v4", "v5"];
const ATTRS: [&str; 2] = ["a", "b"];
const ACTIONS: [&str; 5] = ["init", "read", "write", "isAlive", "close"];
const SLIP: f64 = 0.035;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Bool,
    Str,
    Thread,
    Obj(usize),
}

struct MethodPlan {
    name: &'static str,
    params: Vec<(&'static str, Kind)>,
    ret: Kind,
}

struct ClassPlan {
    name: String,
    attrs: Vec<(&'static str, Kind)>,
    methods: Vec<MethodPlan>,
}

type Scope = Vec<(String, Kind)>;

struct Gen {
    rng: ChaCha8Rng,
    classes: Vec<ClassPlan>,
}

fn instr(kind: InstrKind) -> Instr {
    Instr::new(kind, Span::default())
}

fn globals() -> Scope {
    GLOBALS.iter().map(|g| (g.to_string(), Kind::Int)).collect()
}

pub fn program(seed: u64) -> Program {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        classes: Vec::new(),
    };
    let n_classes = g.rng.gen_range(0..=2);
    for k in 0..n_classes {
        let arity = g.rng.gen_range(1..=2);
        let attrs = ATTRS[..arity].iter().map(|a| (*a, g.data_kind(n_classes))).collect();
        let methods = [("m0", vec!["p"]), ("m1", vec!["p", "q"])]
            .into_iter()
            .map(|(name, ps)| MethodPlan {
                name,
                params: ps.into_iter().map(|p| (p, g.data_kind(n_classes))).collect(),
                ret: g.data_kind(n_classes),
            })
            .collect();
        g.classes.push(ClassPlan {
            name: format!("K{k}"),
            attrs,
            methods,
        });
    }
    let mut definitions = Vec::new();
    for k in 0..g.classes.len() {
        let attrs: Scope = g.classes[k].attrs.iter().map(|(a, t)| (a.to_string(), *t)).collect();
        let mut methods = Vec::new();
        for m in 0..g.classes[k].methods.len() {
            let plan = &g.classes[k].methods[m];
            let (name, ret) = (plan.name, plan.ret);
            let params: Scope = plan.params.iter().map(|(p, t)| (p.to_string(), *t)).collect();
            let mut scope = globals();
            scope.extend(attrs.iter().cloned());
            scope.extend(params.iter().cloned());
            let mut body = g.block(&mut scope, &attrs, 2);
            let r = g.atom(&scope, ret);
            body.push(instr(InstrKind::Return(r)));
            methods.push(Method {
                name: name.to_string(),
                params: params.into_iter().map(|(p, _)| p).collect(),
                body: Arc::from(body),
                span: Span::default(),
            });
        }
        definitions.push(Definition::Class(ClassDef {
            is_agent: false,
            name: g.classes[k].name.clone(),
            params: attrs.into_iter().map(|(a, _)| a).collect(),
            provides: Vec::new(),
            requires: Vec::new(),
            methods,
            span: Span::default(),
        }));
    }
    let mut scope = globals();
    let body = g.block(&mut scope, &Vec::new(), 2);
    Program {
        definitions,
        body: Arc::from(body),
    }
}

impl Gen {
    fn slip(&mut self) -> bool {
        self.rng.gen_bool(SLIP)
    }

    fn data_kind(&mut self, n_classes: usize) -> Kind {
        match self.rng.gen_range(0..4) {
            0 => Kind::Int,
            1 => Kind::Bool,
            2 => Kind::Str,
            _ if n_classes > 0 => Kind::Obj(self.rng.gen_range(0..n_classes)),
            _ => Kind::Int,
        }
    }

    fn block(&mut self, scope: &mut Scope, attrs: &Scope, depth: usize) -> Vec<Instr> {
        let n = self.rng.gen_range(1..=5);
        (0..n).map(|_| self.instr(scope, attrs, depth)).collect()
    }

    fn nested(&mut self, scope: &Scope, attrs: &Scope, depth: usize) -> Block {
        let mut inner = scope.clone();
        Arc::from(self.block(&mut inner, attrs, depth - 1))
    }

    fn instr(&mut self, scope: &mut Scope, attrs: &Scope, depth: usize) -> Instr {
        let kind = match self.rng.gen_range(0..10) {
            0 if depth > 0 => InstrKind::If {
                cond: self.atom(scope, Kind::Bool),
                then_block: self.nested(scope, attrs, depth),
                else_block: if self.rng.gen_bool(0.5) {
                    self.nested(scope, attrs, depth)
                } else {
                    Arc::from(Vec::new())
                },
            },
            1 if depth > 0 => InstrKind::While {
                cond: self.atom(scope, Kind::Bool),
                body: self.nested(scope, attrs, depth),
            },
            2 if !attrs.is_empty() => {
                let (attr, kind) = attrs.choose(&mut self.rng).unwrap().clone();
                InstrKind::AttrAssign {
                    object: Target::SelfRef,
                    attr,
                    value: self.atom(scope, kind),
                }
            }
            3 if self.has(scope, |k| k == Kind::Thread) => {
                InstrKind::Join(self.local(scope, |k| k == Kind::Thread).unwrap())
            }
            _ => {
                let (value, kind) = self.value(scope, attrs, depth);
                let target = POOL.choose(&mut self.rng).unwrap().to_string();
                scope.retain(|(x, _)| *x != target);
                scope.push((target.clone(), kind));
                InstrKind::Assign { target, value }
            }
        };
        instr(kind)
    }

    fn value(&mut self, scope: &Scope, attrs: &Scope, depth: usize) -> (AssignValue, Kind) {
        match self.rng.gen_range(0..8) {
            0 if !self.classes.is_empty() => {
                let k = self.rng.gen_range(0..self.classes.len());
                let kinds: Vec<Kind> = self.classes[k].attrs.iter().map(|(_, t)| *t).collect();
                let args = kinds.into_iter().map(|t| self.atom(scope, t)).collect();
                let class = self.classes[k].name.clone();
                (AssignValue::New { class, args }, Kind::Obj(k))
            }
            1 | 2 if self.has(scope, |k| matches!(k, Kind::Obj(_))) || self.slip() => {
                let object = match self.local(scope, |k| matches!(k, Kind::Obj(_))) {
                    Some(o) if !self.slip() => o,
                    _ => match self.local(scope, |_| true) {
                        Some(o) => o,
                        None => return (AssignValue::Expr(self.expr(scope, Kind::Int, 2)), Kind::Int),
                    },
                };
                let class = match scope.iter().rev().find(|(x, _)| *x == object) {
                    Some((_, Kind::Obj(k))) => *k,
                    _ => self.rng.gen_range(0..self.classes.len().max(1)),
                };
                let slipped = self.slip();
                let (method, kinds, ret) = match self.classes.get(class) {
                    Some(c) if !slipped => {
                        let m = &c.methods[self.rng.gen_range(0..c.methods.len())];
                        (m.name, m.params.iter().map(|(_, t)| *t).collect(), m.ret)
                    }
                    _ => ("m9", vec![Kind::Int], Kind::Int),
                };
                let args = kinds.into_iter().map(|t: Kind| self.atom(scope, t)).collect();
                let value = AssignValue::Invoke {
                    object: Target::Var(object),
                    method: method.to_string(),
                    args,
                };
                (value, ret)
            }
            3 => {
                let action = *ACTIONS.choose(&mut self.rng).unwrap();
                let args = vec![
                    Atom::Lit(Literal::Str(action.to_string())),
                    self.atom(scope, Kind::Int),
                    self.atom(scope, Kind::Str),
                ];
                let kind = match action {
                    "init" => Kind::Int,
                    "read" => Kind::Str,
                    _ => Kind::Bool,
                };
                (AssignValue::Exec(args), kind)
            }
            4 if depth > 0 && self.rng.gen_bool(0.4) => {
                (AssignValue::Fork(self.nested(scope, attrs, depth)), Kind::Thread)
            }
            5 if self.rng.gen_bool(0.2) => (AssignValue::Host, Kind::Str),
            _ => {
                let kind = *[Kind::Int, Kind::Bool, Kind::Str].choose(&mut self.rng).unwrap();
                (AssignValue::Expr(self.expr(scope, kind, 2)), kind)
            }
        }
    }

    fn expr(&mut self, scope: &Scope, kind: Kind, depth: usize) -> Expr {
        let shape = self.rng.gen_range(0..4);
        match (kind, shape) {
            (Kind::Int, 0) | (Kind::Str, 0) | (Kind::Bool, 0) if depth > 0 => {
                let (op, operand) = match kind {
                    Kind::Int => (*[BinOp::Add, BinOp::Sub, BinOp::Mul].choose(&mut self.rng).unwrap(), Kind::Int),
                    Kind::Str => (BinOp::Concat, Kind::Str),
                    _ => match self.rng.gen_range(0..3) {
                        0 => (*[BinOp::And, BinOp::Or].choose(&mut self.rng).unwrap(), Kind::Bool),
                        1 => (*[BinOp::Lt, BinOp::Ge].choose(&mut self.rng).unwrap(), Kind::Int),
                        _ => {
                            let op = *[BinOp::Eq, BinOp::Ne].choose(&mut self.rng).unwrap();
                            let any = *[Kind::Int, Kind::Str, Kind::Bool].choose(&mut self.rng).unwrap();
                            (op, any)
                        }
                    },
                };
                Expr::Binary(
                    op,
                    Box::new(self.expr(scope, operand, depth - 1)),
                    Box::new(self.expr(scope, operand, depth - 1)),
                )
            }
            (Kind::Int, 1) | (Kind::Bool, 1) if depth > 0 => {
                let op = if kind == Kind::Int { UnOp::Neg } else { UnOp::Not };
                let want = if self.slip() { Kind::Str } else { kind };
                let operand = match self.local(scope, |k| k == want) {
                    Some(x) => Atom::var(&x),
                    None => self.atom(scope, kind),
                };
                Expr::Unary(op, Box::new(Expr::Atom(operand)))
            }
            _ => Expr::Atom(self.atom(scope, kind)),
        }
    }

    fn has(&self, scope: &Scope, want: impl Fn(Kind) -> bool) -> bool {
        scope[GLOBALS.len()..].iter().any(|(_, k)| want(*k))
    }

    /// A bound variable other than the service constants, which the
    /// grammar only admits as plain operands.
    fn local(&mut self, scope: &Scope, want: impl Fn(Kind) -> bool) -> Option<String> {
        let fits: Vec<&String> = scope[GLOBALS.len()..]
            .iter()
            .filter(|(_, k)| want(*k))
            .map(|(x, _)| x)
            .collect();
        fits.choose(&mut self.rng).map(|x| (*x).clone())
    }

    fn literal(&mut self, kind: Kind) -> Option<Atom> {
        Some(match kind {
            Kind::Int => Atom::Lit(Literal::Int(self.rng.gen_range(0..100))),
            Kind::Bool => Atom::Lit(Literal::Bool(self.rng.gen())),
            Kind::Str => Atom::Lit(Literal::Str("s".into())),
            Kind::Obj(_) => Atom::Null,
            Kind::Thread => return None,
        })
    }

    /// An operand of `kind`, or of any kind after a slip.
    fn atom(&mut self, scope: &Scope, kind: Kind) -> Atom {
        if self.slip() {
            let any = *[Kind::Int, Kind::Bool, Kind::Str, Kind::Obj(0)]
                .choose(&mut self.rng)
                .unwrap();
            return match scope.choose(&mut self.rng) {
                Some((x, _)) if self.rng.gen_bool(0.6) => Atom::var(x),
                _ => self.literal(any).unwrap(),
            };
        }
        let vars: Vec<&String> = scope.iter().filter(|(_, k)| *k == kind).map(|(x, _)| x).collect();
        match (vars.choose(&mut self.rng), self.literal(kind)) {
            (Some(x), Some(lit)) => {
                if self.rng.gen_bool(0.7) {
                    Atom::var(x)
                } else {
                    lit
                }
            }
            (Some(x), None) => Atom::var(x),
            (None, Some(lit)) => lit,
            (None, None) => Atom::Null,
        }
    }
}
