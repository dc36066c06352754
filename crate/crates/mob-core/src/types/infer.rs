//! Constraint generation for programs, one unification per rule premise.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use super::term::{Prim, TypeTerm};
use super::unify::{NodeId, Substitution, TypeMismatch};
use crate::syntax::ast::*;

/// Keys of a typing environment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EnvKey {
    Class(String),
    Service(String),
    Var(String),
    /// `self.x` inside a class body.
    Attr(String),
    /// Return slot of a method.
    Ret(String),
}

impl fmt::Display for EnvKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvKey::Class(x) | EnvKey::Service(x) | EnvKey::Var(x) => f.write_str(x),
            EnvKey::Attr(x) => write!(f, "self.{x}"),
            EnvKey::Ret(m) => write!(f, "{m}_ret"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeEnv {
    pub entries: BTreeMap<EnvKey, TypeTerm>,
}

impl TypeEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: EnvKey, ty: TypeTerm) -> Self {
        self.entries.insert(key, ty);
        self
    }

    pub fn get(&self, key: &EnvKey) -> Option<&TypeTerm> {
        self.entries.get(key)
    }

    /// `Γ \ keys`.
    pub fn without(&self, keys: &[EnvKey]) -> Self {
        let mut out = self.clone();
        for k in keys {
            out.entries.remove(k);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("{span}: type error in rule {rule}: {mismatch}")]
    Mismatch {
        rule: &'static str,
        span: Span,
        mismatch: TypeMismatch,
    },
    #[error("{span}: agent {agent} provides {service} but does not define method {method}")]
    MissingServiceMethod {
        span: Span,
        agent: String,
        service: String,
        method: String,
    },
    #[error("{span}: {class} has no attribute {attr}")]
    UnknownAttribute {
        span: Span,
        class: String,
        attr: String,
    },
    #[error("{span}: malformed exec: {reason}")]
    BadExec { span: Span, reason: String },
    #[error("{span}: unbound name {name}")]
    Unbound { span: Span, name: String },
}

/// Result of typing a whole program.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramTyping {
    /// Interface of every service declared, required or provided.
    pub services: BTreeMap<String, TypeTerm>,
    /// Classes, agents and the script's final variables.
    pub env: TypeEnv,
}

impl ProgramTyping {
    /// `service S : T` and `X : T` lines in canonical notation.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (s, t) in &self.services {
            out.push_str(&format!("service {s} : {}\n", t.canonical()));
        }
        for (k, t) in &self.env.entries {
            if let EnvKey::Class(x) = k {
                out.push_str(&format!("{x} : {}\n", t.canonical()));
            }
        }
        out
    }
}

/// Types a single expression under `env`.
pub fn infer_expression(env: &TypeEnv, e: &Expr) -> Result<TypeTerm, TypeError> {
    let mut cx = Infer::default();
    let mut scope = Scope::default();
    for (k, t) in &env.entries {
        let n = cx.s.import(t);
        match k {
            EnvKey::Var(x) => {
                scope.vars.insert(x.clone(), n);
            }
            EnvKey::Attr(x) => {
                scope.attrs.insert(x.clone(), n);
            }
            _ => {}
        }
    }
    let n = cx.expr(&scope, e, Span::default())?;
    Ok(cx.s.export(n))
}

/// Types a program whose restrictions have been checked. `int_globals` are
/// names bound to integers in every scope.
pub fn infer_program(program: &Program, int_globals: &[&str]) -> Result<ProgramTyping, TypeError> {
    let mut cx = Infer::default();
    let mut globals = HashMap::new();
    for g in int_globals {
        let n = cx.s.prim(Prim::Int);
        globals.insert(g.to_string(), n);
    }

    // Service and Requires rules.
    for def in &program.definitions {
        match def {
            Definition::Service(s) => {
                let fields = s
                    .methods
                    .iter()
                    .map(|m| (m.clone(), cx.s.fresh()))
                    .collect();
                let rec = cx.s.record(fields, false);
                cx.services.insert(s.name.clone(), rec);
            }
            Definition::Requires(r) => {
                for s in &r.services {
                    cx.service_or_open(s);
                }
            }
            Definition::Class(_) => {}
        }
    }

    // Every class and agent name is in scope for every body.
    for c in program.classes() {
        let attrs: Vec<NodeId> = c.params.iter().map(|_| cx.s.fresh()).collect();
        let mut fields = BTreeMap::new();
        let mut sigs = HashMap::new();
        for m in &c.methods {
            let params: Vec<NodeId> = m.params.iter().map(|_| cx.s.fresh()).collect();
            let ret = cx.s.fresh();
            let sig = cx.s.signature(params.clone(), ret);
            fields.insert(m.name.clone(), sig);
            sigs.insert(m.name.clone(), (params, ret));
        }
        let iface = cx.s.record(fields, false);
        let class = cx.s.class(attrs.clone(), iface);
        for s in &c.requires {
            cx.service_or_open(s);
        }
        cx.classes.insert(
            c.name.clone(),
            ClassInfo {
                attrs,
                iface,
                class,
                sigs,
            },
        );
    }

    // Class / Agent rules with MethodCollection.
    for c in program.classes() {
        let info = cx.classes[&c.name].clone();
        let mut base = Scope {
            vars: globals.clone(),
            self_ty: Some(info.iface),
            class_name: Some(c.name.clone()),
            ..Scope::default()
        };
        for (x, &a) in c.params.iter().zip(&info.attrs) {
            base.vars.insert(x.clone(), a);
            base.attrs.insert(x.clone(), a);
        }
        for m in &c.methods {
            let (params, ret) = info.sigs[&m.name].clone();
            let mut scope = base.clone();
            for (x, &p) in m.params.iter().zip(&params) {
                scope.vars.insert(x.clone(), p);
            }
            scope.ret = Some(ret);
            cx.block(&m.body, scope)?;
        }
        for s in &c.provides {
            let service = cx.service_or_open(s);
            cx.check_provides(c, s, service, info.iface)?;
        }
    }

    let scope = Scope {
        vars: globals,
        ..Scope::default()
    };
    let final_scope = cx.block(&program.body, scope)?;

    let mut env = TypeEnv::new();
    let mut services = BTreeMap::new();
    for (s, &n) in &cx.services {
        let t = cx.s.export(n);
        env.entries.insert(EnvKey::Service(s.clone()), t.clone());
        services.insert(s.clone(), t);
    }
    for (x, info) in &cx.classes {
        env.entries
            .insert(EnvKey::Class(x.clone()), cx.s.export(info.class));
    }
    for (x, &n) in &final_scope.vars {
        if !int_globals.contains(&x.as_str()) {
            env.entries.insert(EnvKey::Var(x.clone()), cx.s.export(n));
        }
    }
    Ok(ProgramTyping { services, env })
}

#[derive(Debug, Clone)]
struct ClassInfo {
    attrs: Vec<NodeId>,
    iface: NodeId,
    class: NodeId,
    sigs: HashMap<String, (Vec<NodeId>, NodeId)>,
}

#[derive(Default)]
struct Infer {
    s: Substitution,
    classes: HashMap<String, ClassInfo>,
    services: HashMap<String, NodeId>,
}

#[derive(Debug, Clone, Default)]
struct Scope {
    vars: HashMap<String, NodeId>,
    attrs: HashMap<String, NodeId>,
    self_ty: Option<NodeId>,
    class_name: Option<String>,
    ret: Option<NodeId>,
}

const EXEC_INT: &[&str] = &["init"];
const EXEC_STRING: &[&str] = &["read", "readLine"];
const EXEC_BOOL: &[&str] = &["write", "isAlive", "action", "close"];

impl Infer {
    fn service_or_open(&mut self, s: &str) -> NodeId {
        if let Some(&n) = self.services.get(s) {
            return n;
        }
        let n = self.s.record(BTreeMap::new(), true);
        self.services.insert(s.to_string(), n);
        n
    }

    fn unify(&mut self, rule: &'static str, span: Span, a: NodeId, b: NodeId) -> Result<(), TypeError> {
        self.s.unify_nodes(a, b).map_err(|mismatch| TypeError::Mismatch {
            rule,
            span,
            mismatch,
        })
    }

    /// Side condition of the Agent rule: every method of the provided
    /// interface exists in the agent with an equivalent signature.
    fn check_provides(
        &mut self,
        c: &ClassDef,
        service: &str,
        service_ty: NodeId,
        iface: NodeId,
    ) -> Result<(), TypeError> {
        let wanted = self.s.record_fields(service_ty).unwrap_or_default();
        let have = self.s.record_fields(iface).unwrap_or_default();
        for (m, sig) in wanted {
            match have.get(&m) {
                Some(&own) => self.unify("Agent", c.span, sig, own)?,
                None => {
                    return Err(TypeError::MissingServiceMethod {
                        span: c.span,
                        agent: c.name.clone(),
                        service: service.to_string(),
                        method: m,
                    })
                }
            }
        }
        Ok(())
    }

    fn atom(&mut self, scope: &Scope, a: &Atom, span: Span) -> Result<NodeId, TypeError> {
        Ok(match a {
            Atom::Lit(Literal::Int(_)) => self.s.prim(Prim::Int),
            Atom::Lit(Literal::Str(_)) => self.s.prim(Prim::Str),
            Atom::Lit(Literal::Bool(_)) => self.s.prim(Prim::Bool),
            Atom::Null => self.s.fresh_not_prim(),
            Atom::Target(t) => self.target(scope, t, span)?,
        })
    }

    fn target(&mut self, scope: &Scope, t: &Target, span: Span) -> Result<NodeId, TypeError> {
        match t {
            Target::SelfRef => scope.self_ty.ok_or_else(|| TypeError::Unbound {
                span,
                name: "self".into(),
            }),
            Target::Var(x) => scope.vars.get(x).copied().ok_or_else(|| TypeError::Unbound {
                span,
                name: x.clone(),
            }),
        }
    }

    fn expr(&mut self, scope: &Scope, e: &Expr, span: Span) -> Result<NodeId, TypeError> {
        match e {
            Expr::Atom(a) => self.atom(scope, a, span),
            Expr::Unary(op, inner) => {
                let t = self.expr(scope, inner, span)?;
                let p = match op {
                    UnOp::Not => Prim::Bool,
                    UnOp::Neg => Prim::Int,
                };
                let want = self.s.prim(p);
                self.unify("UnOp", span, t, want)?;
                Ok(want)
            }
            Expr::Binary(op, l, r) => {
                let lt = self.expr(scope, l, span)?;
                let rt = self.expr(scope, r, span)?;
                let (operand, result) = match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                        (Some(Prim::Int), Prim::Int)
                    }
                    BinOp::Concat => (Some(Prim::Str), Prim::Str),
                    BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => (Some(Prim::Int), Prim::Bool),
                    BinOp::And | BinOp::Or => (Some(Prim::Bool), Prim::Bool),
                    BinOp::Eq | BinOp::Ne => (None, Prim::Bool),
                };
                match operand {
                    Some(p) => {
                        let want = self.s.prim(p);
                        self.unify("BinOp", span, lt, want)?;
                        self.unify("BinOp", span, rt, want)?;
                    }
                    None => self.unify("BinOp", span, lt, rt)?,
                }
                Ok(self.s.prim(result))
            }
        }
    }

    fn expect_prim(
        &mut self,
        rule: &'static str,
        span: Span,
        n: NodeId,
        p: Prim,
    ) -> Result<(), TypeError> {
        let want = self.s.prim(p);
        self.unify(rule, span, n, want)
    }

    fn block(&mut self, block: &[Instr], mut scope: Scope) -> Result<Scope, TypeError> {
        for instr in block {
            self.instr(instr, &mut scope)?;
        }
        Ok(scope)
    }

    fn instr(&mut self, instr: &Instr, scope: &mut Scope) -> Result<(), TypeError> {
        let span = instr.span;
        match &instr.kind {
            InstrKind::Go(v) => {
                let t = self.atom(scope, v, span)?;
                self.expect_prim("Go", span, t, Prim::Str)
            }
            InstrKind::Return(v) => {
                let t = self.atom(scope, v, span)?;
                let ret = scope.ret.ok_or_else(|| TypeError::Unbound {
                    span,
                    name: "return slot".into(),
                })?;
                self.unify("Return", span, t, ret)
            }
            InstrKind::Join(x) => {
                let t = self.target(scope, &Target::Var(x.clone()), span)?;
                self.expect_prim("Join", span, t, Prim::Thread)
            }
            InstrKind::Wait(x) | InstrKind::Notify(x) | InstrKind::Lock(x) | InstrKind::Unlock(x) => {
                let rule = match &instr.kind {
                    InstrKind::Wait(_) => "Wait",
                    InstrKind::Notify(_) => "Notify",
                    InstrKind::Lock(_) => "Lock",
                    _ => "Unlock",
                };
                let t = self.target(scope, &Target::Var(x.clone()), span)?;
                let any_object = self.s.record(BTreeMap::new(), true);
                self.unify(rule, span, t, any_object)
            }
            InstrKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let t = self.atom(scope, cond, span)?;
                self.expect_prim("If", span, t, Prim::Bool)?;
                self.block(then_block, scope.clone())?;
                self.block(else_block, scope.clone())?;
                Ok(())
            }
            InstrKind::While { cond, body } => {
                let t = self.atom(scope, cond, span)?;
                self.expect_prim("While", span, t, Prim::Bool)?;
                self.block(body, scope.clone())?;
                Ok(())
            }
            InstrKind::Break | InstrKind::Exit => Ok(()),
            InstrKind::AttrAssign {
                object,
                attr,
                value,
            } => {
                let vt = self.atom(scope, value, span)?;
                if *object == Target::SelfRef {
                    let at = self.attr(scope, attr, span)?;
                    self.unify("AttrWrite", span, at, vt)?;
                } else {
                    self.target(scope, object, span)?;
                }
                Ok(())
            }
            InstrKind::Assign { target, value } => {
                let t = self.assign_value(scope, value, span)?;
                scope.vars.insert(target.clone(), t);
                Ok(())
            }
        }
    }

    fn attr(&mut self, scope: &Scope, attr: &str, span: Span) -> Result<NodeId, TypeError> {
        scope
            .attrs
            .get(attr)
            .copied()
            .ok_or_else(|| TypeError::UnknownAttribute {
                span,
                class: scope.class_name.clone().unwrap_or_default(),
                attr: attr.to_string(),
            })
    }

    fn assign_value(&mut self, scope: &Scope, value: &AssignValue, span: Span) -> Result<NodeId, TypeError> {
        match value {
            AssignValue::Expr(e) => self.expr(scope, e, span),
            AssignValue::Host => Ok(self.s.prim(Prim::Str)),
            AssignValue::Fork(body) => {
                self.block(body, scope.clone())?;
                Ok(self.s.prim(Prim::Thread))
            }
            AssignValue::Bind { service, host } => {
                if let Some(h) = host {
                    let ht = self.atom(scope, h, span)?;
                    self.expect_prim("Bind", span, ht, Prim::Str)?;
                }
                Ok(self.service_or_open(service))
            }
            AssignValue::New { class, args } => {
                let info = self
                    .classes
                    .get(class)
                    .cloned()
                    .ok_or_else(|| TypeError::Unbound {
                        span,
                        name: class.clone(),
                    })?;
                let arg_types = args
                    .iter()
                    .map(|a| self.atom(scope, a, span))
                    .collect::<Result<Vec<_>, _>>()?;
                let fresh_iface = self.s.fresh();
                let wanted = self.s.class(arg_types, fresh_iface);
                self.unify("New", span, info.class, wanted)?;
                Ok(info.iface)
            }
            AssignValue::Invoke {
                object,
                method,
                args,
            } => {
                let ot = self.target(scope, object, span)?;
                let arg_types = args
                    .iter()
                    .map(|a| self.atom(scope, a, span))
                    .collect::<Result<Vec<_>, _>>()?;
                let ret = self.s.fresh();
                let sig = self.s.signature(arg_types, ret);
                let rec = self.s.record(BTreeMap::from([(method.clone(), sig)]), true);
                self.unify("MethodInv", span, ot, rec)?;
                Ok(ret)
            }
            AssignValue::ReadAttr { object, attr } => {
                if *object == Target::SelfRef {
                    self.attr(scope, attr, span)
                } else {
                    self.target(scope, object, span)?;
                    Ok(self.s.fresh())
                }
            }
            AssignValue::Exec(args) => {
                let [action, id, payload] = args.as_slice() else {
                    return Err(TypeError::BadExec {
                        span,
                        reason: format!("expected 3 arguments, found {}", args.len()),
                    });
                };
                let Atom::Lit(Literal::Str(action)) = action else {
                    return Err(TypeError::BadExec {
                        span,
                        reason: "the first argument must be a string literal".into(),
                    });
                };
                let (rule, result) = if EXEC_INT.contains(&action.as_str()) {
                    ("ExecInt", Prim::Int)
                } else if EXEC_STRING.contains(&action.as_str()) {
                    ("ExecString", Prim::Str)
                } else if EXEC_BOOL.contains(&action.as_str()) {
                    ("ExecBool", Prim::Bool)
                } else {
                    return Err(TypeError::BadExec {
                        span,
                        reason: format!("unknown action \"{action}\""),
                    });
                };
                let it = self.atom(scope, id, span)?;
                self.expect_prim(rule, span, it, Prim::Int)?;
                let pt = self.atom(scope, payload, span)?;
                self.expect_prim(rule, span, pt, Prim::Str)?;
                Ok(self.s.prim(result))
            }
        }
    }
}
