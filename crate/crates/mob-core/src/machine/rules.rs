//! The reduction rules.

use std::sync::Arc;

use super::code::{Code, Frame, Thread};
use super::copy::copy_seq;
use super::error::RuntimeErrorKind;
use super::eval::{eval_atom, eval_atoms, eval_expr, eval_target, has_access, resolve, try_lock, try_unlock};
use super::trace::RuleName;
use super::value::{Closure, Content, Env, HeapCell, Value};
use super::{Agent, Machine};
use crate::collect::{closure_of, code_lookup};
use crate::external::{CallContext, ExecValue};
use crate::names::{AgentKey, Host, LocalRef, QualifiedRef};
use crate::syntax::ast::{AssignValue, Atom, Block, Instr, InstrKind, Span, Target};
use crate::syntax::printer;

type Detail = Vec<(&'static str, String)>;
type RuleResult = Result<Applied, RuntimeErrorKind>;

pub(super) struct Applied {
    pub rule: RuleName,
    pub detail: Detail,
    /// The agent left the pool and must not be put back.
    pub agent_removed: bool,
}

fn applied(rule: RuleName, detail: Detail) -> RuleResult {
    Ok(Applied {
        rule,
        detail,
        agent_removed: false,
    })
}

/// Short rendering of an instruction for diagnostics.
pub(super) fn describe(i: &Instr) -> String {
    match &i.kind {
        InstrKind::Go(v) => format!("go({})", printer::atom(v)),
        InstrKind::Return(v) => format!("return({})", printer::atom(v)),
        InstrKind::Join(x) => format!("join({x})"),
        InstrKind::Wait(x) => format!("wait({x})"),
        InstrKind::Notify(x) => format!("notify({x})"),
        InstrKind::Lock(x) => format!("lock({x})"),
        InstrKind::Unlock(x) => format!("unlock({x})"),
        InstrKind::If { cond, .. } => format!("if({})", printer::atom(cond)),
        InstrKind::While { cond, .. } => format!("while({})", printer::atom(cond)),
        InstrKind::Break => "break".into(),
        InstrKind::Exit => "exit".into(),
        InstrKind::AttrAssign { object, attr, .. } => format!("{object}.{attr} = ..."),
        InstrKind::Assign { target, value } => {
            let rhs = match value {
                AssignValue::New { class, .. } => format!("new {class}(...)"),
                AssignValue::Fork(_) => "fork {...}".into(),
                AssignValue::Bind { service, host: Some(h) } => {
                    format!("bind({service}, {})", printer::atom(h))
                }
                AssignValue::Bind { service, host: None } => format!("bind({service})"),
                AssignValue::Host => "host()".into(),
                AssignValue::Exec(_) => "exec(...)".into(),
                AssignValue::Invoke { object, method, .. } => format!("{object}.{method}(...)"),
                AssignValue::ReadAttr { object, attr } => format!("{object}.{attr}"),
                AssignValue::Expr(e) => printer::expr(e),
            };
            format!("{target} = {rhs}")
        }
    }
}

fn expect_ref(v: Value) -> Result<QualifiedRef, RuntimeErrorKind> {
    match v {
        Value::Ref(r) => Ok(r),
        other => Err(RuntimeErrorKind::NotARef(other.to_string())),
    }
}

fn expect_local(me: AgentKey, v: Value) -> Result<QualifiedRef, RuntimeErrorKind> {
    let r = expect_ref(v)?;
    if r.agent != me {
        return Err(RuntimeErrorKind::ForeignRef(r));
    }
    Ok(r)
}

fn expect_bool(v: Value) -> Result<bool, RuntimeErrorKind> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(RuntimeErrorKind::NonBooleanCondition(other.to_string())),
    }
}

fn local_closure(a: &Agent, r: QualifiedRef) -> Result<&Closure, RuntimeErrorKind> {
    if r.agent != a.key {
        return Err(RuntimeErrorKind::ForeignRef(r));
    }
    let cell = a.heap.get(&r.local).ok_or(RuntimeErrorKind::DanglingRef(r))?;
    cell.closure()
        .ok_or_else(|| RuntimeErrorKind::InvokeOnNonClosure(r.to_string()))
}

fn own_tref(th: &Thread) -> Result<u32, RuntimeErrorKind> {
    th.tref
        .ok_or_else(|| RuntimeErrorKind::StuckThread("notification has no code".into()))
}

fn top(th: &Thread) -> &Frame {
    th.top().expect("thread with code has a frame")
}

fn top_mut(th: &mut Thread) -> &mut Frame {
    th.top_mut().expect("thread with code has a frame")
}

/// Drops the head instruction of the top frame.
fn advance(th: &mut Thread) {
    let f = top_mut(th);
    f.code = f.code.tail();
}

fn bind(th: &mut Thread, x: &str, v: Value) {
    advance(th);
    top_mut(th).env.insert(x.to_string(), v);
}

fn arity(class: &str, expected: usize, found: usize) -> Result<(), RuntimeErrorKind> {
    if expected != found {
        return Err(RuntimeErrorKind::Arity {
            class: class.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

fn exec_value(v: ExecValue) -> Value {
    match v {
        ExecValue::Int(n) => Value::Int(n),
        ExecValue::Str(s) => Value::str(s),
        ExecValue::Bool(b) => Value::Bool(b),
    }
}

/// `x = self.m(params); return (x)`, run by the receiver of a remote call.
fn trampoline(method: &str, params: &[String], span: Span) -> Block {
    Arc::from(vec![
        Instr::new(
            InstrKind::Assign {
                target: "x".into(),
                value: AssignValue::Invoke {
                    object: Target::SelfRef,
                    method: method.to_string(),
                    args: params.iter().map(|p| Atom::var(p)).collect(),
                },
            },
            span,
        ),
        Instr::new(InstrKind::Return(Atom::var("x")), span),
    ])
}

impl Machine {
    /// Whether some rule applies to `th` in `a`. Rules that fail with an
    /// error count as enabled so that the error gets reported.
    pub(super) fn enabled(&self, a: &Agent, th: &Thread) -> bool {
        let Some(f) = th.top() else { return true };
        let Some(instr) = f.code.head() else { return true };
        let eval = |atom: &Atom| eval_atom(&a.heap, a.key, &f.env, atom);
        match &instr.kind {
            InstrKind::Go(v) => {
                let host_known = match eval(v) {
                    Ok(Value::Str(h)) => self.hosts.contains(&Host::new(&*h)),
                    _ => true,
                };
                let registered = match f.env.get("self") {
                    Some(Value::Ref(r)) => self.resolver.location(r).is_some(),
                    _ => true,
                };
                host_known && registered
            }
            InstrKind::Assign {
                value: AssignValue::Bind { service, host },
                ..
            } => match host {
                None => self.resolver.lookup_any(service, a.key).is_some(),
                Some(h) => match eval(h) {
                    Ok(Value::Str(h)) => self
                        .resolver
                        .lookup_at(service, &Host::new(&*h), a.key)
                        .is_some(),
                    _ => true,
                },
            },
            InstrKind::Assign {
                value: AssignValue::Invoke { object, .. },
                ..
            } => match eval_target(&a.heap, a.key, &f.env, object) {
                Ok(Value::Ref(r)) if r.agent != a.key => self
                    .agents
                    .get(&r.agent)
                    .is_some_and(|b| !b.terminated),
                _ => true,
            },
            _ => true,
        }
    }

    pub(super) fn apply(&mut self, a: &mut Agent, mut th: Thread) -> RuleResult {
        if th.is_notify() {
            let r = th.result.expect("notify carries a reference");
            let woken = a.suspended.remove(&r).unwrap_or_default();
            let n = woken.len();
            a.running.extend(woken);
            return applied(
                RuleName::NotifyThread,
                vec![("ref", r.to_string()), ("woken", n.to_string())],
            );
        }
        let Some((block, index, _)) = top(&th).code.split() else {
            return self.finish_block(a, th);
        };
        let block = block.clone();
        let instr = &block[index];
        let me = a.key;
        let env = &top(&th).env;
        match &instr.kind {
            InstrKind::Go(v) => {
                let h = match eval_atom(&a.heap, me, env, v)? {
                    Value::Str(h) => Host::new(&*h),
                    other => return Err(RuntimeErrorKind::NotAHost(other.to_string())),
                };
                let self_ref = expect_ref(eval_target(&a.heap, me, env, &Target::SelfRef)?)?;
                self.resolver.update_location(self_ref, h.clone())?;
                a.host = h.clone();
                advance(&mut th);
                a.running.push_back(th);
                applied(RuleName::Go, vec![("host", h.to_string())])
            }
            InstrKind::Return(v) => {
                let u = eval_atom(&a.heap, me, env, v)?;
                self.do_return(a, th, u, false)
            }
            InstrKind::Join(x) => {
                let target = eval_target(&a.heap, me, env, &Target::Var(x.clone()))?;
                let t2 = match target {
                    Value::Ref(QualifiedRef {
                        agent,
                        local: LocalRef::Thread(n),
                    }) if agent == me => n,
                    other => return Err(RuntimeErrorKind::JoinOnNonThread(other.to_string())),
                };
                let r = a.qualify(LocalRef::Thread(t2));
                let cell = a.heap.get(&r.local).ok_or(RuntimeErrorKind::DanglingRef(r))?;
                advance(&mut th);
                if th.tref == Some(t2) || cell.owner.is_none() {
                    a.running.push_back(th);
                    applied(RuleName::Join, vec![("thread", r.to_string())])
                } else {
                    a.suspend(r, th);
                    applied(RuleName::JoinSuspend, vec![("thread", r.to_string())])
                }
            }
            InstrKind::Wait(x) => {
                let r = expect_local(me, eval_target(&a.heap, me, env, &Target::Var(x.clone()))?)?;
                if th.tref.map(LocalRef::Thread) == Some(r.local) {
                    return Err(RuntimeErrorKind::WaitOnOwnThread);
                }
                if !a.heap.contains_key(&r.local) {
                    return Err(RuntimeErrorKind::DanglingRef(r));
                }
                advance(&mut th);
                a.suspend(r, th);
                applied(RuleName::Wait, vec![("ref", r.to_string())])
            }
            InstrKind::Notify(x) => {
                let r = expect_ref(eval_target(&a.heap, me, env, &Target::Var(x.clone()))?)?;
                advance(&mut th);
                a.running.push_back(Thread::notify(r));
                a.running.push_back(th);
                applied(RuleName::Notify, vec![("ref", r.to_string())])
            }
            InstrKind::Lock(x) => {
                let r = expect_ref(eval_target(&a.heap, me, env, &Target::Var(x.clone()))?)?;
                let t = own_tref(&th)?;
                if try_lock(&mut a.heap, me, r, t)? {
                    advance(&mut th);
                    a.running.push_back(th);
                    applied(RuleName::Lock, vec![("ref", r.to_string())])
                } else {
                    a.suspend(r, th);
                    applied(RuleName::LockFailed, vec![("ref", r.to_string())])
                }
            }
            InstrKind::Unlock(x) => {
                let r = expect_ref(eval_target(&a.heap, me, env, &Target::Var(x.clone()))?)?;
                let t = own_tref(&th)?;
                advance(&mut th);
                if try_unlock(&mut a.heap, me, r, t)? {
                    a.running.push_back(Thread::notify(r));
                    a.running.push_back(th);
                    applied(RuleName::Unlock, vec![("ref", r.to_string())])
                } else {
                    a.running.push_back(th);
                    applied(RuleName::UnlockIgnore, vec![("ref", r.to_string())])
                }
            }
            InstrKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let b = expect_bool(eval_atom(&a.heap, me, env, cond)?)?;
                let f = top_mut(&mut th);
                let rest = f.code.tail();
                f.code = rest.prepend(if b { then_block } else { else_block });
                a.running.push_back(th);
                applied(if b { RuleName::IfTrue } else { RuleName::IfFalse }, Vec::new())
            }
            InstrKind::While { cond, body } => {
                let f = top(&th);
                let rest = f.code.tail();
                if !(f.is_loop && rest.is_empty()) {
                    let env = f.env.clone();
                    top_mut(&mut th).code = rest;
                    th.stack.push(Frame {
                        env,
                        code: Code::single(&block, index),
                        is_loop: true,
                    });
                    a.running.push_back(th);
                    return applied(RuleName::PushCont, Vec::new());
                }
                let b = expect_bool(eval_atom(&a.heap, me, env, cond)?)?;
                let f = top_mut(&mut th);
                if b {
                    f.code = Code::single(&block, index).prepend(body);
                    a.running.push_back(th);
                    applied(RuleName::WhileTrue, Vec::new())
                } else {
                    f.code = Code::from_block(&self.break_block);
                    a.running.push_back(th);
                    applied(RuleName::WhileFalse, Vec::new())
                }
            }
            InstrKind::Break => {
                if th.stack.len() < 2 {
                    return Err(RuntimeErrorKind::StuckThread("break outside a loop".into()));
                }
                let inner = th.stack.pop().expect("checked length").env;
                let outer = top_mut(&mut th);
                for (k, v) in outer.env.iter_mut() {
                    if let Some(nv) = inner.get(k) {
                        *v = nv.clone();
                    }
                }
                a.running.push_back(th);
                applied(RuleName::Break, Vec::new())
            }
            InstrKind::Exit => {
                let self_ref = match env.get("self") {
                    Some(Value::Ref(r)) => Some(*r),
                    _ => None,
                };
                let registered = self_ref.is_some_and(|r| self.resolver.location(&r).is_some());
                if registered {
                    self.resolver.unregister_agent(me);
                    return Ok(Applied {
                        rule: RuleName::Exit,
                        detail: vec![("registered", "true".into())],
                        agent_removed: true,
                    });
                }
                a.terminated = true;
                a.running.clear();
                a.suspended.clear();
                applied(RuleName::Exit, Vec::new())
            }
            InstrKind::AttrAssign {
                object,
                attr,
                value,
            } => {
                let u = eval_atom(&a.heap, me, env, value)?;
                let r = expect_ref(eval_target(&a.heap, me, env, object)?)?;
                let t = own_tref(&th)?;
                let k = local_closure(a, r)?;
                if !has_access(&a.heap, me, r, t)? {
                    a.suspend(r, th);
                    return applied(RuleName::AttrAssignmentLocked, vec![("ref", r.to_string())]);
                }
                let current = k.env.get(attr).cloned().ok_or_else(|| {
                    RuntimeErrorKind::UnknownAttribute {
                        class: k.class.clone(),
                        attr: attr.clone(),
                    }
                })?;
                if let Value::Ref(inner) = resolve(&a.heap, me, current)? {
                    if inner.agent == me && !has_access(&a.heap, me, inner, t)? {
                        a.suspend(inner, th);
                        return applied(
                            RuleName::AttrAssignmentLockedInAttr,
                            vec![("ref", inner.to_string())],
                        );
                    }
                }
                let own_object = env.get("self") == Some(&Value::Ref(r));
                match &mut a.heap.get_mut(&r.local).expect("checked").content {
                    Content::Closure(k) => {
                        k.env.insert(attr.clone(), u.clone());
                    }
                    Content::Value(_) => unreachable!("checked by local_closure"),
                }
                advance(&mut th);
                // Keep the method's view of its own attribute in step.
                let frame = top_mut(&mut th);
                if own_object && frame.env.contains_key(attr) {
                    frame.env.insert(attr.clone(), u);
                }
                a.running.push_back(th);
                applied(RuleName::AttrAssignment, vec![("attr", attr.clone())])
            }
            InstrKind::Assign { target, value } => self.assign(a, th, &instr.clone(), target, value),
        }
    }

    fn assign(
        &mut self,
        a: &mut Agent,
        mut th: Thread,
        instr: &Instr,
        x: &str,
        value: &AssignValue,
    ) -> RuleResult {
        let me = a.key;
        let env = &top(&th).env;
        match value {
            AssignValue::Expr(e) => {
                let u = eval_expr(&a.heap, me, env, e)?;
                bind(&mut th, x, u);
                a.running.push_back(th);
                applied(RuleName::Assignment, Vec::new())
            }
            AssignValue::Host => {
                let h = Value::str(a.host.as_str());
                bind(&mut th, x, h);
                a.running.push_back(th);
                applied(RuleName::Host, Vec::new())
            }
            AssignValue::Fork(body) => {
                let child_env = env.clone();
                let t = a.fresh_thread();
                a.heap.insert(
                    LocalRef::Thread(t),
                    HeapCell {
                        owner: Some(t),
                        content: Content::Value(Value::Null),
                    },
                );
                let r = a.qualify(LocalRef::Thread(t));
                bind(&mut th, x, Value::Ref(r));
                a.running.push_back(th);
                a.running.push_back(Thread {
                    tref: Some(t),
                    stack: vec![Frame::new(child_env, Code::from_block(body))],
                    result: None,
                });
                applied(RuleName::Fork, vec![("child", format!("t{t}"))])
            }
            AssignValue::Bind { service, host } => {
                let (rule, found) = match host {
                    None => (RuleName::BindAny, self.resolver.lookup_any(service, me)),
                    Some(h) => {
                        let h = match eval_atom(&a.heap, me, env, h)? {
                            Value::Str(h) => Host::new(&*h),
                            other => return Err(RuntimeErrorKind::NotAHost(other.to_string())),
                        };
                        (RuleName::Bind, self.resolver.lookup_at(service, &h, me))
                    }
                };
                let r = found.ok_or_else(|| {
                    RuntimeErrorKind::StuckThread(format!("no provider of {service}"))
                })?;
                bind(&mut th, x, Value::Ref(r));
                a.running.push_back(th);
                applied(rule, vec![("bound", r.to_string())])
            }
            AssignValue::Exec(args) => {
                let us = eval_atoms(&a.heap, me, env, args)?;
                let (action, id, payload) = match us.as_slice() {
                    [Value::Str(act), Value::Int(id), Value::Str(p)] => (act.clone(), *id, p.clone()),
                    _ => {
                        let shown: Vec<String> = us.iter().map(Value::to_string).collect();
                        return Err(RuntimeErrorKind::BadExec(shown.join(", ")));
                    }
                };
                let out = self
                    .externs
                    .dispatch(CallContext { agent: me }, &action, id, &payload)?;
                let shown = match &out {
                    ExecValue::Str(s) => ("len", s.len().to_string()),
                    other => ("result", other.to_string()),
                };
                bind(&mut th, x, exec_value(out));
                a.running.push_back(th);
                applied(RuleName::Exec, vec![("action", action.to_string()), shown])
            }
            AssignValue::ReadAttr { object, attr } => {
                let r = expect_ref(eval_target(&a.heap, me, env, object)?)?;
                let k = local_closure(a, r)?;
                let u = k.env.get(attr).cloned().ok_or_else(|| {
                    RuntimeErrorKind::UnknownAttribute {
                        class: k.class.clone(),
                        attr: attr.clone(),
                    }
                })?;
                bind(&mut th, x, u);
                a.running.push_back(th);
                applied(RuleName::ReadAttr, vec![("attr", attr.clone())])
            }
            AssignValue::New { class, args } => {
                let us = eval_atoms(&a.heap, me, env, args)?;
                let entry = a
                    .code
                    .get(class)
                    .cloned()
                    .ok_or_else(|| RuntimeErrorKind::UnknownClass(class.clone()))?;
                arity(class, entry.params.len(), us.len())?;
                if !entry.is_agent {
                    let r = a.fresh_qualified_cell();
                    let mut k_env: Env = entry.params.iter().cloned().zip(us).collect();
                    k_env.insert("self".into(), Value::Ref(r));
                    a.heap.insert(
                        r.local,
                        HeapCell::unlocked(Content::Closure(Closure {
                            is_agent: false,
                            env: k_env,
                            class: class.clone(),
                        })),
                    );
                    bind(&mut th, x, Value::Ref(r));
                    a.running.push_back(th);
                    return applied(RuleName::NewObject, vec![("ref", r.to_string())]);
                }
                let main = code_lookup(&entry, "main")
                    .map_err(|_| RuntimeErrorKind::UnknownMethod {
                        class: class.clone(),
                        method: "main".into(),
                    })?
                    .body
                    .clone();
                let key = self.fresh_agent();
                let own = closure_of(&a.code, class)
                    .map_err(|_| RuntimeErrorKind::UnknownClass(class.clone()))?;
                let mut b = Agent::new(key, a.host.clone(), own, class.clone());
                let r = b.fresh_qualified_cell();
                let out = copy_seq(&a.code, &a.heap, me, key, &mut b.next_cell, &us)?;
                for (name, e) in out.code {
                    b.code.entry(name).or_insert(e);
                }
                b.heap.extend(out.heap);
                let mut k_env: Env = entry.params.iter().cloned().zip(out.values).collect();
                k_env.insert("self".into(), Value::Ref(r));
                b.heap.insert(
                    r.local,
                    HeapCell::unlocked(Content::Closure(Closure {
                        is_agent: true,
                        env: k_env.clone(),
                        class: class.clone(),
                    })),
                );
                b.launch(k_env, Code::from_block(&main), None);
                self.resolver.register_agent(r, a.host.clone(), &entry.provides)?;
                self.agents.insert(key, b);
                bind(&mut th, x, Value::Ref(r));
                a.running.push_back(th);
                applied(
                    RuleName::NewAgent,
                    vec![("agent", key.to_string()), ("ref", r.to_string())],
                )
            }
            AssignValue::Invoke {
                object,
                method,
                args,
            } => {
                let r = match eval_target(&a.heap, me, env, object)? {
                    Value::Ref(r) => r,
                    other => return Err(RuntimeErrorKind::InvokeOnNonClosure(other.to_string())),
                };
                let us = eval_atoms(&a.heap, me, env, args)?;
                let t = own_tref(&th)?;
                if r.agent == me {
                    self.local_invoke(a, th, x, r, t, method, us)
                } else {
                    self.remote_invoke(a, th, instr, x, r, t, method, us)
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn local_invoke(
        &mut self,
        a: &mut Agent,
        mut th: Thread,
        x: &str,
        r: QualifiedRef,
        t: u32,
        method: &str,
        us: Vec<Value>,
    ) -> RuleResult {
        let me = a.key;
        let k = local_closure(a, r)?;
        if !has_access(&a.heap, me, r, t)? {
            a.suspend(r, th);
            return applied(RuleName::LocalInvokeLocked, vec![("ref", r.to_string())]);
        }
        let entry = a
            .code
            .get(&k.class)
            .ok_or_else(|| RuntimeErrorKind::UnknownClass(k.class.clone()))?;
        let m = code_lookup(entry, method).map_err(|_| RuntimeErrorKind::UnknownMethod {
            class: k.class.clone(),
            method: method.to_string(),
        })?;
        arity(&format!("{}.{method}", k.class), m.params.len(), us.len())?;
        let mut callee_env = k.env.clone();
        callee_env.extend(m.params.iter().cloned().zip(us));
        let body = m.body.clone();
        let slot = a.fresh_qualified_cell();
        a.heap.insert(
            slot.local,
            HeapCell {
                owner: Some(t),
                content: Content::Value(Value::Null),
            },
        );
        a.running.push_back(Thread {
            tref: Some(t),
            stack: vec![Frame::new(callee_env, Code::from_block(&body))],
            result: Some(slot),
        });
        bind(&mut th, x, Value::Ref(slot));
        a.suspend(slot, th);
        applied(
            RuleName::LocalInvoke,
            vec![("method", method.to_string()), ("slot", slot.to_string())],
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn remote_invoke(
        &mut self,
        a: &mut Agent,
        mut th: Thread,
        instr: &Instr,
        x: &str,
        r: QualifiedRef,
        t: u32,
        method: &str,
        us: Vec<Value>,
    ) -> RuleResult {
        let me = a.key;
        let b = self
            .agents
            .get_mut(&r.agent)
            .ok_or_else(|| RuntimeErrorKind::StuckThread(format!("agent {} is gone", r.agent)))?;
        let cell = b.heap.get(&r.local).ok_or(RuntimeErrorKind::DanglingRef(r))?;
        let k = match cell.closure() {
            Some(k) if k.is_agent => k,
            _ => return Err(RuntimeErrorKind::InvokeOnNonClosure(r.to_string())),
        };
        let class = k.class.clone();
        let out = copy_seq(&a.code, &a.heap, me, r.agent, &mut b.next_cell, &us)?;
        for (name, e) in out.code {
            b.code.entry(name).or_insert(e);
        }
        b.heap.extend(out.heap);
        let entry = b
            .code
            .get(&class)
            .ok_or_else(|| RuntimeErrorKind::UnknownClass(class.clone()))?;
        let params = code_lookup(entry, method)
            .map_err(|_| RuntimeErrorKind::UnknownMethod {
                class: class.clone(),
                method: method.to_string(),
            })?
            .params
            .clone();
        arity(&format!("{class}.{method}"), params.len(), out.values.len())?;
        let mut env: Env = params.iter().cloned().zip(out.values).collect();
        env.insert("self".into(), Value::Ref(r));
        let slot = a.fresh_qualified_cell();
        a.heap.insert(
            slot.local,
            HeapCell {
                owner: Some(t),
                content: Content::Value(Value::Null),
            },
        );
        let code = Code::from_block(&trampoline(method, &params, instr.span));
        b.launch(env, code, Some(slot));
        bind(&mut th, x, Value::Ref(slot));
        a.suspend(slot, th);
        applied(
            RuleName::RemoteInvoke,
            vec![
                ("target", r.to_string()),
                ("method", method.to_string()),
                ("slot", slot.to_string()),
            ],
        )
    }

    fn do_return(&mut self, a: &mut Agent, th: Thread, u: Value, implicit: bool) -> RuleResult {
        let slot = th
            .result
            .ok_or_else(|| RuntimeErrorKind::StuckThread("return outside a method".into()))?;
        let mut detail = vec![("slot", slot.to_string())];
        if implicit {
            detail.push(("implicit", "true".into()));
        }
        if slot.agent == a.key {
            a.heap
                .insert(slot.local, HeapCell::unlocked(Content::Value(u)));
            a.running.push_back(Thread::notify(slot));
            return applied(RuleName::LocalReturn, detail);
        }
        let Some(b) = self.agents.get_mut(&slot.agent) else {
            detail.push(("dropped", "true".into()));
            return applied(RuleName::RemoteReturn, detail);
        };
        let out = copy_seq(&a.code, &a.heap, a.key, slot.agent, &mut b.next_cell, &[u])?;
        for (name, e) in out.code {
            b.code.entry(name).or_insert(e);
        }
        b.heap.extend(out.heap);
        let u = out.values.into_iter().next().expect("one value copied");
        b.heap.insert(slot.local, HeapCell::unlocked(Content::Value(u)));
        b.running.push_back(Thread::notify(slot));
        applied(RuleName::RemoteReturn, detail)
    }

    /// The top frame has no code left.
    fn finish_block(&mut self, a: &mut Agent, th: Thread) -> RuleResult {
        if th.stack.len() > 1 {
            return Err(RuntimeErrorKind::StuckThread(
                "block finished above a pending continuation".into(),
            ));
        }
        match th.result {
            Some(_) if self.strict_returns => Err(RuntimeErrorKind::MissingReturn),
            Some(_) => self.do_return(a, th, Value::Null, true),
            None => {
                let t = own_tref(&th)?;
                let r = a.qualify(LocalRef::Thread(t));
                a.heap
                    .insert(r.local, HeapCell::unlocked(Content::Value(Value::Null)));
                a.running.push_back(Thread::notify(r));
                applied(RuleName::End, Vec::new())
            }
        }
    }
}
