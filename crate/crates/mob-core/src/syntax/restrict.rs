//! Static well-formedness checks that sit between parsing and typing.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    DefinitionOrder,
    MissingMain,
    MainWithParameters,
    ReturnOutsideMethod,
    BreakOutsideWhile,
    GoOutsideAgentMethod,
    ExitOutsideAgentMethod,
    DuplicateMethod,
    DuplicateParameter,
    DuplicateDefinition,
    UnboundIdentifier,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    pub span: Span,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.rule, self.message)
    }
}

/// Checks every syntactic restriction. `globals` names variables bound in
/// every scope (the integer service constants).
pub fn check_restrictions(program: &Program, globals: &[&str]) -> Result<(), Vec<Violation>> {
    let mut c = Checker {
        violations: Vec::new(),
        classes: program.classes().map(|c| c.name.clone()).collect(),
        globals: globals.iter().map(|s| s.to_string()).collect(),
    };
    c.program(program);
    if c.violations.is_empty() {
        Ok(())
    } else {
        Err(c.violations)
    }
}

struct Checker {
    violations: Vec<Violation>,
    classes: BTreeSet<String>,
    globals: Vec<String>,
}

#[derive(Clone, Copy)]
struct Ctx {
    has_self: bool,
    in_method: bool,
    in_agent: bool,
    in_while: bool,
}

#[derive(Clone)]
struct Scope<'s> {
    vars: HashSet<String>,
    services: &'s BTreeSet<String>,
}

impl Checker {
    fn report(&mut self, rule: Rule, span: Span, message: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            span,
            message: message.into(),
        });
    }

    fn program(&mut self, program: &Program) {
        // Phase: 0 services, 1 requires, 2 classes and agents.
        let mut phase = 0;
        let mut services: BTreeSet<String> = BTreeSet::new();
        let mut seen_classes: BTreeSet<String> = BTreeSet::new();
        for def in &program.definitions {
            let (this_phase, span) = match def {
                Definition::Service(s) => (0, s.span),
                Definition::Requires(r) => (1, r.span),
                Definition::Class(c) => (2, c.span),
            };
            if this_phase < phase {
                self.report(
                    Rule::DefinitionOrder,
                    span,
                    "service definitions must precede requires clauses, which must precede classes and agents",
                );
            }
            phase = phase.max(this_phase);
            match def {
                Definition::Service(s) => {
                    if !services.insert(s.name.clone()) {
                        self.report(
                            Rule::DuplicateDefinition,
                            s.span,
                            format!("service `{}` defined twice", s.name),
                        );
                    }
                    self.distinct(&s.methods, Rule::DuplicateMethod, s.span, "method");
                }
                Definition::Requires(r) => {
                    services.extend(r.services.iter().cloned());
                }
                Definition::Class(c) => {
                    if !seen_classes.insert(c.name.clone()) {
                        self.report(
                            Rule::DuplicateDefinition,
                            c.span,
                            format!("class `{}` defined twice", c.name),
                        );
                    }
                    self.class(c, &services);
                }
            }
        }
        let scope = Scope {
            vars: self.globals.iter().cloned().collect(),
            services: &services,
        };
        let ctx = Ctx {
            has_self: false,
            in_method: false,
            in_agent: false,
            in_while: false,
        };
        self.block(&program.body, ctx, scope);
    }

    fn distinct(&mut self, names: &[String], rule: Rule, span: Span, what: &str) {
        let mut seen = HashSet::new();
        for n in names {
            if !seen.insert(n) {
                self.report(rule, span, format!("{what} `{n}` declared twice"));
            }
        }
    }

    fn class(&mut self, c: &ClassDef, services: &BTreeSet<String>) {
        for s in &c.provides {
            if !services.contains(s) {
                self.report(
                    Rule::UnboundIdentifier,
                    c.span,
                    format!("service `{s}` is provided but never declared"),
                );
            }
        }
        if c.is_agent && c.method("main").is_none() {
            self.report(
                Rule::MissingMain,
                c.span,
                format!("agent `{}` does not define main", c.name),
            );
        }
        if let Some(main) = c.method("main") {
            if c.is_agent && !main.params.is_empty() {
                self.report(
                    Rule::MainWithParameters,
                    main.span,
                    "the main method of an agent takes no parameters",
                );
            }
        }
        self.distinct(&c.params, Rule::DuplicateParameter, c.span, "parameter");
        let names: Vec<String> = c.methods.iter().map(|m| m.name.clone()).collect();
        self.distinct(&names, Rule::DuplicateMethod, c.span, "method");

        let mut local_services = services.clone();
        local_services.extend(c.requires.iter().cloned());
        let mut base: HashSet<String> = self.globals.iter().cloned().collect();
        base.extend(c.params.iter().cloned());
        for m in &c.methods {
            self.distinct(&m.params, Rule::DuplicateParameter, m.span, "parameter");
            let mut vars = base.clone();
            vars.extend(m.params.iter().cloned());
            let scope = Scope {
                vars,
                services: &local_services,
            };
            let ctx = Ctx {
                has_self: true,
                in_method: true,
                in_agent: c.is_agent,
                in_while: false,
            };
            self.block(&m.body, ctx, scope);
        }
    }

    fn block(&mut self, block: &[Instr], ctx: Ctx, mut scope: Scope<'_>) {
        for instr in block {
            self.instr(instr, ctx, &mut scope);
        }
    }

    fn atom(&mut self, a: &Atom, ctx: Ctx, scope: &Scope<'_>, span: Span) {
        if let Atom::Target(t) = a {
            self.target(t, ctx, scope, span);
        }
    }

    fn target(&mut self, t: &Target, ctx: Ctx, scope: &Scope<'_>, span: Span) {
        match t {
            Target::SelfRef if !ctx.has_self => {
                self.report(Rule::UnboundIdentifier, span, "`self` outside a method body")
            }
            Target::Var(x) => self.var(x, scope, span),
            _ => {}
        }
    }

    fn var(&mut self, x: &str, scope: &Scope<'_>, span: Span) {
        if !scope.vars.contains(x) {
            self.report(
                Rule::UnboundIdentifier,
                span,
                format!("variable `{x}` is not bound"),
            );
        }
    }

    fn expr(&mut self, e: &Expr, ctx: Ctx, scope: &Scope<'_>, span: Span) {
        match e {
            Expr::Atom(a) => self.atom(a, ctx, scope, span),
            Expr::Unary(_, inner) => self.expr(inner, ctx, scope, span),
            Expr::Binary(_, l, r) => {
                self.expr(l, ctx, scope, span);
                self.expr(r, ctx, scope, span);
            }
        }
    }

    fn instr(&mut self, instr: &Instr, ctx: Ctx, scope: &mut Scope<'_>) {
        let span = instr.span;
        match &instr.kind {
            InstrKind::Go(v) => {
                if !ctx.in_agent {
                    self.report(
                        Rule::GoOutsideAgentMethod,
                        span,
                        "go may only appear in a method of an agent",
                    );
                }
                self.atom(v, ctx, scope, span);
            }
            InstrKind::Return(v) => {
                if !ctx.in_method {
                    self.report(
                        Rule::ReturnOutsideMethod,
                        span,
                        "return may only appear in a method body",
                    );
                }
                self.atom(v, ctx, scope, span);
            }
            InstrKind::Join(x)
            | InstrKind::Wait(x)
            | InstrKind::Notify(x)
            | InstrKind::Lock(x)
            | InstrKind::Unlock(x) => self.var(x, scope, span),
            InstrKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.atom(cond, ctx, scope, span);
                self.block(then_block, ctx, scope.clone());
                self.block(else_block, ctx, scope.clone());
            }
            InstrKind::While { cond, body } => {
                self.atom(cond, ctx, scope, span);
                let inner = Ctx {
                    in_while: true,
                    ..ctx
                };
                self.block(body, inner, scope.clone());
            }
            InstrKind::Break => {
                if !ctx.in_while {
                    self.report(
                        Rule::BreakOutsideWhile,
                        span,
                        "break may only appear inside a while body",
                    );
                }
            }
            InstrKind::Exit => {
                if !ctx.in_agent {
                    self.report(
                        Rule::ExitOutsideAgentMethod,
                        span,
                        "exit may only appear in a method of an agent or at the end of the program",
                    );
                }
            }
            InstrKind::AttrAssign { object, value, .. } => {
                self.target(object, ctx, scope, span);
                self.atom(value, ctx, scope, span);
            }
            InstrKind::Assign { target, value } => {
                match value {
                    AssignValue::New { class, args } => {
                        if !self.classes.contains(class) {
                            self.report(
                                Rule::UnboundIdentifier,
                                span,
                                format!("class `{class}` is not defined"),
                            );
                        }
                        for a in args {
                            self.atom(a, ctx, scope, span);
                        }
                    }
                    AssignValue::Fork(body) => {
                        // A forked thread starts a fresh context: no enclosing
                        // loop to break from and no result slot to return to.
                        let inner = Ctx {
                            in_method: false,
                            in_while: false,
                            ..ctx
                        };
                        self.block(body, inner, scope.clone());
                    }
                    AssignValue::Bind { service, host } => {
                        if !scope.services.contains(service) {
                            self.report(
                                Rule::UnboundIdentifier,
                                span,
                                format!("service `{service}` is not declared"),
                            );
                        }
                        if let Some(h) = host {
                            self.atom(h, ctx, scope, span);
                        }
                    }
                    AssignValue::Host => {}
                    AssignValue::Exec(args) => {
                        for a in args {
                            self.atom(a, ctx, scope, span);
                        }
                    }
                    AssignValue::Invoke { object, args, .. } => {
                        self.target(object, ctx, scope, span);
                        for a in args {
                            self.atom(a, ctx, scope, span);
                        }
                    }
                    AssignValue::ReadAttr { object, .. } => self.target(object, ctx, scope, span),
                    AssignValue::Expr(e) => self.expr(e, ctx, scope, span),
                }
                scope.vars.insert(target.clone());
            }
        }
    }
}
