//! A second type checker: walks a program collecting equations, then
//! saturates them (congruence closure over possibly cyclic terms) and
//! reports whether they are satisfiable. Shares nothing with the crate's
//! unifier beyond the AST.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use mob_core::syntax::ast::{
    AssignValue, Atom, BinOp, Block, Expr, InstrKind, Literal, Program, Target, UnOp,
};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Head {
    Int,
    Bool,
    Str,
    Thread,
    Fun(usize),
    Rec(Vec<String>),
}

impl Head {
    fn is_prim(&self) -> bool {
        matches!(self, Head::Int | Head::Bool | Head::Str | Head::Thread)
    }
}

#[derive(Default)]
struct Constraints {
    heads: Vec<Option<Head>>,
    children: Vec<Vec<usize>>,
    eqs: Vec<(usize, usize)>,
    has_field: Vec<(usize, String, usize)>,
    not_prim: Vec<usize>,
}

impl Constraints {
    fn node(&mut self, head: Option<Head>, children: Vec<usize>) -> usize {
        self.heads.push(head);
        self.children.push(children);
        self.heads.len() - 1
    }

    fn var(&mut self) -> usize {
        self.node(None, Vec::new())
    }

    fn prim(&mut self, h: Head) -> usize {
        self.node(Some(h), Vec::new())
    }

    fn eq(&mut self, a: usize, b: usize) {
        self.eqs.push((a, b));
    }
}

struct ClassShape {
    attrs: Vec<usize>,
    iface: usize,
}

#[derive(Clone, Default)]
struct Scope {
    vars: HashMap<String, usize>,
    attrs: HashMap<String, usize>,
    ret: Option<usize>,
}

struct Walker<'p> {
    c: Constraints,
    classes: HashMap<&'p str, ClassShape>,
}

/// `true` when the program has a typing.
pub fn typable(program: &Program, int_globals: &[&str]) -> bool {
    let mut w = Walker {
        c: Constraints::default(),
        classes: HashMap::new(),
    };
    let mut sigs = HashMap::new();
    for class in program.classes() {
        let attrs: Vec<usize> = class.params.iter().map(|_| w.c.var()).collect();
        let mut names = Vec::new();
        let mut fields = Vec::new();
        let mut by_name: BTreeMap<&str, (Vec<usize>, usize)> = BTreeMap::new();
        for m in &class.methods {
            let ps: Vec<usize> = m.params.iter().map(|_| w.c.var()).collect();
            let ret = w.c.var();
            by_name.insert(&m.name, (ps, ret));
        }
        for (name, (ps, ret)) in &by_name {
            let mut kids = ps.clone();
            kids.push(*ret);
            let sig = w.c.node(Some(Head::Fun(ps.len())), kids);
            names.push(name.to_string());
            fields.push(sig);
        }
        let iface = w.c.node(Some(Head::Rec(names)), fields);
        w.classes.insert(&class.name, ClassShape { attrs, iface });
        sigs.insert(class.name.as_str(), by_name);
    }
    let mut globals = HashMap::new();
    for g in int_globals {
        let n = w.c.prim(Head::Int);
        globals.insert(g.to_string(), n);
    }
    for class in program.classes() {
        let shape = &w.classes[class.name.as_str()];
        let mut base = Scope {
            vars: globals.clone(),
            ..Scope::default()
        };
        for (x, &a) in class.params.iter().zip(&shape.attrs) {
            base.vars.insert(x.clone(), a);
            base.attrs.insert(x.clone(), a);
        }
        for m in &class.methods {
            let (ps, ret) = sigs[class.name.as_str()][m.name.as_str()].clone();
            let mut scope = base.clone();
            for (x, p) in m.params.iter().zip(ps) {
                scope.vars.insert(x.clone(), p);
            }
            scope.ret = Some(ret);
            w.block(&m.body, scope);
        }
    }
    w.block(
        &program.body,
        Scope {
            vars: globals,
            ..Scope::default()
        },
    );
    saturate(w.c)
}

impl Walker<'_> {
    fn block(&mut self, block: &Block, mut scope: Scope) {
        for instr in block.iter() {
            match &instr.kind {
                InstrKind::Return(v) => {
                    let t = self.atom(&scope, v);
                    let ret = scope.ret.expect("return inside a method");
                    self.c.eq(t, ret);
                }
                InstrKind::Go(v) => {
                    let t = self.atom(&scope, v);
                    let s = self.c.prim(Head::Str);
                    self.c.eq(t, s);
                }
                InstrKind::Join(x) => {
                    let t = scope.vars[x];
                    let th = self.c.prim(Head::Thread);
                    self.c.eq(t, th);
                }
                InstrKind::If {
                    cond,
                    then_block,
                    else_block,
                } => {
                    self.condition(&scope, cond);
                    self.block(then_block, scope.clone());
                    self.block(else_block, scope.clone());
                }
                InstrKind::While { cond, body } => {
                    self.condition(&scope, cond);
                    self.block(body, scope.clone());
                }
                InstrKind::Assign { target, value } => {
                    let t = self.value(&scope, value);
                    scope.vars.insert(target.clone(), t);
                }
                InstrKind::AttrAssign {
                    object: Target::SelfRef,
                    attr,
                    value,
                } => {
                    let t = self.atom(&scope, value);
                    let a = scope.attrs[attr];
                    self.c.eq(a, t);
                }
                InstrKind::Break | InstrKind::Exit => {}
                other => panic!("the oracle does not model {other:?}"),
            }
        }
    }

    fn condition(&mut self, scope: &Scope, cond: &Atom) {
        let t = self.atom(scope, cond);
        let b = self.c.prim(Head::Bool);
        self.c.eq(t, b);
    }

    fn atom(&mut self, scope: &Scope, a: &Atom) -> usize {
        match a {
            Atom::Lit(Literal::Int(_)) => self.c.prim(Head::Int),
            Atom::Lit(Literal::Bool(_)) => self.c.prim(Head::Bool),
            Atom::Lit(Literal::Str(_)) => self.c.prim(Head::Str),
            Atom::Null => {
                let v = self.c.var();
                self.c.not_prim.push(v);
                v
            }
            Atom::Target(Target::Var(x)) => scope.vars[x],
            Atom::Target(Target::SelfRef) => panic!("the oracle does not model self"),
        }
    }

    fn expr(&mut self, scope: &Scope, e: &Expr) -> usize {
        match e {
            Expr::Atom(a) => self.atom(scope, a),
            Expr::Unary(op, inner) => {
                let t = self.expr(scope, inner);
                let want = self.c.prim(match op {
                    UnOp::Not => Head::Bool,
                    UnOp::Neg => Head::Int,
                });
                self.c.eq(t, want);
                want
            }
            Expr::Binary(op, l, r) => {
                let lt = self.expr(scope, l);
                let rt = self.expr(scope, r);
                let (operand, result) = match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                        (Some(Head::Int), Head::Int)
                    }
                    BinOp::Concat => (Some(Head::Str), Head::Str),
                    BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => (Some(Head::Int), Head::Bool),
                    BinOp::And | BinOp::Or => (Some(Head::Bool), Head::Bool),
                    BinOp::Eq | BinOp::Ne => (None, Head::Bool),
                };
                match operand {
                    Some(h) => {
                        let a = self.c.prim(h.clone());
                        let b = self.c.prim(h);
                        self.c.eq(lt, a);
                        self.c.eq(rt, b);
                    }
                    None => self.c.eq(lt, rt),
                }
                self.c.prim(result)
            }
        }
    }

    fn value(&mut self, scope: &Scope, v: &AssignValue) -> usize {
        match v {
            AssignValue::Expr(e) => self.expr(scope, e),
            AssignValue::Host => self.c.prim(Head::Str),
            AssignValue::Fork(body) => {
                self.block(body, scope.clone());
                self.c.prim(Head::Thread)
            }
            AssignValue::New { class, args } => {
                let shape = &self.classes[class.as_str()];
                let (attrs, iface) = (shape.attrs.clone(), shape.iface);
                assert_eq!(attrs.len(), args.len(), "generator respects arity");
                for (a, arg) in attrs.into_iter().zip(args) {
                    let t = self.atom(scope, arg);
                    self.c.eq(a, t);
                }
                iface
            }
            AssignValue::Invoke {
                object: Target::Var(o),
                method,
                args,
            } => {
                let ot = scope.vars[o];
                let mut kids: Vec<usize> = args.iter().map(|a| self.atom(scope, a)).collect();
                let ret = self.c.var();
                kids.push(ret);
                let sig = self.c.node(Some(Head::Fun(args.len())), kids);
                self.c.has_field.push((ot, method.clone(), sig));
                ret
            }
            AssignValue::Exec(args) => {
                let action = match &args[0] {
                    Atom::Lit(Literal::Str(s)) => s.as_str(),
                    other => panic!("exec action {other:?}"),
                };
                let id = self.atom(scope, &args[1]);
                let payload = self.atom(scope, &args[2]);
                let i = self.c.prim(Head::Int);
                let s = self.c.prim(Head::Str);
                self.c.eq(id, i);
                self.c.eq(payload, s);
                self.c.prim(match action {
                    "init" => Head::Int,
                    "read" | "readLine" => Head::Str,
                    _ => Head::Bool,
                })
            }
            other => panic!("the oracle does not model {other:?}"),
        }
    }
}

struct Classes {
    parent: Vec<usize>,
}

impl Classes {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        self.parent[a] = b;
        true
    }
}

/// Merges equal nodes until nothing changes; fails on a head clash, a
/// missing method, or `null` meeting a primitive type.
fn saturate(c: Constraints) -> bool {
    let n = c.heads.len();
    let mut uf = Classes {
        parent: (0..n).collect(),
    };
    for &(a, b) in &c.eqs {
        uf.union(a, b);
    }
    loop {
        let mut changed = false;
        let mut rep: HashMap<usize, usize> = HashMap::new();
        for node in 0..n {
            let Some(head) = &c.heads[node] else { continue };
            let root = uf.find(node);
            match rep.get(&root) {
                None => {
                    rep.insert(root, node);
                }
                Some(&other) => {
                    if c.heads[other].as_ref() != Some(head) {
                        return false;
                    }
                    for (&x, &y) in c.children[node].iter().zip(&c.children[other]) {
                        changed |= uf.union(x, y);
                    }
                }
            }
        }
        let mut open: HashMap<(usize, &str), usize> = HashMap::new();
        for (t, name, sig) in &c.has_field {
            let root = uf.find(*t);
            match rep.get(&root).map(|&r| (&c.heads[r], r)) {
                Some((Some(Head::Rec(names)), r)) => match names.iter().position(|m| m == name) {
                    Some(i) => changed |= uf.union(c.children[r][i], *sig),
                    None => return false,
                },
                Some(_) => return false,
                None => match open.get(&(root, name.as_str())) {
                    Some(&other) => changed |= uf.union(other, *sig),
                    None => {
                        open.insert((root, name.as_str()), *sig);
                    }
                },
            }
        }
        let prim_roots: BTreeSet<usize> = rep
            .iter()
            .filter(|(_, &r)| c.heads[r].as_ref().is_some_and(Head::is_prim))
            .map(|(&root, _)| root)
            .collect();
        for &v in &c.not_prim {
            if prim_roots.contains(&uf.find(v)) {
                return false;
            }
        }
        if !changed {
            return true;
        }
    }
}
