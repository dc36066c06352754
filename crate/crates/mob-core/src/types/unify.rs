//! Unification over rational trees.
//!
//! Types live in a union-find arena whose nodes may form cycles, so no
//! occurs check is needed: a variable unified with a term containing it
//! simply closes a loop, which `export` turns back into a `mu` binder.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::term::{Prim, TyVar, TypeTerm};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot unify {left} with {right}")]
pub struct TypeMismatch {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone)]
enum Node {
    /// `not_prim` marks variables introduced by `null`, which never unify
    /// with a primitive type.
    Var { name: TyVar, not_prim: bool },
    Prim(Prim),
    Record {
        fields: BTreeMap<String, NodeId>,
        rest: Option<NodeId>,
    },
    Signature { params: Vec<NodeId>, ret: NodeId },
    Class { attrs: Vec<NodeId>, iface: NodeId },
}

/// A most-general solution under construction.
#[derive(Debug, Clone, Default)]
pub struct Substitution {
    nodes: Vec<Node>,
    parent: Vec<NodeId>,
    vars: HashMap<TyVar, NodeId>,
    next_var: u32,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.parent.push(self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn fresh_name(&mut self) -> TyVar {
        loop {
            let v = TyVar(self.next_var);
            self.next_var += 1;
            if !self.vars.contains_key(&v) {
                return v;
            }
        }
    }

    pub fn fresh(&mut self) -> NodeId {
        let name = self.fresh_name();
        let id = self.push(Node::Var {
            name,
            not_prim: false,
        });
        self.vars.insert(name, id);
        id
    }

    /// Fresh variable for a `null` constant.
    pub fn fresh_not_prim(&mut self) -> NodeId {
        let id = self.fresh();
        if let Node::Var { not_prim, .. } = &mut self.nodes[id] {
            *not_prim = true;
        }
        id
    }

    pub fn prim(&mut self, p: Prim) -> NodeId {
        self.push(Node::Prim(p))
    }

    pub fn signature(&mut self, params: Vec<NodeId>, ret: NodeId) -> NodeId {
        self.push(Node::Signature { params, ret })
    }

    pub fn class(&mut self, attrs: Vec<NodeId>, iface: NodeId) -> NodeId {
        self.push(Node::Class { attrs, iface })
    }

    pub fn record(&mut self, fields: BTreeMap<String, NodeId>, open: bool) -> NodeId {
        let rest = if open { Some(self.fresh()) } else { None };
        self.push(Node::Record { fields, rest })
    }

    pub fn find(&self, mut n: NodeId) -> NodeId {
        while self.parent[n] != n {
            n = self.parent[n];
        }
        n
    }

    fn link(&mut self, from: NodeId, to: NodeId) {
        self.parent[from] = to;
    }

    /// Brings a term into the arena. Variables with the same name map to the
    /// same node across calls.
    pub fn import(&mut self, t: &TypeTerm) -> NodeId {
        self.import_in(t, &HashMap::new())
    }

    /// Imports a term with all of its free variables renamed apart from
    /// everything already in the arena.
    pub fn import_fresh(&mut self, t: &TypeTerm) -> NodeId {
        let mut bound = HashMap::new();
        let mut free: Vec<TyVar> = t.free_vars().into_iter().collect();
        free.sort();
        for v in free {
            let n = self.fresh();
            bound.insert(v, n);
        }
        self.import_in(t, &bound)
    }

    fn var_node(&mut self, v: TyVar) -> NodeId {
        if let Some(&n) = self.vars.get(&v) {
            return n;
        }
        let id = self.push(Node::Var {
            name: v,
            not_prim: false,
        });
        self.vars.insert(v, id);
        self.next_var = self.next_var.max(v.0 + 1);
        id
    }

    fn import_in(&mut self, t: &TypeTerm, bound: &HashMap<TyVar, NodeId>) -> NodeId {
        match t {
            TypeTerm::Prim(p) => self.prim(*p),
            TypeTerm::Var(v) => match bound.get(v) {
                Some(&n) => n,
                None => self.var_node(*v),
            },
            TypeTerm::Mu(v, body) => {
                let name = self.fresh_name();
                let slot = self.push(Node::Var {
                    name,
                    not_prim: false,
                });
                let mut inner = bound.clone();
                inner.insert(*v, slot);
                let b = self.import_in(body, &inner);
                let b = self.find(b);
                if b != slot {
                    self.link(slot, b);
                }
                b
            }
            TypeTerm::Record { fields, rest } => {
                let fields = fields
                    .iter()
                    .map(|(k, v)| (k.clone(), self.import_in(v, bound)))
                    .collect();
                let rest = rest.map(|r| match bound.get(&r) {
                    Some(&n) => n,
                    None => self.var_node(r),
                });
                self.push(Node::Record { fields, rest })
            }
            TypeTerm::Signature { params, ret } => {
                let params = params.iter().map(|p| self.import_in(p, bound)).collect();
                let ret = self.import_in(ret, bound);
                self.signature(params, ret)
            }
            TypeTerm::Class { attrs, iface } => {
                let attrs = attrs.iter().map(|p| self.import_in(p, bound)).collect();
                let iface = self.import_in(iface, bound);
                self.class(attrs, iface)
            }
        }
    }

    /// All fields of a record node, following bound row variables, plus the
    /// final unbound row variable if the record is open.
    fn flatten(&self, n: NodeId) -> (BTreeMap<String, NodeId>, Option<NodeId>) {
        let mut fields = BTreeMap::new();
        let mut cur = Some(self.find(n));
        while let Some(c) = cur {
            match &self.nodes[c] {
                Node::Record { fields: fs, rest } => {
                    for (k, v) in fs {
                        fields.entry(k.clone()).or_insert(*v);
                    }
                    cur = rest.map(|r| self.find(r));
                }
                Node::Var { .. } => return (fields, Some(c)),
                _ => unreachable!("row variable bound to a non-record"),
            }
        }
        (fields, None)
    }

    fn mismatch(&self, a: NodeId, b: NodeId) -> TypeMismatch {
        TypeMismatch {
            left: self.export(a).canonical().to_string(),
            right: self.export(b).canonical().to_string(),
        }
    }

    pub fn unify_nodes(&mut self, a: NodeId, b: NodeId) -> Result<(), TypeMismatch> {
        let a = self.find(a);
        let b = self.find(b);
        if a == b {
            return Ok(());
        }
        match (self.nodes[a].clone(), self.nodes[b].clone()) {
            (Node::Var { not_prim: n1, .. }, Node::Var { not_prim: n2, .. }) => {
                self.link(a, b);
                if let Node::Var { not_prim, .. } = &mut self.nodes[b] {
                    *not_prim = n1 || n2;
                }
                Ok(())
            }
            (Node::Var { not_prim, .. }, other) => {
                if not_prim && matches!(other, Node::Prim(_)) {
                    return Err(self.mismatch(a, b));
                }
                self.link(a, b);
                Ok(())
            }
            (other, Node::Var { not_prim, .. }) => {
                if not_prim && matches!(other, Node::Prim(_)) {
                    return Err(self.mismatch(a, b));
                }
                self.link(b, a);
                Ok(())
            }
            (Node::Prim(p), Node::Prim(q)) => {
                if p == q {
                    Ok(())
                } else {
                    Err(self.mismatch(a, b))
                }
            }
            (
                Node::Signature {
                    params: p1,
                    ret: r1,
                },
                Node::Signature {
                    params: p2,
                    ret: r2,
                },
            ) => {
                if p1.len() != p2.len() {
                    return Err(self.mismatch(a, b));
                }
                self.link(a, b);
                for (x, y) in p1.into_iter().zip(p2) {
                    self.unify_nodes(x, y)?;
                }
                self.unify_nodes(r1, r2)
            }
            (
                Node::Class {
                    attrs: a1,
                    iface: i1,
                },
                Node::Class {
                    attrs: a2,
                    iface: i2,
                },
            ) => {
                if a1.len() != a2.len() {
                    return Err(self.mismatch(a, b));
                }
                self.link(a, b);
                for (x, y) in a1.into_iter().zip(a2) {
                    self.unify_nodes(x, y)?;
                }
                self.unify_nodes(i1, i2)
            }
            (Node::Record { .. }, Node::Record { .. }) => self.unify_records(a, b),
            _ => Err(self.mismatch(a, b)),
        }
    }

    fn unify_records(&mut self, a: NodeId, b: NodeId) -> Result<(), TypeMismatch> {
        let (fa, ra) = self.flatten(a);
        let (fb, rb) = self.flatten(b);
        let only_a: BTreeMap<String, NodeId> = fa
            .iter()
            .filter(|(k, _)| !fb.contains_key(*k))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let only_b: BTreeMap<String, NodeId> = fb
            .iter()
            .filter(|(k, _)| !fa.contains_key(*k))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        match (ra, rb) {
            (None, None) => {
                if !only_a.is_empty() || !only_b.is_empty() {
                    return Err(self.mismatch(a, b));
                }
            }
            (Some(ta), None) => {
                if !only_a.is_empty() {
                    return Err(self.mismatch(a, b));
                }
                let ext = self.push(Node::Record {
                    fields: only_b,
                    rest: None,
                });
                self.link(ta, ext);
            }
            (None, Some(tb)) => {
                if !only_b.is_empty() {
                    return Err(self.mismatch(a, b));
                }
                let ext = self.push(Node::Record {
                    fields: only_a,
                    rest: None,
                });
                self.link(tb, ext);
            }
            (Some(ta), Some(tb)) if ta == tb => {
                if !only_a.is_empty() || !only_b.is_empty() {
                    return Err(self.mismatch(a, b));
                }
            }
            (Some(ta), Some(tb)) => {
                let shared = self.fresh();
                let ext_a = self.push(Node::Record {
                    fields: only_b,
                    rest: Some(shared),
                });
                let ext_b = self.push(Node::Record {
                    fields: only_a,
                    rest: Some(shared),
                });
                self.link(ta, ext_a);
                self.link(tb, ext_b);
            }
        }
        self.link(a, b);
        for (k, x) in fa {
            if let Some(&y) = fb.get(&k) {
                self.unify_nodes(x, y)?;
            }
        }
        Ok(())
    }

    /// Reads a node back as a finite term, introducing `mu` binders where the
    /// graph loops.
    pub fn export(&self, n: NodeId) -> TypeTerm {
        let mut stack: Vec<(NodeId, bool)> = Vec::new();
        self.export_in(n, &mut stack)
    }

    fn binder_name(&self, n: NodeId) -> TyVar {
        TyVar(u32::MAX / 2 + n as u32)
    }

    fn export_in(&self, n: NodeId, stack: &mut Vec<(NodeId, bool)>) -> TypeTerm {
        let n = self.find(n);
        if let Node::Var { name, .. } = &self.nodes[n] {
            return TypeTerm::Var(*name);
        }
        if let Node::Prim(p) = &self.nodes[n] {
            return TypeTerm::Prim(*p);
        }
        if let Some(entry) = stack.iter_mut().find(|(m, _)| *m == n) {
            entry.1 = true;
            return TypeTerm::Var(self.binder_name(n));
        }
        stack.push((n, false));
        let term = match &self.nodes[n] {
            Node::Record { .. } => {
                let (fields, rest) = self.flatten(n);
                let fields = fields
                    .into_iter()
                    .map(|(k, v)| (k, self.export_in(v, stack)))
                    .collect();
                let rest = rest.map(|r| match &self.nodes[r] {
                    Node::Var { name, .. } => *name,
                    _ => unreachable!(),
                });
                TypeTerm::Record { fields, rest }
            }
            Node::Signature { params, ret } => TypeTerm::Signature {
                params: params.iter().map(|p| self.export_in(*p, stack)).collect(),
                ret: Box::new(self.export_in(*ret, stack)),
            },
            Node::Class { attrs, iface } => TypeTerm::Class {
                attrs: attrs.iter().map(|p| self.export_in(*p, stack)).collect(),
                iface: Box::new(self.export_in(*iface, stack)),
            },
            Node::Var { .. } | Node::Prim(_) => unreachable!(),
        };
        let (_, recursive) = stack.pop().expect("export stack");
        if recursive {
            TypeTerm::Mu(self.binder_name(n), Box::new(term))
        } else {
            term
        }
    }

    /// Applies the substitution to a term.
    pub fn apply(&mut self, t: &TypeTerm) -> TypeTerm {
        let n = self.import(t);
        self.export(n)
    }

    /// True when `n` currently resolves to a record.
    pub fn is_record(&self, n: NodeId) -> bool {
        matches!(self.nodes[self.find(n)], Node::Record { .. })
    }

    /// Field names and types of a record node.
    pub fn record_fields(&self, n: NodeId) -> Option<BTreeMap<String, NodeId>> {
        if self.is_record(n) {
            Some(self.flatten(n).0)
        } else {
            None
        }
    }
}

/// Unifies two terms, extending `subst`.
pub fn unify(a: &TypeTerm, b: &TypeTerm, subst: &mut Substitution) -> Result<(), TypeMismatch> {
    let x = subst.import(a);
    let y = subst.import(b);
    subst.unify_nodes(x, y)
}
