use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prim {
    Int,
    Str,
    Bool,
    Thread,
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prim::Int => "int",
            Prim::Str => "string",
            Prim::Bool => "bool",
            Prim::Thread => "thread",
        })
    }
}

/// A type variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TyVar(pub u32);

impl fmt::Display for TyVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Finite representation of a rational-tree type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeTerm {
    Prim(Prim),
    /// Method record. `rest` is a row variable standing for methods not yet
    /// known; `None` means the record is exactly `fields`.
    Record {
        fields: BTreeMap<String, TypeTerm>,
        rest: Option<TyVar>,
    },
    /// A method signature `(params) -> ret`; only appears as a record field.
    Signature {
        params: Vec<TypeTerm>,
        ret: Box<TypeTerm>,
    },
    /// Type of a class or agent name: attribute types and instance interface.
    Class {
        attrs: Vec<TypeTerm>,
        iface: Box<TypeTerm>,
    },
    Var(TyVar),
    Mu(TyVar, Box<TypeTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("recursive binder {0} may not bind a bare variable")]
pub struct DegenerateMu(pub TyVar);

impl TypeTerm {
    pub fn int() -> Self {
        TypeTerm::Prim(Prim::Int)
    }
    pub fn string() -> Self {
        TypeTerm::Prim(Prim::Str)
    }
    pub fn bool() -> Self {
        TypeTerm::Prim(Prim::Bool)
    }
    pub fn var(n: u32) -> Self {
        TypeTerm::Var(TyVar(n))
    }

    /// Builds `mu t.body`, rejecting `mu t.t`.
    pub fn mu(t: TyVar, body: TypeTerm) -> Result<Self, DegenerateMu> {
        if body == TypeTerm::Var(t) {
            return Err(DegenerateMu(t));
        }
        Ok(TypeTerm::Mu(t, Box::new(body)))
    }

    pub fn closed_record<I, K>(fields: I) -> Self
    where
        I: IntoIterator<Item = (K, TypeTerm)>,
        K: Into<String>,
    {
        TypeTerm::Record {
            fields: fields.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            rest: None,
        }
    }

    pub fn signature(params: Vec<TypeTerm>, ret: TypeTerm) -> Self {
        TypeTerm::Signature {
            params,
            ret: Box::new(ret),
        }
    }

    /// Renames every variable, bound or free, to t0, t1, ... in order of
    /// first appearance. Two terms equal up to renaming have equal
    /// canonical forms.
    pub fn canonical(&self) -> TypeTerm {
        fn go(t: &TypeTerm, names: &mut HashMap<TyVar, TyVar>) -> TypeTerm {
            let name = |v: TyVar, names: &mut HashMap<TyVar, TyVar>| {
                let next = TyVar(names.len() as u32);
                *names.entry(v).or_insert(next)
            };
            match t {
                TypeTerm::Prim(p) => TypeTerm::Prim(*p),
                TypeTerm::Var(v) => TypeTerm::Var(name(*v, names)),
                TypeTerm::Mu(v, body) => {
                    let v2 = name(*v, names);
                    TypeTerm::Mu(v2, Box::new(go(body, names)))
                }
                TypeTerm::Record { fields, rest } => {
                    let fields = fields
                        .iter()
                        .map(|(k, v)| (k.clone(), go(v, names)))
                        .collect();
                    let rest = rest.map(|r| name(r, names));
                    TypeTerm::Record { fields, rest }
                }
                TypeTerm::Signature { params, ret } => TypeTerm::Signature {
                    params: params.iter().map(|p| go(p, names)).collect(),
                    ret: Box::new(go(ret, names)),
                },
                TypeTerm::Class { attrs, iface } => TypeTerm::Class {
                    attrs: attrs.iter().map(|p| go(p, names)).collect(),
                    iface: Box::new(go(iface, names)),
                },
            }
        }
        go(self, &mut HashMap::new())
    }

    /// Free variables, including row variables.
    pub fn free_vars(&self) -> HashSet<TyVar> {
        fn go(t: &TypeTerm, bound: &mut Vec<TyVar>, out: &mut HashSet<TyVar>) {
            match t {
                TypeTerm::Prim(_) => {}
                TypeTerm::Var(v) => {
                    if !bound.contains(v) {
                        out.insert(*v);
                    }
                }
                TypeTerm::Mu(v, body) => {
                    bound.push(*v);
                    go(body, bound, out);
                    bound.pop();
                }
                TypeTerm::Record { fields, rest } => {
                    for f in fields.values() {
                        go(f, bound, out);
                    }
                    if let Some(r) = rest {
                        out.insert(*r);
                    }
                }
                TypeTerm::Signature { params, ret } => {
                    params.iter().for_each(|p| go(p, bound, out));
                    go(ret, bound, out);
                }
                TypeTerm::Class { attrs, iface } => {
                    attrs.iter().for_each(|p| go(p, bound, out));
                    go(iface, bound, out);
                }
            }
        }
        let mut out = HashSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for TypeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTerm::Prim(p) => write!(f, "{p}"),
            TypeTerm::Var(v) => write!(f, "{v}"),
            TypeTerm::Mu(v, body) => write!(f, "mu {v}.{body}"),
            TypeTerm::Record { fields, rest } => {
                f.write_str("{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                if let Some(r) = rest {
                    if !fields.is_empty() {
                        f.write_str(" ")?;
                    }
                    write!(f, "| {r}")?;
                }
                f.write_str("}")
            }
            TypeTerm::Signature { params, ret } => {
                f.write_str("(")?;
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ") -> {ret}")
            }
            TypeTerm::Class { attrs, iface } => {
                f.write_str("class(")?;
                for (i, p) in attrs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ") {iface}")
            }
        }
    }
}

/// Equality of infinite unfoldings, decided by bisimulation over the finite
/// graphs of the two terms. Free variables are equal only to themselves.
pub fn type_equiv(a: &TypeTerm, b: &TypeTerm) -> bool {
    let mut g = Graph::default();
    let Some(x) = g.build(a, &HashMap::new()) else {
        return false;
    };
    let Some(y) = g.build(b, &HashMap::new()) else {
        return false;
    };
    let mut assumed = HashSet::new();
    g.bisimilar(x, y, &mut assumed)
}

#[derive(Debug, Clone)]
enum GNode {
    Placeholder,
    Prim(Prim),
    Var(TyVar),
    Record {
        fields: BTreeMap<String, usize>,
        rest: Option<TyVar>,
    },
    Signature {
        params: Vec<usize>,
        ret: usize,
    },
    Class {
        attrs: Vec<usize>,
        iface: usize,
    },
}

#[derive(Default)]
struct Graph {
    nodes: Vec<GNode>,
}

impl Graph {
    fn push(&mut self, n: GNode) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    /// Returns `None` for a degenerate `mu t.t`.
    fn build(&mut self, t: &TypeTerm, env: &HashMap<TyVar, usize>) -> Option<usize> {
        Some(match t {
            TypeTerm::Prim(p) => self.push(GNode::Prim(*p)),
            TypeTerm::Var(v) => match env.get(v) {
                Some(&n) => n,
                None => self.push(GNode::Var(*v)),
            },
            TypeTerm::Mu(v, body) => {
                let slot = self.push(GNode::Placeholder);
                let mut env2 = env.clone();
                env2.insert(*v, slot);
                let b = self.build(body, &env2)?;
                let node = self.nodes[b].clone();
                if matches!(node, GNode::Placeholder) {
                    return None;
                }
                self.nodes[slot] = node;
                slot
            }
            TypeTerm::Record { fields, rest } => {
                let mut fs = BTreeMap::new();
                for (k, v) in fields {
                    fs.insert(k.clone(), self.build(v, env)?);
                }
                self.push(GNode::Record {
                    fields: fs,
                    rest: *rest,
                })
            }
            TypeTerm::Signature { params, ret } => {
                let params = params
                    .iter()
                    .map(|p| self.build(p, env))
                    .collect::<Option<Vec<_>>>()?;
                let ret = self.build(ret, env)?;
                self.push(GNode::Signature { params, ret })
            }
            TypeTerm::Class { attrs, iface } => {
                let attrs = attrs
                    .iter()
                    .map(|p| self.build(p, env))
                    .collect::<Option<Vec<_>>>()?;
                let iface = self.build(iface, env)?;
                self.push(GNode::Class { attrs, iface })
            }
        })
    }

    fn bisimilar(&self, x: usize, y: usize, assumed: &mut HashSet<(usize, usize)>) -> bool {
        if x == y || !assumed.insert((x, y)) {
            return true;
        }
        match (&self.nodes[x], &self.nodes[y]) {
            (GNode::Prim(p), GNode::Prim(q)) => p == q,
            (GNode::Var(v), GNode::Var(w)) => v == w,
            (
                GNode::Record {
                    fields: f1,
                    rest: r1,
                },
                GNode::Record {
                    fields: f2,
                    rest: r2,
                },
            ) => {
                r1 == r2
                    && f1.len() == f2.len()
                    && f1.iter().all(|(k, a)| match f2.get(k) {
                        Some(b) => self.bisimilar(*a, *b, assumed),
                        None => false,
                    })
            }
            (
                GNode::Signature {
                    params: p1,
                    ret: r1,
                },
                GNode::Signature {
                    params: p2,
                    ret: r2,
                },
            ) => {
                p1.len() == p2.len()
                    && p1
                        .iter()
                        .zip(p2)
                        .all(|(a, b)| self.bisimilar(*a, *b, assumed))
                    && self.bisimilar(*r1, *r2, assumed)
            }
            (
                GNode::Class {
                    attrs: a1,
                    iface: i1,
                },
                GNode::Class {
                    attrs: a2,
                    iface: i2,
                },
            ) => {
                a1.len() == a2.len()
                    && a1
                        .iter()
                        .zip(a2)
                        .all(|(a, b)| self.bisimilar(*a, *b, assumed))
                    && self.bisimilar(*i1, *i2, assumed)
            }
            _ => false,
        }
    }
}
