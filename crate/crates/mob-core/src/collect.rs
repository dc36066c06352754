//! Compile-time code repositories.
//!
//! Repositories are flat: an entry's `nested` set names every class it can
//! instantiate, directly or through other classes, and all of those names
//! are keys of the repository the entry was collected into.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::syntax::ast::{walk_instrs, AssignValue, Block, Definition, InstrKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollectError {
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("{class} has no method {method}")]
    UnknownMethod { class: String, method: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodCode {
    pub params: Vec<String>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeEntry {
    pub name: String,
    pub is_agent: bool,
    pub params: Vec<String>,
    pub methods: BTreeMap<String, MethodCode>,
    pub nested: BTreeSet<String>,
    /// Empty for classes.
    pub provides: Vec<String>,
}

pub type CodeRepo = BTreeMap<String, Arc<CodeEntry>>;

/// Builds the repository for a definition list. Service and requires
/// definitions contribute nothing.
pub fn code_collect(definitions: &[Definition]) -> Result<CodeRepo, CollectError> {
    let mut repo = CodeRepo::new();
    for def in definitions {
        let Definition::Class(c) = def else { continue };
        let methods = c
            .methods
            .iter()
            .map(|m| {
                (
                    m.name.clone(),
                    MethodCode {
                        params: m.params.clone(),
                        body: m.body.clone(),
                    },
                )
            })
            .collect();
        repo.insert(
            c.name.clone(),
            Arc::new(CodeEntry {
                name: c.name.clone(),
                is_agent: c.is_agent,
                params: c.params.clone(),
                methods,
                nested: BTreeSet::new(),
                provides: if c.is_agent { c.provides.clone() } else { Vec::new() },
            }),
        );
    }
    let mut nested = BTreeMap::new();
    for (name, entry) in &repo {
        let closure = code_in(&repo, entry.methods.values())?;
        nested.insert(name.clone(), closure.into_keys().collect());
    }
    for (name, set) in nested {
        Arc::make_mut(repo.get_mut(&name).expect("collected above")).nested = set;
    }
    Ok(repo)
}

/// Entries of `repo` for every class instantiated in `methods`, including
/// inside if, while and fork blocks, closed under instantiation.
pub fn code_in<'a>(
    repo: &CodeRepo,
    methods: impl IntoIterator<Item = &'a MethodCode>,
) -> Result<CodeRepo, CollectError> {
    let mut pending: Vec<String> = Vec::new();
    for m in methods {
        pending.extend(instantiated(&m.body));
    }
    let mut out = CodeRepo::new();
    while let Some(x) = pending.pop() {
        if out.contains_key(&x) {
            continue;
        }
        let entry = repo
            .get(&x)
            .ok_or_else(|| CollectError::UnknownClass(x.clone()))?;
        for m in entry.methods.values() {
            pending.extend(instantiated(&m.body));
        }
        out.insert(x, entry.clone());
    }
    Ok(out)
}

/// Class names appearing in `x = new X(...)` anywhere in `body`.
pub fn instantiated(body: &[crate::syntax::ast::Instr]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk_instrs(body, &mut |i| {
        if let InstrKind::Assign {
            value: AssignValue::New { class, .. },
            ..
        } = &i.kind
        {
            out.insert(class.clone());
        }
    });
    out
}

pub fn code_lookup<'a>(entry: &'a CodeEntry, method: &str) -> Result<&'a MethodCode, CollectError> {
    entry
        .methods
        .get(method)
        .ok_or_else(|| CollectError::UnknownMethod {
            class: entry.name.clone(),
            method: method.to_string(),
        })
}

/// `repo` restricted to `name` and its nested classes.
pub fn closure_of(repo: &CodeRepo, name: &str) -> Result<CodeRepo, CollectError> {
    let entry = repo
        .get(name)
        .ok_or_else(|| CollectError::UnknownClass(name.to_string()))?;
    let mut out = CodeRepo::new();
    out.insert(name.to_string(), entry.clone());
    for n in &entry.nested {
        let e = repo
            .get(n)
            .ok_or_else(|| CollectError::UnknownClass(n.clone()))?;
        out.insert(n.clone(), e.clone());
    }
    Ok(out)
}

/// One `Name: nested...` line per entry.
pub fn dump(repo: &CodeRepo) -> String {
    let mut out = String::new();
    for (name, e) in repo {
        let kind = if e.is_agent { "agent" } else { "class" };
        let nested: Vec<&str> = e.nested.iter().map(String::as_str).collect();
        out.push_str(&format!("{kind} {name} nested {{{}}}\n", nested.join(", ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_source;

    fn collect(src: &str) -> CodeRepo {
        code_collect(&parse_source(src).unwrap().definitions).unwrap()
    }

    #[test]
    fn empty() {
        assert!(code_collect(&[]).unwrap().is_empty());
    }

    #[test]
    fn time_server_entry() {
        let repo = collect(
            "service Time { getTime }
             agent TimeServer() provides Time {
               main() { }
               getTime() { x = \"t\"; return (x); }
             }
             exit;",
        );
        let e = &repo["TimeServer"];
        assert!(e.is_agent);
        assert!(e.params.is_empty());
        assert!(e.nested.is_empty());
        assert_eq!(e.provides, vec!["Time".to_string()]);
        let main = code_lookup(e, "main").unwrap();
        assert!(main.params.is_empty() && main.body.is_empty());
        assert_eq!(code_lookup(e, "getTime").unwrap().body.len(), 2);
        assert!(matches!(
            code_lookup(e, "nope"),
            Err(CollectError::UnknownMethod { .. })
        ));
    }

    #[test]
    fn nested_descent_and_transitivity() {
        let repo = collect(
            "class Leaf() { m() { return (null); } }
             class Mid() { m() { c = true; while (c) { l = new Leaf(); break; } return (null); } }
             class Top() { m() { t = fork { x = new Mid(); }; return (null); } }
             class Plain(a) { m() { return (a); } }
             exit;",
        );
        let top = &repo["Top"];
        assert_eq!(
            top.nested,
            BTreeSet::from(["Mid".to_string(), "Leaf".to_string()])
        );
        assert!(repo["Plain"].nested.is_empty());
        assert!(!repo["Plain"].is_agent && repo["Plain"].provides.is_empty());
        assert_eq!(closure_of(&repo, "Top").unwrap().len(), 3);
    }

    #[test]
    fn unknown_class() {
        let repo = CodeRepo::new();
        let m = MethodCode {
            params: vec![],
            body: parse_source("x = new Ghost(); exit;").unwrap().body,
        };
        assert_eq!(
            code_in(&repo, [&m]),
            Err(CollectError::UnknownClass("Ghost".into()))
        );
    }

    #[test]
    fn collecting_twice_is_stable() {
        let src = "class A() { m() { b = new B(); return (b); } } class B() { m() { return (null); } } exit;";
        assert_eq!(collect(src), collect(src));
    }
}
