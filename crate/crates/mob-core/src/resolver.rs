//! Network name resolver: agent locations (ANS) and the service registry (SNS).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use thiserror::Error;

use crate::names::{AgentKey, Host, QualifiedRef};
use crate::types::term::{type_equiv, TypeTerm};
use crate::types::unify::Substitution;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolverError {
    #[error("service {0} has no registered interface")]
    UnknownService(String),
    #[error("{0} is already registered")]
    DuplicateRef(QualifiedRef),
    #[error("{0} is not a registered agent")]
    UnregisteredAgent(QualifiedRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("service {service} is registered as {registered} but the program needs {inferred}")]
pub struct ServiceTypeMismatch {
    pub service: String,
    pub registered: TypeTerm,
    pub inferred: TypeTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceEntry {
    pub ty: TypeTerm,
    pub impls: BTreeSet<QualifiedRef>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Resolver {
    ans: BTreeMap<QualifiedRef, Host>,
    sns: BTreeMap<String, ServiceEntry>,
}

impl Resolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ans(&self) -> &BTreeMap<QualifiedRef, Host> {
        &self.ans
    }

    pub fn sns(&self) -> &BTreeMap<String, ServiceEntry> {
        &self.sns
    }

    pub fn location(&self, r: &QualifiedRef) -> Option<&Host> {
        self.ans.get(r)
    }

    pub fn register_agent(
        &mut self,
        r: QualifiedRef,
        host: Host,
        services: &[String],
    ) -> Result<(), ResolverError> {
        if self.ans.contains_key(&r) {
            return Err(ResolverError::DuplicateRef(r));
        }
        if let Some(s) = services.iter().find(|s| !self.sns.contains_key(*s)) {
            return Err(ResolverError::UnknownService(s.clone()));
        }
        self.ans.insert(r, host);
        for s in services {
            self.sns.get_mut(s).expect("checked above").impls.insert(r);
        }
        Ok(())
    }

    pub fn update_location(&mut self, r: QualifiedRef, host: Host) -> Result<(), ResolverError> {
        match self.ans.get_mut(&r) {
            Some(h) => {
                *h = host;
                Ok(())
            }
            None => Err(ResolverError::UnregisteredAgent(r)),
        }
    }

    /// Smallest implementation of `service` not owned by `excluding`.
    pub fn lookup_any(&self, service: &str, excluding: AgentKey) -> Option<QualifiedRef> {
        self.sns
            .get(service)?
            .impls
            .iter()
            .find(|r| r.agent != excluding)
            .copied()
    }

    /// As [`Resolver::lookup_any`], restricted to agents located at `host`.
    pub fn lookup_at(&self, service: &str, host: &Host, excluding: AgentKey) -> Option<QualifiedRef> {
        self.sns
            .get(service)?
            .impls
            .iter()
            .find(|r| r.agent != excluding && self.ans.get(r) == Some(host))
            .copied()
    }

    /// Drops every ANS entry qualified with `agent` and removes those refs
    /// from the implementation sets. Interfaces are kept.
    pub fn unregister_agent(&mut self, agent: AgentKey) {
        self.ans.retain(|r, _| r.agent != agent);
        for entry in self.sns.values_mut() {
            entry.impls.retain(|r| r.agent != agent);
        }
    }

    /// Registers `ty` as the interface of `service` when none exists yet;
    /// otherwise the two must agree. Agreement is tree equivalence, or
    /// failing that, unifiability of fresh copies so that type variables
    /// left open by a program that only requires the service act as
    /// wildcards.
    pub fn declare_or_check_service_type(
        &mut self,
        service: &str,
        ty: &TypeTerm,
    ) -> Result<(), ServiceTypeMismatch> {
        let Some(entry) = self.sns.get(service) else {
            self.sns.insert(
                service.to_string(),
                ServiceEntry {
                    ty: ty.canonical(),
                    impls: BTreeSet::new(),
                },
            );
            return Ok(());
        };
        if type_equiv(&entry.ty, ty) {
            return Ok(());
        }
        let mut s = Substitution::new();
        let a = s.import_fresh(&entry.ty);
        let b = s.import_fresh(ty);
        s.unify_nodes(a, b).map_err(|_| ServiceTypeMismatch {
            service: service.to_string(),
            registered: entry.ty.clone(),
            inferred: ty.canonical(),
        })
    }

    /// Every impl is an ANS key.
    pub fn is_consistent(&self) -> bool {
        self.sns
            .values()
            .all(|e| e.impls.iter().all(|r| self.ans.contains_key(r)))
    }

    /// `ANS <ref> <host>` and `SNS <service> <type> {refs}` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (r, h) in &self.ans {
            let _ = writeln!(out, "ANS {r} {h}");
        }
        for (s, e) in &self.sns {
            let refs: Vec<String> = e.impls.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(out, "SNS {s} {} {{{}}}", e.ty.canonical(), refs.join(", "));
        }
        out
    }
}
