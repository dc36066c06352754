//! Identifiers shared by the resolver and the machine.

use std::fmt;

/// Network-wide agent key, rendered `a<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentKey(pub u32);

impl fmt::Display for AgentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// A heap reference local to one agent: an ordinary cell `r<n>` or a
/// thread reference `t<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocalRef {
    Cell(u32),
    Thread(u32),
}

impl fmt::Display for LocalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalRef::Cell(n) => write!(f, "r{n}"),
            LocalRef::Thread(n) => write!(f, "t{n}"),
        }
    }
}

/// `r@a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualifiedRef {
    pub agent: AgentKey,
    pub local: LocalRef,
}

impl QualifiedRef {
    pub fn new(agent: AgentKey, local: LocalRef) -> Self {
        Self { agent, local }
    }
}

impl fmt::Display for QualifiedRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.local, self.agent)
    }
}

/// A host of the simulated network.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Host(pub String);

impl Host {
    pub fn new(name: impl Into<String>) -> Self {
        Host(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Host {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_and_order() {
        let a = QualifiedRef::new(AgentKey(1), LocalRef::Cell(0));
        let b = QualifiedRef::new(AgentKey(1), LocalRef::Cell(2));
        let c = QualifiedRef::new(AgentKey(2), LocalRef::Cell(0));
        assert_eq!(a.to_string(), "r0@a1");
        assert_eq!(QualifiedRef::new(AgentKey(0), LocalRef::Thread(3)).to_string(), "t3@a0");
        assert!(a < b && b < c);
    }
}
