//! One line per reduction: `STEP <n> <Rule> agent=<a> thread=<t> [detail=k:v,...]`.

use std::fmt;

use crate::names::AgentKey;

macro_rules! rules {
    ($($name:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RuleName { $($name),* }

        impl RuleName {
            pub const ALL: &'static [RuleName] = &[$(RuleName::$name),*];

            pub fn as_str(self) -> &'static str {
                match self { $(RuleName::$name => stringify!($name)),* }
            }
        }
    };
}

rules!(
    NewObject,
    NewAgent,
    Fork,
    JoinSuspend,
    Join,
    End,
    NotifyThread,
    Wait,
    Notify,
    Go,
    Bind,
    BindAny,
    Host,
    LocalInvoke,
    LocalInvokeLocked,
    LocalReturn,
    RemoteInvoke,
    RemoteReturn,
    Lock,
    LockFailed,
    Unlock,
    UnlockIgnore,
    IfTrue,
    IfFalse,
    PushCont,
    WhileTrue,
    WhileFalse,
    Break,
    Exec,
    Assignment,
    AttrAssignment,
    AttrAssignmentLocked,
    AttrAssignmentLockedInAttr,
    ReadAttr,
    Exit,
    AgentGC,
);

impl RuleName {
    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: u64,
    pub rule: RuleName,
    pub agent: AgentKey,
    /// `None` for notify pseudo-threads and agent-level events.
    pub thread: Option<u32>,
    pub detail: Vec<(&'static str, String)>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "STEP {} {} agent={} thread=", self.step, self.rule, self.agent)?;
        match self.thread {
            Some(t) => write!(f, "t{t}")?,
            None => f.write_str("-")?,
        }
        if !self.detail.is_empty() {
            let parts: Vec<String> = self.detail.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            write!(f, " detail={}", parts.join(","))?;
        }
        Ok(())
    }
}
