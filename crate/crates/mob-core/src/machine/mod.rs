//! The Mob abstract machine: agents, threads, heaps and the name resolver,
//! advanced one reduction at a time by a deterministic scheduler.

pub mod code;
pub mod copy;
pub mod error;
pub mod eval;
mod rules;
pub mod trace;
pub mod value;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use code::{Code, Frame, Thread};
pub use error::{LaunchError, RuntimeError, RuntimeErrorKind};
pub use eval::Heap;
pub use trace::{RuleName, TraceEvent};
pub use value::{Closure, Content, Env, HeapCell, Value};

use crate::collect::CodeRepo;
use crate::external::{ExternRegistry, Transcripts};
use crate::names::{AgentKey, Host, LocalRef, QualifiedRef};
use crate::resolver::Resolver;
use crate::syntax::ast::{Block, Instr, InstrKind, Span};

/// `a(h, C, H, T, W)`.
#[derive(Debug, Clone)]
pub struct Agent {
    pub key: AgentKey,
    pub host: Host,
    pub code: CodeRepo,
    pub heap: Heap,
    pub running: VecDeque<Thread>,
    pub suspended: BTreeMap<QualifiedRef, Vec<Thread>>,
    /// Set by `exit` in an unregistered agent; collected on the next step.
    pub terminated: bool,
    /// Script path or class name, for diagnostics.
    pub label: String,
    next_cell: u32,
    next_thread: u32,
}

impl Agent {
    fn new(key: AgentKey, host: Host, code: CodeRepo, label: String) -> Self {
        Self {
            key,
            host,
            code,
            heap: Heap::new(),
            running: VecDeque::new(),
            suspended: BTreeMap::new(),
            terminated: false,
            label,
            next_cell: 0,
            next_thread: 0,
        }
    }

    pub fn qualify(&self, local: LocalRef) -> QualifiedRef {
        QualifiedRef::new(self.key, local)
    }

    fn fresh_cell(&mut self) -> LocalRef {
        let r = LocalRef::Cell(self.next_cell);
        self.next_cell += 1;
        r
    }

    fn fresh_qualified_cell(&mut self) -> QualifiedRef {
        let r = self.fresh_cell();
        self.qualify(r)
    }

    fn fresh_thread(&mut self) -> u32 {
        let t = self.next_thread;
        self.next_thread += 1;
        t
    }

    /// Fresh thread `t` with cell `t : (t, null)` running `code` under `env`.
    fn launch(&mut self, env: Env, code: Code, result: Option<QualifiedRef>) -> u32 {
        let t = self.fresh_thread();
        self.heap.insert(
            LocalRef::Thread(t),
            HeapCell {
                owner: Some(t),
                content: Content::Value(Value::Null),
            },
        );
        self.running.push_back(Thread {
            tref: Some(t),
            stack: vec![Frame::new(env, code)],
            result,
        });
        t
    }

    fn suspend(&mut self, on: QualifiedRef, thread: Thread) {
        self.suspended.entry(on).or_default().push(thread);
    }

    pub fn suspended_count(&self) -> usize {
        self.suspended.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MachineOptions {
    /// Falling off the end of a method is an error instead of `return null`.
    pub strict_returns: bool,
    /// Pick uniformly among enabled threads instead of round-robin.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Stepped(TraceEvent),
    Quiescent,
    Deadlock(DeadlockReport),
}

/// Threads that can never move again.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeadlockReport {
    pub blocked: Vec<String>,
}

impl std::fmt::Display for DeadlockReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for line in &self.blocked {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Quiescent,
    Deadlock(DeadlockReport),
    StepLimit,
    Error(RuntimeError),
}

#[derive(Debug)]
pub struct Machine {
    agents: BTreeMap<AgentKey, Agent>,
    resolver: Resolver,
    hosts: BTreeSet<Host>,
    externs: ExternRegistry,
    next_agent: u32,
    steps: u64,
    cursor: AgentKey,
    rng: Option<ChaCha8Rng>,
    strict_returns: bool,
    break_block: Block,
}

impl Machine {
    pub fn new(hosts: impl IntoIterator<Item = Host>, externs: ExternRegistry, options: MachineOptions) -> Self {
        Self {
            agents: BTreeMap::new(),
            resolver: Resolver::new(),
            hosts: hosts.into_iter().collect(),
            externs,
            next_agent: 0,
            steps: 0,
            cursor: AgentKey(0),
            rng: options.seed.map(ChaCha8Rng::seed_from_u64),
            strict_returns: options.strict_returns,
            break_block: Arc::from(vec![Instr {
                kind: InstrKind::Break,
                span: Span::default(),
            }]),
        }
    }

    pub fn resolver(&self) -> &Resolver {
        &self.resolver
    }

    pub fn resolver_mut(&mut self) -> &mut Resolver {
        &mut self.resolver
    }

    pub fn agents(&self) -> &BTreeMap<AgentKey, Agent> {
        &self.agents
    }

    pub fn agent(&self, key: AgentKey) -> Option<&Agent> {
        self.agents.get(&key)
    }

    pub fn hosts(&self) -> &BTreeSet<Host> {
        &self.hosts
    }

    pub fn transcripts(&self) -> &Transcripts {
        self.externs.transcripts()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Places a compiled script on `host` as an unregistered agent whose
    /// single thread runs `body` followed by `exit`.
    pub fn launch_script(
        &mut self,
        host: &Host,
        code: CodeRepo,
        body: &Block,
        label: impl Into<String>,
    ) -> Result<AgentKey, LaunchError> {
        if !self.hosts.contains(host) {
            return Err(LaunchError::UnknownHost(host.to_string()));
        }
        let key = self.fresh_agent();
        let mut agent = Agent::new(key, host.clone(), code, label.into());
        let exit: Block = Arc::from(vec![Instr {
            kind: InstrKind::Exit,
            span: body.last().map(|i| i.span).unwrap_or_default(),
        }]);
        let code = Code::from_block(&exit).prepend(body);
        agent.launch(Env::new(), code, None);
        self.agents.insert(key, agent);
        Ok(key)
    }

    fn fresh_agent(&mut self) -> AgentKey {
        let k = AgentKey(self.next_agent);
        self.next_agent += 1;
        k
    }

    /// Applies one reduction.
    pub fn step(&mut self) -> Result<StepOutcome, RuntimeError> {
        if let Some(key) = self
            .agents
            .iter()
            .find(|(_, a)| a.terminated)
            .map(|(k, _)| *k)
        {
            self.agents.remove(&key);
            return Ok(StepOutcome::Stepped(self.event(RuleName::AgentGC, key, None, Vec::new())));
        }
        let Some((key, index)) = self.pick() else {
            let idle = self
                .agents
                .values()
                .all(|a| a.running.is_empty() && a.suspended.is_empty());
            return Ok(if idle {
                StepOutcome::Quiescent
            } else {
                StepOutcome::Deadlock(self.deadlock_report())
            });
        };
        let mut agent = self.agents.remove(&key).expect("picked agent exists");
        let thread = agent.running.remove(index).expect("picked thread exists");
        let tref = thread.tref;
        let span = thread.head().map(|i| i.span);
        self.cursor = AgentKey(key.0 + 1);
        let result = self.apply(&mut agent, thread);
        if !agent_removed(&result) {
            self.agents.insert(key, agent);
        }
        match result {
            Ok(applied) => Ok(StepOutcome::Stepped(self.event(
                applied.rule,
                key,
                tref,
                applied.detail,
            ))),
            Err(kind) => Err(RuntimeError {
                agent: key,
                thread: tref,
                span,
                kind,
            }),
        }
    }

    fn event(
        &mut self,
        rule: RuleName,
        agent: AgentKey,
        thread: Option<u32>,
        detail: Vec<(&'static str, String)>,
    ) -> TraceEvent {
        self.steps += 1;
        TraceEvent {
            step: self.steps,
            rule,
            agent,
            thread,
            detail,
        }
    }

    /// Steps until quiescence, deadlock, an error or `max_steps` reductions,
    /// handing every event to `sink`.
    pub fn run(&mut self, max_steps: u64, mut sink: impl FnMut(&Machine, &TraceEvent)) -> RunOutcome {
        let mut taken = 0;
        loop {
            if taken >= max_steps {
                return RunOutcome::StepLimit;
            }
            match self.step() {
                Ok(StepOutcome::Stepped(e)) => {
                    taken += 1;
                    sink(self, &e);
                }
                Ok(StepOutcome::Quiescent) => return RunOutcome::Quiescent,
                Ok(StepOutcome::Deadlock(d)) => return RunOutcome::Deadlock(d),
                Err(e) => return RunOutcome::Error(e),
            }
        }
    }

    /// Next thread to reduce: round-robin over agents by key starting at the
    /// cursor, first enabled thread in pool order; or uniform among all
    /// enabled threads when seeded.
    fn pick(&mut self) -> Option<(AgentKey, usize)> {
        if self.rng.is_some() {
            let candidates: Vec<(AgentKey, usize)> = self
                .agents
                .values()
                .flat_map(|a| {
                    a.running
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| self.enabled(a, t))
                        .map(move |(i, _)| (a.key, i))
                })
                .collect();
            if candidates.is_empty() {
                return None;
            }
            let rng = self.rng.as_mut()?;
            return Some(candidates[rng.gen_range(0..candidates.len())]);
        }
        let order = self
            .agents
            .range(self.cursor..)
            .chain(self.agents.range(..self.cursor));
        for (key, a) in order {
            if let Some(i) = a.running.iter().position(|t| self.enabled(a, t)) {
                return Some((*key, i));
            }
        }
        None
    }

    fn deadlock_report(&self) -> DeadlockReport {
        let mut blocked = Vec::new();
        for a in self.agents.values() {
            for t in &a.running {
                let mut line = format!("{} {} blocked", a.key, thread_name(t));
                if let Some(i) = t.head() {
                    let _ = write!(line, " at {} ({})", rules::describe(i), i.span);
                }
                blocked.push(line);
            }
            for (r, ts) in &a.suspended {
                for t in ts {
                    let mut line = format!("{} {} suspended on {r}", a.key, thread_name(t));
                    if let Some(i) = t.head() {
                        let _ = write!(line, " before {} ({})", rules::describe(i), i.span);
                    }
                    blocked.push(line);
                }
            }
        }
        DeadlockReport { blocked }
    }

    /// Checks the lock, wait-set and resolver invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        for a in self.agents.values() {
            for r in a.suspended.keys() {
                if r.agent != a.key || !a.heap.contains_key(&r.local) {
                    return Err(format!("{} has threads waiting on {r} outside its heap", a.key));
                }
            }
            for (r, cell) in &a.heap {
                if let (LocalRef::Thread(t), Some(owner)) = (r, cell.owner) {
                    if owner != *t && !a.heap.contains_key(&LocalRef::Thread(owner)) {
                        return Err(format!("{} cell {r} locked by unknown thread t{owner}", a.key));
                    }
                }
            }
        }
        if !self.resolver.is_consistent() {
            return Err("a service implementation is missing from ANS".into());
        }
        for r in self.resolver.ans().keys() {
            let live = self
                .agents
                .get(&r.agent)
                .is_some_and(|a| a.heap.get(&r.local).and_then(HeapCell::closure).is_some());
            if !live {
                return Err(format!("ANS entry {r} does not name a live agent closure"));
            }
        }
        Ok(())
    }

    /// Human-readable agent summary for `--dump-code`.
    pub fn dump_code(&self) -> String {
        let mut out = String::new();
        for a in self.agents.values() {
            let keys: Vec<&str> = a.code.keys().map(String::as_str).collect();
            let _ = writeln!(out, "{} {} {{{}}}", a.key, a.label, keys.join(", "));
        }
        out
    }
}

fn thread_name(t: &Thread) -> String {
    match (t.tref, t.result) {
        (Some(n), _) => format!("t{n}"),
        (None, Some(r)) => format!("notify({r})"),
        (None, None) => "-".into(),
    }
}

fn agent_removed(r: &Result<rules::Applied, RuntimeErrorKind>) -> bool {
    matches!(r, Ok(a) if a.agent_removed)
}
