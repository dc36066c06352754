//! Compilation pipeline, run configuration and batch runs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::collect::{code_collect, CodeRepo, CollectError};
use crate::external::{ExternRegistry, MockConfig, Transcripts, SERVICE_CONSTANTS};
use crate::machine::{LaunchError, Machine, MachineOptions, RunOutcome, TraceEvent};
use crate::names::{AgentKey, Host};
use crate::prelude::with_prelude;
use crate::resolver::{Resolver, ServiceTypeMismatch};
use crate::syntax::{check_restrictions, parse_source, ParseError, Program, Violation};
use crate::types::{check_services, infer_program, ProgramTyping, TypeError};

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

pub fn service_constant_names() -> Vec<&'static str> {
    SERVICE_CONSTANTS.iter().map(|(n, _)| *n).collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{}", join_lines(.0))]
    Restrictions(Vec<Violation>),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("{}", join_lines(.0))]
    Services(Vec<ServiceTypeMismatch>),
    #[error(transparent)]
    Collect(#[from] CollectError),
}

fn join_lines<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

/// A program ready to launch.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub program: Program,
    pub typing: ProgramTyping,
    pub code: CodeRepo,
}

/// Runs every static phase. Service interfaces are checked against and
/// added to `resolver`.
pub fn compile(source: &str, resolver: &mut Resolver) -> Result<Compiled, CompileError> {
    let globals = service_constant_names();
    let program = with_prelude(parse_source(source)?);
    check_restrictions(&program, &globals).map_err(CompileError::Restrictions)?;
    let typing = infer_program(&program, &globals)?;
    check_services(&typing, resolver).map_err(CompileError::Services)?;
    let code = code_collect(&program.definitions)?;
    Ok(Compiled {
        program,
        typing,
        code,
    })
}

/// Compiles a standalone program against an empty resolver.
pub fn check(source: &str) -> Result<Compiled, CompileError> {
    compile(source, &mut Resolver::new())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub path: PathBuf,
    pub host: Host,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub hosts: Vec<Host>,
    pub scripts: Vec<ScriptEntry>,
    pub mocks: MockConfig,
    pub max_steps: u64,
    pub trace: bool,
    pub seed: Option<u64>,
    pub strict_returns: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hosts: Vec::new(),
            scripts: Vec::new(),
            mocks: MockConfig::default(),
            max_steps: DEFAULT_MAX_STEPS,
            trace: false,
            seed: None,
            strict_returns: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("script {path} starts on unknown host {host}")]
    UnknownHost { path: String, host: String },
    #[error("max_steps must be positive")]
    ZeroSteps,
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Hosts,
    Scripts,
    Mocks,
    Run,
}

impl RunConfig {
    /// Parses the line-oriented config format. Script paths are resolved
    /// against `base`.
    ///
    /// ```text
    /// [hosts]
    /// h
    /// [scripts]
    /// server.mob = h
    /// [mocks]
    /// fileexec.getTimeApplication = 12:00
    /// io.input = alice
    /// ftp.file.afile = contents
    /// ftp.fill.big = 10000
    /// [run]
    /// max_steps = 5000
    /// seed = 7
    /// strict_returns = true
    /// trace = true
    /// ```
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        let mut section = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| ConfigError::Syntax {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name.trim() {
                    "hosts" => Section::Hosts,
                    "scripts" => Section::Scripts,
                    "mocks" => Section::Mocks,
                    "run" => Section::Run,
                    other => return Err(err(format!("unknown section [{other}]"))),
                });
                continue;
            }
            let Some(section) = section else {
                return Err(err("entry before any section".into()));
            };
            if section == Section::Hosts {
                config.hosts.push(Host::new(line));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            match section {
                Section::Hosts => unreachable!(),
                Section::Scripts => config.scripts.push(ScriptEntry {
                    path: base.join(key),
                    host: Host::new(value),
                }),
                Section::Mocks => config.mocks_entry(key, value).map_err(err)?,
                Section::Run => config.run_entry(key, value).map_err(err)?,
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn mocks_entry(&mut self, key: &str, value: &str) -> Result<(), String> {
        if let Some(cmd) = key.strip_prefix("fileexec.") {
            self.mocks
                .fileexec
                .entry(cmd.to_string())
                .or_default()
                .push(value.to_string());
        } else if key == "io.input" {
            self.mocks.io_input.push(value.to_string());
        } else if let Some(name) = key.strip_prefix("ftp.file.") {
            self.mocks.ftp_files.insert(name.to_string(), value.to_string());
        } else if let Some(name) = key.strip_prefix("ftp.fill.") {
            let n: usize = value
                .parse()
                .map_err(|_| format!("ftp.fill expects a byte count, found `{value}`"))?;
            self.mocks.ftp_files.insert(name.to_string(), filler(n));
        } else {
            return Err(format!("unknown mock key `{key}`"));
        }
        Ok(())
    }

    fn run_entry(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = || format!("bad value `{value}` for {key}");
        match key {
            "max_steps" => self.max_steps = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = Some(value.parse().map_err(|_| bad())?),
            "strict_returns" => self.strict_returns = value.parse().map_err(|_| bad())?,
            "trace" => self.trace = value.parse().map_err(|_| bad())?,
            _ => return Err(format!("unknown run key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_steps == 0 {
            return Err(ConfigError::ZeroSteps);
        }
        for s in &self.scripts {
            if !self.hosts.contains(&s.host) {
                return Err(ConfigError::UnknownHost {
                    path: s.path.display().to_string(),
                    host: s.host.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn options(&self) -> MachineOptions {
        MachineOptions {
            strict_returns: self.strict_returns,
            seed: self.seed,
        }
    }
}

/// `n` bytes of printable filler.
fn filler(n: usize) -> String {
    (0..n).map(|i| char::from(b'a' + (i % 26) as u8)).collect()
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{label}: {error}")]
    Compile { label: String, error: CompileError },
    #[error(transparent)]
    Launch(#[from] LaunchError),
}

/// A machine with every script compiled and launched, plus the compiled
/// scripts in launch order.
pub fn prepare(
    config: &RunConfig,
    sources: &[(String, String)],
) -> Result<(Machine, Vec<Compiled>), DriverError> {
    config.validate()?;
    let registry = ExternRegistry::with_builtins(&config.mocks);
    let mut machine = Machine::new(config.hosts.iter().cloned(), registry, config.options());
    let mut all = Vec::new();
    for ((label, source), entry) in sources.iter().zip(&config.scripts) {
        let compiled = compile(source, machine.resolver_mut()).map_err(|error| DriverError::Compile {
            label: label.clone(),
            error,
        })?;
        machine.launch_script(
            &entry.host,
            compiled.code.clone(),
            &compiled.program.body,
            label.clone(),
        )?;
        all.push(compiled);
    }
    Ok((machine, all))
}

/// Reads the configured script files and prepares the machine.
pub fn prepare_from_files(config: &RunConfig) -> Result<(Machine, Vec<Compiled>), DriverError> {
    let mut sources = Vec::new();
    for s in &config.scripts {
        let text = fs::read_to_string(&s.path).map_err(|source| ConfigError::Io {
            path: s.path.display().to_string(),
            source,
        })?;
        sources.push((s.path.display().to_string(), text));
    }
    prepare(config, &sources)
}

/// Everything observable about a finished run.
#[derive(Debug)]
pub struct RunReport {
    pub outcome: RunOutcome,
    pub trace: Vec<TraceEvent>,
    pub machine: Machine,
}

impl RunReport {
    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|e| format!("{e}\n")).collect()
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(&self.outcome)
    }
}

pub fn exit_code(outcome: &RunOutcome) -> i32 {
    match outcome {
        RunOutcome::Quiescent => 0,
        RunOutcome::Deadlock(_) => 3,
        RunOutcome::StepLimit => 4,
        RunOutcome::Error(_) => 5,
    }
}

/// Runs a prepared machine, keeping the trace.
pub fn run_machine(mut machine: Machine, max_steps: u64) -> RunReport {
    let mut trace = Vec::new();
    let outcome = machine.run(max_steps, |_, e| trace.push(e.clone()));
    RunReport {
        outcome,
        trace,
        machine,
    }
}

/// Compiles, launches and runs in one go.
pub fn run_sources(config: &RunConfig, sources: &[(String, String)]) -> Result<RunReport, DriverError> {
    let (machine, _) = prepare(config, sources)?;
    Ok(run_machine(machine, config.max_steps))
}

/// Transcript files keyed by file name: `fileexec.txt`, `io-<agent>.txt`
/// and `ftp.txt`.
pub fn transcript_files(t: &Transcripts) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let lines = |ls: &[String]| ls.iter().map(|l| format!("{l}\n")).collect::<String>();
    files.insert("fileexec.txt".to_string(), lines(&t.fileexec));
    for (agent, ls) in &t.io {
        files.insert(format!("io-{agent}.txt"), lines(ls));
    }
    if !t.ftp_reads.is_empty() {
        let reads: Vec<String> = t.ftp_reads.iter().map(ToString::to_string).collect();
        files.insert("ftp.txt".to_string(), lines(&reads));
    }
    files
}

pub fn write_transcripts(dir: &Path, t: &Transcripts) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, content) in transcript_files(t) {
        fs::write(dir.join(name), content)?;
    }
    Ok(())
}

/// Rendering used by `--dump-resolver` and the golden files.
pub fn resolver_summary(machine: &Machine) -> String {
    machine.resolver().dump()
}

/// The io transcript of `agent`, empty when it never opened a session.
pub fn io_lines(t: &Transcripts, agent: AgentKey) -> &[String] {
    t.io.get(&agent).map(Vec::as_slice).unwrap_or(&[])
}
