//! The `exec` session protocol and the deterministic built-in services.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::names::AgentKey;

pub const FILEEXEC: i64 = 1;
pub const IO: i64 = 2;
pub const FTP: i64 = 4;

/// Names pre-bound to the built-in service ids in every scope.
pub const SERVICE_CONSTANTS: [(&str, i64); 3] = [("FILEEXEC", FILEEXEC), ("IO", IO), ("FTP", FTP)];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExternError {
    #[error("unknown exec action \"{0}\"")]
    UnknownAction(String),
    #[error("no external service with id {0}")]
    UnknownService(i64),
    #[error("session {0} is not open")]
    DeadSession(i64),
    #[error("bad payload for {action}: \"{payload}\"")]
    BadPayload { action: String, payload: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecValue {
    Int(i64),
    Str(String),
    Bool(bool),
}

impl fmt::Display for ExecValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecValue::Int(n) => write!(f, "{n}"),
            ExecValue::Str(s) => write!(f, "\"{s}\""),
            ExecValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Observable effects of the mocks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcripts {
    /// Every command line started through FILEEXEC, then any data written to it.
    pub fileexec: Vec<String>,
    /// Lines written through IO sessions, keyed by the agent that opened the session.
    pub io: BTreeMap<AgentKey, Vec<String>>,
    /// Byte count returned by each FTP read.
    pub ftp_reads: Vec<usize>,
}

/// The agent on whose behalf a session is opened.
#[derive(Debug, Clone, Copy)]
pub struct CallContext {
    pub agent: AgentKey,
}

pub trait ExternService: fmt::Debug + Send {
    fn init(
        &mut self,
        ctx: CallContext,
        payload: &str,
        out: &mut Transcripts,
    ) -> Result<Box<dyn ExternSession>, ExternError>;
}

/// An open session. Reads past the end return "".
pub trait ExternSession: fmt::Debug + Send {
    fn read(&mut self, bytes: usize, out: &mut Transcripts) -> String;
    fn read_line(&mut self, out: &mut Transcripts) -> String;
    fn write(&mut self, data: &str, out: &mut Transcripts) -> bool;
    fn action(&mut self, command: &str, out: &mut Transcripts) -> bool;
    fn close(&mut self, _out: &mut Transcripts) -> bool {
        true
    }
}

#[derive(Debug)]
struct OpenSession {
    state: Box<dyn ExternSession>,
}

/// Service table plus the network-wide session table.
#[derive(Debug)]
pub struct ExternRegistry {
    services: BTreeMap<i64, Box<dyn ExternService>>,
    sessions: BTreeMap<i64, OpenSession>,
    next_session: i64,
    transcripts: Transcripts,
}

impl Default for ExternRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl ExternRegistry {
    pub fn new() -> Self {
        Self {
            services: BTreeMap::new(),
            sessions: BTreeMap::new(),
            next_session: 1,
            transcripts: Transcripts::default(),
        }
    }

    /// FILEEXEC, IO and FTP mocks driven by `config`.
    pub fn with_builtins(config: &MockConfig) -> Self {
        let mut reg = Self::new();
        reg.register(
            FILEEXEC,
            Box::new(FileExecMock {
                outputs: config.fileexec.clone(),
            }),
        );
        reg.register(
            IO,
            Box::new(IoMock {
                input: config.io_input.iter().cloned().collect(),
            }),
        );
        reg.register(
            FTP,
            Box::new(FtpMock {
                files: config.ftp_files.clone(),
            }),
        );
        reg
    }

    pub fn register(&mut self, id: i64, service: Box<dyn ExternService>) {
        self.services.insert(id, service);
    }

    pub fn transcripts(&self) -> &Transcripts {
        &self.transcripts
    }

    pub fn dispatch(
        &mut self,
        ctx: CallContext,
        action: &str,
        id: i64,
        payload: &str,
    ) -> Result<ExecValue, ExternError> {
        let out = &mut self.transcripts;
        match action {
            "init" => {
                let service = self
                    .services
                    .get_mut(&id)
                    .ok_or(ExternError::UnknownService(id))?;
                let state = service.init(ctx, payload, out)?;
                let sid = self.next_session;
                self.next_session += 1;
                self.sessions.insert(sid, OpenSession { state });
                Ok(ExecValue::Int(sid))
            }
            "isAlive" => Ok(ExecValue::Bool(self.sessions.contains_key(&id))),
            "close" => Ok(ExecValue::Bool(match self.sessions.remove(&id) {
                Some(mut s) => s.state.close(out),
                None => false,
            })),
            "read" | "readLine" | "write" | "action" => {
                let session = &mut self
                    .sessions
                    .get_mut(&id)
                    .ok_or(ExternError::DeadSession(id))?
                    .state;
                Ok(match action {
                    "read" => {
                        let bytes = payload.trim().parse::<usize>().map_err(|_| {
                            ExternError::BadPayload {
                                action: action.to_string(),
                                payload: payload.to_string(),
                            }
                        })?;
                        ExecValue::Str(session.read(bytes, out))
                    }
                    "readLine" => ExecValue::Str(session.read_line(out)),
                    "write" => ExecValue::Bool(session.write(payload, out)),
                    _ => ExecValue::Bool(session.action(payload, out)),
                })
            }
            other => Err(ExternError::UnknownAction(other.to_string())),
        }
    }
}

/// Scripted content for the built-in mocks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockConfig {
    /// Output lines per command name (the first word of the command line).
    pub fileexec: BTreeMap<String, Vec<String>>,
    pub io_input: Vec<String>,
    pub ftp_files: BTreeMap<String, String>,
}

/// Takes up to `bytes` bytes off the front of `buf`, never splitting a char.
fn take_bytes(buf: &mut String, bytes: usize) -> String {
    let mut cut = bytes.min(buf.len());
    while !buf.is_char_boundary(cut) {
        cut -= 1;
    }
    let rest = buf.split_off(cut);
    std::mem::replace(buf, rest)
}

fn take_line(buf: &mut String) -> String {
    match buf.find('\n') {
        Some(i) => {
            let mut line = take_bytes(buf, i + 1);
            line.pop();
            line
        }
        None => std::mem::take(buf),
    }
}

#[derive(Debug)]
struct FileExecMock {
    outputs: BTreeMap<String, Vec<String>>,
}

impl ExternService for FileExecMock {
    fn init(
        &mut self,
        _ctx: CallContext,
        payload: &str,
        out: &mut Transcripts,
    ) -> Result<Box<dyn ExternSession>, ExternError> {
        out.fileexec.push(payload.to_string());
        let command = payload.split_whitespace().next().unwrap_or("");
        let output = self
            .outputs
            .get(command)
            .map(|lines| lines.iter().map(|l| format!("{l}\n")).collect())
            .unwrap_or_default();
        Ok(Box::new(BufferSession {
            pending: output,
            log: SessionLog::FileExec,
        }))
    }
}

#[derive(Debug)]
struct IoMock {
    input: VecDeque<String>,
}

impl ExternService for IoMock {
    fn init(
        &mut self,
        ctx: CallContext,
        _payload: &str,
        out: &mut Transcripts,
    ) -> Result<Box<dyn ExternSession>, ExternError> {
        out.io.entry(ctx.agent).or_default();
        let pending = self.input.drain(..).map(|l| format!("{l}\n")).collect();
        Ok(Box::new(BufferSession {
            pending,
            log: SessionLog::Io(ctx.agent),
        }))
    }
}

#[derive(Debug)]
enum SessionLog {
    FileExec,
    Io(AgentKey),
}

/// Serves pre-staged output and records what is written.
#[derive(Debug)]
struct BufferSession {
    pending: String,
    log: SessionLog,
}

impl ExternSession for BufferSession {
    fn read(&mut self, bytes: usize, _out: &mut Transcripts) -> String {
        take_bytes(&mut self.pending, bytes)
    }

    fn read_line(&mut self, _out: &mut Transcripts) -> String {
        take_line(&mut self.pending)
    }

    fn write(&mut self, data: &str, out: &mut Transcripts) -> bool {
        match self.log {
            SessionLog::FileExec => out.fileexec.push(format!("< {data}")),
            SessionLog::Io(agent) => out.io.entry(agent).or_default().push(data.to_string()),
        }
        true
    }

    fn action(&mut self, _command: &str, _out: &mut Transcripts) -> bool {
        true
    }
}

#[derive(Debug)]
struct FtpMock {
    files: BTreeMap<String, String>,
}

impl ExternService for FtpMock {
    fn init(
        &mut self,
        _ctx: CallContext,
        _payload: &str,
        _out: &mut Transcripts,
    ) -> Result<Box<dyn ExternSession>, ExternError> {
        Ok(Box::new(FtpSession {
            files: self.files.clone(),
            staged: String::new(),
        }))
    }
}

#[derive(Debug)]
struct FtpSession {
    files: BTreeMap<String, String>,
    staged: String,
}

impl ExternSession for FtpSession {
    fn read(&mut self, bytes: usize, out: &mut Transcripts) -> String {
        let chunk = take_bytes(&mut self.staged, bytes);
        out.ftp_reads.push(chunk.len());
        chunk
    }

    fn read_line(&mut self, out: &mut Transcripts) -> String {
        let line = take_line(&mut self.staged);
        out.ftp_reads.push(line.len());
        line
    }

    fn write(&mut self, _data: &str, _out: &mut Transcripts) -> bool {
        false
    }

    /// `GET <file>` stages the file for reading.
    fn action(&mut self, command: &str, _out: &mut Transcripts) -> bool {
        let mut words = command.split_whitespace();
        match (words.next(), words.next()) {
            (Some("GET"), Some(name)) => match self.files.get(name) {
                Some(content) => {
                    self.staged = content.clone();
                    true
                }
                None => false,
            },
            _ => false,
        }
    }
}
