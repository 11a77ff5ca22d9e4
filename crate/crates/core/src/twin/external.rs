//! Twin running as a child process speaking the [`protocol`](super::protocol).
//!
//! Each worker owns one child process and runs one trajectory at a time
//! through it. A timeout, an unexpected exit, or a malformed frame kills the
//! child and fails the current trajectory; the next exchange starts a fresh
//! process. A well-formed `{"error":...}` reply fails the trajectory but
//! keeps the process.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::Message;
use super::{TwinError, TwinFactory, TwinSession};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalTwinConfig {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    /// Size of the process pool.
    #[serde(default = "one")]
    pub workers: usize,
    /// Per-exchange deadline.
    #[serde(default = "thirty_seconds", with = "secs")]
    pub timeout: Duration,
    /// Send representative raw doses with each step.
    #[serde(default)]
    pub consumes_raw_doses: bool,
}

fn one() -> usize {
    1
}

fn thirty_seconds() -> Duration {
    Duration::from_secs(30)
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl ExternalTwinConfig {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalTwinConfig {
            program: program.into(),
            args: Vec::new(),
            workers: 1,
            timeout: thirty_seconds(),
            consumes_raw_doses: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExternalTwin {
    config: ExternalTwinConfig,
}

impl ExternalTwin {
    pub fn new(config: ExternalTwinConfig) -> Self {
        ExternalTwin { config }
    }

    /// A single session, useful for driving the protocol directly.
    pub fn session(&self) -> ExternalSession {
        ExternalSession {
            config: self.config.clone(),
            proc: None,
            restarts: 0,
        }
    }
}

impl TwinFactory for ExternalTwin {
    fn twin_id(&self) -> String {
        let mut id = self.config.program.display().to_string();
        for a in &self.config.args {
            id.push(' ');
            id.push_str(a);
        }
        id
    }

    fn workers(&self) -> usize {
        self.config.workers
    }

    fn consumes_raw_doses(&self) -> bool {
        self.config.consumes_raw_doses
    }

    fn open_worker(&self) -> Result<Box<dyn TwinSession>, TwinError> {
        Ok(Box::new(self.session()))
    }
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalSession {
    config: ExternalTwinConfig,
    proc: Option<Running>,
    restarts: usize,
}

impl ExternalSession {
    /// Number of processes started so far beyond the first.
    pub fn restarts(&self) -> usize {
        self.restarts.saturating_sub(1)
    }

    pub fn is_running(&self) -> bool {
        self.proc.is_some()
    }

    fn spawn(&mut self) -> Result<&mut Running, TwinError> {
        if self.proc.is_none() {
            let mut child = Command::new(&self.config.program)
                .args(&self.config.args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| TwinError::Spawn(format!("{}: {e}", self.config.program.display())))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            let (tx, rx) = mpsc::channel();
            std::thread::spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    let stop = line.is_err();
                    if tx.send(line).is_err() || stop {
                        break;
                    }
                }
            });
            self.restarts += 1;
            self.proc = Some(Running { child, stdin, lines: rx });
        }
        Ok(self.proc.as_mut().expect("just spawned"))
    }

    fn kill(&mut self) {
        self.proc = None;
    }

    /// Sends one command and waits for one well-formed reply.
    pub fn exchange(&mut self, msg: &Message) -> Result<Message, TwinError> {
        let timeout = self.config.timeout;
        let proc = self.spawn()?;
        let sent = writeln!(proc.stdin, "{}", msg.encode()).and_then(|_| proc.stdin.flush());
        if sent.is_err() {
            self.kill();
            return Err(TwinError::Exited);
        }
        let reply = match proc.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Message::decode(&line).map_err(|e| TwinError::Protocol(e.to_string())),
            Ok(Err(e)) => Err(TwinError::Protocol(format!("unreadable output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(TwinError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(TwinError::Exited),
        };
        match reply {
            Ok(m) if m.is_command() => {
                self.kill();
                Err(TwinError::Protocol("twin sent a command instead of a reply".into()))
            }
            Ok(m) => Ok(m),
            Err(e) => {
                self.kill();
                Err(e)
            }
        }
    }

    fn expect_ok(&mut self, msg: &Message) -> Result<(), TwinError> {
        match self.exchange(msg)? {
            Message::Ok => Ok(()),
            Message::Error { message } => Err(TwinError::Remote(message)),
            other => {
                self.kill();
                Err(TwinError::Protocol(format!("expected {{\"ok\":true}}, got {}", other.encode())))
            }
        }
    }
}

impl TwinSession for ExternalSession {
    fn init(&mut self, x0: &[f64]) -> Result<(), TwinError> {
        self.expect_ok(&Message::Init { x0: x0.to_vec() })
    }

    fn step(&mut self, a: usize, raw: Option<&[f64]>) -> Result<Vec<f64>, TwinError> {
        let msg = Message::Step {
            a,
            raw: raw.map(<[f64]>::to_vec),
        };
        match self.exchange(&msg)? {
            Message::Observation { x } => Ok(x),
            Message::Error { message } => Err(TwinError::Remote(message)),
            other => {
                self.kill();
                Err(TwinError::Protocol(format!("expected an observation, got {}", other.encode())))
            }
        }
    }

    /// A dead process needs no reset; the next exchange restarts it.
    fn reset(&mut self) -> Result<(), TwinError> {
        if self.proc.is_none() {
            return Ok(());
        }
        self.expect_ok(&Message::Reset)
    }
}
