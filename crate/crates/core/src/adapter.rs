//! Client side of the worker protocol: an external process that serves a
//! generator+segmenter stack over newline-delimited JSON on its standard
//! streams.
//!
//! ```text
//! -> {"cmd":"hello","protocol":1}
//! <- {"ok":true,"name":"...","latent_dim":D}
//! -> {"cmd":"sample"}
//! <- {"ok":true,"latent":[...]}
//! -> {"cmd":"render","latent":[...]}
//! <- {"ok":true,"labels_pgm_b64":"<base64 of canonical P5>"}
//! ```
//!
//! Any request may be answered with `{"ok":false,"error":"..."}`. The worker
//! is stateless; all optimizer state stays on the driver side. Worker stderr
//! is forwarded to the log.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use log::{debug, info};
use rand::RngCore;
use serde_json::{json, Value};
use thiserror::Error;

use crate::genspace::{BackendDescriptor, BackendError, FrameBackend, LatentCode, LatentError};
use crate::labelmap::{decode_labelmap, LabelMap, LabelMapError};

pub const PROTOCOL_VERSION: u64 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

const STDERR_TAIL_LINES: usize = 64;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("failed to start worker: {detail}{}", stderr_suffix(.stderr))]
    SpawnFailure { detail: String, stderr: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("worker speaks protocol {found}, expected {PROTOCOL_VERSION}")]
    VersionMismatch { found: String },
    #[error("worker crashed: {detail}{}", stderr_suffix(.stderr))]
    WorkerCrashed { detail: String, stderr: String },
    #[error("worker reported an error: {0}")]
    WorkerError(String),
    #[error("worker returned {0}")]
    IllegalClassValue(LabelMapError),
    #[error(transparent)]
    Latent(#[from] LatentError),
}

fn stderr_suffix(stderr: &str) -> String {
    if stderr.trim().is_empty() {
        String::new()
    } else {
        format!("\nworker stderr:\n{}", stderr.trim_end())
    }
}

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    /// Longest wait for any single reply.
    pub timeout: Duration,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

/// A running worker process with a completed handshake.
///
/// Requests take `&mut self`, so at most one is ever in flight.
pub struct WorkerHandle {
    child: Child,
    stdin: Option<ChildStdin>,
    replies: Receiver<std::io::Result<String>>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
    stderr_thread: Option<JoinHandle<()>>,
    descriptor: BackendDescriptor,
    timeout: Duration,
    dead: bool,
}

impl std::fmt::Debug for WorkerHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerHandle")
            .field("pid", &self.child.id())
            .field("descriptor", &self.descriptor)
            .field("dead", &self.dead)
            .finish()
    }
}

/// Launches `cmdline` and performs the hello exchange.
pub fn handshake(cmdline: &[String], cfg: &WorkerConfig) -> Result<WorkerHandle, AdapterError> {
    let (program, args) = cmdline.split_first().ok_or_else(|| AdapterError::SpawnFailure {
        detail: "empty worker command line".into(),
        stderr: String::new(),
    })?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| AdapterError::SpawnFailure {
            detail: format!("{program}: {e}"),
            stderr: String::new(),
        })?;

    let stdin = child.stdin.take();
    let stdout = child.stdout.take().expect("stdout is piped");
    let stderr = child.stderr.take().expect("stderr is piped");

    let (tx, replies) = mpsc::channel();
    thread::Builder::new()
        .name("worker-stdout".into())
        .spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        })
        .expect("spawn stdout reader");

    let stderr_tail = Arc::new(Mutex::new(VecDeque::new()));
    let stderr_thread = {
        let tail = Arc::clone(&stderr_tail);
        let pid = child.id();
        thread::Builder::new()
            .name("worker-stderr".into())
            .spawn(move || forward_stderr(stderr, pid, tail))
            .expect("spawn stderr reader")
    };

    let mut handle = WorkerHandle {
        child,
        stdin,
        replies,
        stderr_tail,
        stderr_thread: Some(stderr_thread),
        descriptor: BackendDescriptor {
            name: String::new(),
            latent_dim: 0,
        },
        timeout: cfg.timeout,
        dead: false,
    };

    let reply = handle
        .request(&json!({"cmd": "hello", "protocol": PROTOCOL_VERSION}))
        .map_err(|e| match e {
            AdapterError::WorkerCrashed { detail, stderr } => AdapterError::SpawnFailure { detail, stderr },
            other => other,
        })?;
    if let Some(version) = reply.get("protocol") {
        if version.as_u64() != Some(PROTOCOL_VERSION) {
            return Err(AdapterError::VersionMismatch {
                found: version.to_string(),
            });
        }
    }
    let name = reply
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| AdapterError::ProtocolViolation("hello reply lacks string field `name`".into()))?;
    let latent_dim = reply
        .get("latent_dim")
        .and_then(Value::as_u64)
        .filter(|&d| d >= 1)
        .ok_or_else(|| {
            AdapterError::ProtocolViolation("hello reply lacks positive integer field `latent_dim`".into())
        })?;
    handle.descriptor = BackendDescriptor {
        name: name.to_string(),
        latent_dim: latent_dim as usize,
    };
    info!("worker {} ready: {} (latent_dim {})", handle.child.id(), name, latent_dim);
    Ok(handle)
}

fn forward_stderr(stderr: impl Read, pid: u32, tail: Arc<Mutex<VecDeque<String>>>) {
    for line in BufReader::new(stderr).lines() {
        let Ok(line) = line else { break };
        info!(target: "frameguard::worker", "[worker {pid}] {line}");
        let mut tail = tail.lock().unwrap_or_else(|e| e.into_inner());
        if tail.len() == STDERR_TAIL_LINES {
            tail.pop_front();
        }
        tail.push_back(line);
    }
}

impl WorkerHandle {
    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn is_alive(&self) -> bool {
        !self.dead
    }

    /// Asks the worker for one realistic latent code.
    pub fn remote_sample(&mut self) -> Result<LatentCode, AdapterError> {
        let reply = self.request(&json!({"cmd": "sample"}))?;
        let values = reply
            .get("latent")
            .and_then(Value::as_array)
            .ok_or_else(|| AdapterError::ProtocolViolation("sample reply lacks array field `latent`".into()))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| AdapterError::ProtocolViolation(format!("non-numeric latent component {v}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != self.descriptor.latent_dim {
            return Err(AdapterError::ProtocolViolation(format!(
                "sampled latent has {} components, handshake declared {}",
                values.len(),
                self.descriptor.latent_dim
            )));
        }
        LatentCode::new(values).map_err(|e| AdapterError::ProtocolViolation(e.to_string()))
    }

    /// Renders and segments `z` in the worker.
    pub fn remote_render(&mut self, z: &LatentCode) -> Result<LabelMap, AdapterError> {
        z.expect_dim(self.descriptor.latent_dim)?;
        let reply = self.request(&json!({"cmd": "render", "latent": z.values()}))?;
        let encoded = reply.get("labels_pgm_b64").and_then(Value::as_str).ok_or_else(|| {
            AdapterError::ProtocolViolation("render reply lacks string field `labels_pgm_b64`".into())
        })?;
        let bytes = BASE64
            .decode(encoded)
            .map_err(|e| AdapterError::ProtocolViolation(format!("labels_pgm_b64 is not base64: {e}")))?;
        decode_labelmap(&bytes).map_err(|e| match e {
            LabelMapError::IllegalClassValue { .. } => AdapterError::IllegalClassValue(e),
            other => AdapterError::ProtocolViolation(format!("malformed label map: {other}")),
        })
    }

    fn request(&mut self, req: &Value) -> Result<Value, AdapterError> {
        if self.dead {
            return Err(self.crashed("worker is no longer running"));
        }
        let line = req.to_string();
        debug!("-> {line}");
        let write = self
            .stdin
            .as_mut()
            .map(|stdin| writeln!(stdin, "{line}").and_then(|()| stdin.flush()));
        if let Some(Err(e)) = write {
            return Err(self.fail(format!("cannot write request: {e}")));
        }

        let deadline = Instant::now() + self.timeout;
        let reply = loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.replies.recv_timeout(remaining) {
                // Blank lines carry no reply.
                Ok(Ok(reply)) if reply.trim().is_empty() => continue,
                Ok(Ok(reply)) => break reply,
                Ok(Err(e)) => return Err(self.fail(format!("cannot read reply: {e}"))),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(self.fail("worker closed its output before replying".into()))
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(self.fail(format!("no reply within {:.1} s", self.timeout.as_secs_f64())))
                }
            }
        };
        debug!("<- {reply}");

        let value: Value = serde_json::from_str(&reply)
            .map_err(|e| AdapterError::ProtocolViolation(format!("reply is not JSON ({e}): {reply}")))?;
        match value.get("ok").and_then(Value::as_bool) {
            Some(true) => Ok(value),
            Some(false) => {
                let msg = value
                    .get("error")
                    .map(|e| e.as_str().map_or_else(|| e.to_string(), str::to_string))
                    .unwrap_or_else(|| "unspecified error".into());
                Err(AdapterError::WorkerError(msg))
            }
            None => Err(AdapterError::ProtocolViolation(format!(
                "reply lacks boolean field `ok`: {reply}"
            ))),
        }
    }

    /// Marks the worker dead, reaps it, and builds a crash error.
    fn fail(&mut self, detail: String) -> AdapterError {
        self.dead = true;
        self.stdin = None;
        let status = reap(&mut self.child, Duration::from_millis(500));
        // A grandchild may still hold stderr open, so only wait briefly.
        if let Some(t) = self.stderr_thread.take() {
            let deadline = Instant::now() + Duration::from_millis(500);
            while !t.is_finished() && Instant::now() < deadline {
                thread::sleep(Duration::from_millis(5));
            }
            if t.is_finished() {
                let _ = t.join();
            }
        }
        let detail = match status {
            Some(s) => format!("{detail} ({s})"),
            None => detail,
        };
        self.crashed(&detail)
    }

    fn crashed(&self, detail: &str) -> AdapterError {
        AdapterError::WorkerCrashed {
            detail: detail.to_string(),
            stderr: self.stderr_text(),
        }
    }

    /// The last lines the worker wrote to stderr.
    pub fn stderr_text(&self) -> String {
        let tail = self.stderr_tail.lock().unwrap_or_else(|e| e.into_inner());
        tail.iter().map(|l| format!("{l}\n")).collect()
    }

    /// Closes the worker's input and waits for it to exit.
    pub fn shutdown(mut self) -> Option<std::process::ExitStatus> {
        self.stdin = None;
        self.dead = true;
        reap(&mut self.child, Duration::from_secs(2))
    }
}

/// Waits up to `grace` for the child to exit, killing it afterwards.
fn reap(child: &mut Child, grace: Duration) -> Option<std::process::ExitStatus> {
    let deadline = Instant::now() + grace;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return Some(status),
            Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
            Ok(None) => {
                let _ = child.kill();
                return child.wait().ok();
            }
            Err(_) => return None,
        }
    }
}

impl Drop for WorkerHandle {
    fn drop(&mut self) {
        self.stdin = None;
        if let Ok(None) = self.child.try_wait() {
            reap(&mut self.child, Duration::from_secs(1));
        }
    }
}

impl FrameBackend for WorkerHandle {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor.clone()
    }

    fn sample_latent(&mut self, _rng: &mut dyn RngCore) -> Result<LatentCode, BackendError> {
        Ok(self.remote_sample()?)
    }

    fn render_labels(&mut self, z: &LatentCode) -> Result<LabelMap, BackendError> {
        Ok(self.remote_render(z)?)
    }
}
