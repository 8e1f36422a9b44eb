//! Backend selection from the command line: `blobface` or `worker:<cmd>`.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use frameguard::adapter::{handshake, WorkerConfig};
use frameguard::{Blobface, FrameBackend};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendSpec {
    Blobface,
    /// Worker command line, split on whitespace.
    Worker(Vec<String>),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "blobface" {
            return Ok(BackendSpec::Blobface);
        }
        if let Some(cmd) = s.strip_prefix("worker:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err("worker backend needs a command, e.g. worker:python3 worker.py".into());
            }
            return Ok(BackendSpec::Worker(argv));
        }
        Err(format!("unknown backend {s:?}; expected `blobface` or `worker:<command>`"))
    }
}

impl TryFrom<String> for BackendSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<BackendSpec> for String {
    fn from(b: BackendSpec) -> String {
        b.to_string()
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Blobface => f.write_str("blobface"),
            BackendSpec::Worker(argv) => write!(f, "worker:{}", argv.join(" ")),
        }
    }
}

impl BackendSpec {
    /// Builds a backend; `canvas` only applies to blobface.
    pub fn open(&self, canvas: (usize, usize), timeout: Duration) -> CliResult<Box<dyn FrameBackend + Send>> {
        match self {
            BackendSpec::Blobface => {
                let b = Blobface::new(canvas.0, canvas.1).map_err(CliError::input)?;
                Ok(Box::new(b))
            }
            BackendSpec::Worker(argv) => {
                let h = handshake(argv, &WorkerConfig { timeout }).map_err(|e| CliError::Backend(e.to_string()))?;
                Ok(Box::new(h))
            }
        }
    }
}

/// Parses `WxH`.
pub fn parse_canvas(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("canvas must look like 64x64, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad canvas {s:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!("blobface".parse::<BackendSpec>().unwrap(), BackendSpec::Blobface);
        assert_eq!(
            "worker:python3  w.py --seed 3".parse::<BackendSpec>().unwrap(),
            BackendSpec::Worker(vec!["python3".into(), "w.py".into(), "--seed".into(), "3".into()])
        );
        assert!("worker:".parse::<BackendSpec>().is_err());
        assert!("stylegan".parse::<BackendSpec>().is_err());
        let spec = BackendSpec::Worker(vec!["a".into(), "b".into()]);
        assert_eq!(spec.to_string().parse::<BackendSpec>().unwrap(), spec);
    }

    #[test]
    fn parses_canvas() {
        assert_eq!(parse_canvas("64x48"), Ok((64, 48)));
        assert!(parse_canvas("64").is_err());
        assert!(parse_canvas("axb").is_err());
    }
}
