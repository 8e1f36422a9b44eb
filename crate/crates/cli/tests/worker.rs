//! The worker transport exercised against the bundled mock worker.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use frameguard::adapter::{handshake, AdapterError, WorkerConfig, WorkerHandle};
use frameguard::genspace::{blobface_render, blobface_sample};
use frameguard::{
    correct, decode_labelmap, BackendDescriptor, BackendError, Blobface, CorrectionConfig, FrameBackend, LabelMap,
    LatentCode, MetricConfig,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mock(extra: &[&str]) -> Vec<String> {
    let mut cmd = vec![env!("CARGO_BIN_EXE_frameguard-mock-worker").to_string()];
    cmd.extend(extra.iter().map(|s| s.to_string()));
    cmd
}

fn start(extra: &[&str]) -> WorkerHandle {
    handshake(&mock(extra), &WorkerConfig::default()).expect("handshake with mock worker")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/blobface")
}

#[test]
fn handshake_reports_descriptor() {
    let w = start(&[]);
    assert_eq!(w.descriptor().latent_dim, 8);
    assert_eq!(w.descriptor().name, "mock-blobface");
    let w = start(&["--latent-dim", "5"]);
    assert_eq!(w.descriptor().latent_dim, 5);
    assert!(w.shutdown().is_some_and(|s| s.success()));
}

#[test]
fn remote_renders_match_golden_fixtures() {
    let mut w = start(&[]);
    let latents: Vec<Vec<f64>> =
        serde_json::from_str(&fs::read_to_string(golden_dir().join("pinned_latents.json")).unwrap()).unwrap();
    assert_eq!(latents.len(), 20);
    for (i, z) in latents.into_iter().enumerate() {
        let z = LatentCode::new(z).unwrap();
        let golden = decode_labelmap(&fs::read(golden_dir().join(format!("pinned_{i:02}.pgm"))).unwrap()).unwrap();
        let first = w.remote_render(&z).unwrap();
        let second = w.remote_render(&z).unwrap();
        assert_eq!(first, golden, "latent {i}");
        assert_eq!(first, second, "latent {i} repeat");
    }
    let zero = decode_labelmap(&fs::read(golden_dir().join("zero_64x64.pgm")).unwrap()).unwrap();
    assert_eq!(w.remote_render(&LatentCode::zeros(8)).unwrap(), zero);
}

#[test]
fn seeded_samples_are_reproducible() {
    let draw = |seed: &str| {
        let mut w = start(&["--seed", seed]);
        (0..100).map(|_| w.remote_sample().unwrap()).collect::<Vec<_>>()
    };
    let a = draw("9");
    assert_eq!(a, draw("9"));
    assert_ne!(a, draw("10"));
    // The mock draws from the same prior as the in-process sampler.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let local: Vec<_> = (0..100).map(|_| blobface_sample(&mut rng)).collect();
    assert_eq!(a, local);
}

#[test]
fn crash_mid_session_is_reported() {
    let mut w = start(&["--crash-after", "3"]);
    for _ in 0..3 {
        w.remote_sample().unwrap();
    }
    match w.remote_sample() {
        Err(AdapterError::WorkerCrashed { stderr, .. }) => assert!(stderr.contains("simulated crash"), "{stderr}"),
        other => panic!("expected WorkerCrashed, got {other:?}"),
    }
    assert!(!w.is_alive());
    // Every later request fails fast instead of hanging.
    assert!(w.remote_sample().is_err());
}

#[test]
fn wrong_dimension_is_rejected_before_sending() {
    let mut w = start(&[]);
    let r = w.remote_render(&LatentCode::zeros(3));
    assert!(matches!(r, Err(AdapterError::Latent(_))), "{r:?}");
    // The worker is still usable.
    assert!(w.remote_render(&LatentCode::zeros(8)).is_ok());
}

#[test]
fn worker_survives_malformed_requests() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_frameguard-mock-worker"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut stdout = BufReader::new(child.stdout.take().unwrap());
    let junk = [
        "{",
        "[]",
        "42",
        "\"hello\"",
        r#"{"cmd": 7}"#,
        r#"{"cmd": "render"}"#,
        r#"{"cmd": "render", "latent": "zeros"}"#,
        r#"{"cmd": "render", "latent": [1, 2]}"#,
        r#"{"cmd": "fly"}"#,
        r#"{"cmd": "hello", "protocol": 99}"#,
    ];
    for line in junk {
        writeln!(stdin, "{line}").unwrap();
        let mut reply = String::new();
        stdout.read_line(&mut reply).unwrap();
        let v: serde_json::Value = serde_json::from_str(&reply).unwrap();
        assert_eq!(v["ok"], false, "{line} -> {reply}");
        assert!(v["error"].is_string());
    }
    writeln!(stdin, r#"{{"cmd": "sample"}}"#).unwrap();
    let mut reply = String::new();
    stdout.read_line(&mut reply).unwrap();
    let v: serde_json::Value = serde_json::from_str(&reply).unwrap();
    assert_eq!(v["ok"], true);
    drop(stdin);
    assert!(child.wait().unwrap().success());
}

/// In-process twin of the mock worker: same prior, same sampler stream.
struct Mirror {
    inner: Blobface,
    rng: ChaCha8Rng,
}

impl FrameBackend for Mirror {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: "mirror".into(),
            latent_dim: 8,
        }
    }

    fn sample_latent(&mut self, _rng: &mut dyn RngCore) -> Result<LatentCode, BackendError> {
        Ok(blobface_sample(&mut self.rng))
    }

    fn render_labels(&mut self, z: &LatentCode) -> Result<LabelMap, BackendError> {
        self.inner.render_labels(z)
    }
}

#[test]
fn correction_trace_is_backend_independent() {
    let target = blobface_render(&LatentCode::new(vec![0.3, -0.2, 0.1, 0.0, 0.2, 0.1, 0.0, 0.0]).unwrap(), 64, 64)
        .unwrap();
    let z0 = LatentCode::new(vec![0.6, -0.2, 0.1, 0.0, 0.2, 0.1, 0.0, 0.0]).unwrap();
    let cfg = CorrectionConfig {
        iterations: 60,
        std_samples: 200,
        seed: 5,
        ..CorrectionConfig::default()
    };
    let metric = MetricConfig::default();

    let mut worker = start(&["--seed", "21"]);
    let remote = correct(&target, &z0, &mut worker, &metric, &cfg).unwrap();
    let mut mirror = Mirror {
        inner: Blobface::default(),
        rng: ChaCha8Rng::seed_from_u64(21),
    };
    let local = correct(&target, &z0, &mut mirror, &metric, &cfg).unwrap();
    assert_eq!(remote, local);
}

#[test]
fn slow_worker_times_out() {
    let script = r#"read l; echo '{"ok":true,"name":"slow","latent_dim":2}'; read l; sleep 5"#;
    let cmd = vec!["sh".to_string(), "-c".to_string(), script.to_string()];
    let mut w = handshake(
        &cmd,
        &WorkerConfig {
            timeout: Duration::from_millis(300),
        },
    )
    .unwrap();
    let started = std::time::Instant::now();
    assert!(matches!(w.remote_sample(), Err(AdapterError::WorkerCrashed { .. })));
    assert!(started.elapsed() < Duration::from_secs(3));
}
