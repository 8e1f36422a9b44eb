//! Protocol worker backed by the in-process blobface renderer.
//!
//! Used to exercise the worker transport end to end. `--crash-after N`
//! makes it exit without replying to request N+1 (hello excluded).

use std::io::{self, BufRead, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use clap::Parser;
use frameguard::genspace::blobface_render;
use frameguard::{encode_labelmap, LatentCode};
use frameguard_cli::backend::parse_canvas;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "64x64", value_parser = parse_canvas)]
    canvas: (usize, usize),
    #[arg(long)]
    crash_after: Option<usize>,
}

fn main() {
    let args = Args::parse();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    let mut served = 0usize;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Value>(&line) {
            Ok(req) => {
                let cmd = req.get("cmd").and_then(Value::as_str).unwrap_or("");
                if cmd != "hello" {
                    if args.crash_after == Some(served) {
                        eprintln!("mock worker: simulated crash");
                        std::process::exit(101);
                    }
                    served += 1;
                }
                handle(&req, cmd, &args, &mut rng)
            }
            Err(e) => json!({"ok": false, "error": format!("invalid JSON: {e}")}),
        };
        if writeln!(stdout, "{reply}").and_then(|()| stdout.flush()).is_err() {
            break;
        }
    }
}

fn handle(req: &Value, cmd: &str, args: &Args, rng: &mut ChaCha8Rng) -> Value {
    match cmd {
        "hello" => match req.get("protocol").and_then(Value::as_u64) {
            Some(1) => json!({"ok": true, "name": "mock-blobface", "latent_dim": args.latent_dim, "protocol": 1}),
            _ => json!({"ok": false, "error": "unsupported protocol"}),
        },
        "sample" => {
            let z: Vec<f64> = (0..args.latent_dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
            json!({"ok": true, "latent": z})
        }
        "render" => {
            let values: Option<Vec<f64>> = req
                .get("latent")
                .and_then(Value::as_array)
                .and_then(|a| a.iter().map(Value::as_f64).collect());
            let Some(values) = values else {
                return json!({"ok": false, "error": "render needs a numeric `latent` array"});
            };
            let rendered = LatentCode::new(values)
                .map_err(|e| e.to_string())
                .and_then(|z| blobface_render(&z, args.canvas.0, args.canvas.1).map_err(|e| e.to_string()));
            match rendered {
                Ok(map) => json!({"ok": true, "labels_pgm_b64": BASE64.encode(encode_labelmap(&map))}),
                Err(e) => json!({"ok": false, "error": e}),
            }
        }
        other => json!({"ok": false, "error": format!("unknown command {other:?}")}),
    }
}
