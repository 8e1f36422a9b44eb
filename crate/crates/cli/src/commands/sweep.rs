//! Direction sweeps over a set of base latents.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use frameguard::fmt::sig9;
use frameguard::metric::MetricConfig;
use frameguard::sweeps::{linear_fit, sweep, DirectionSpec, LinearFit, Side, SweepResult};
use frameguard::{BackendDescriptor, LatentCode};
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::BackendSpec;
use crate::commands::{require_out, CommandConfig};
use crate::error::{CliError, CliResult};
use crate::output::{read_latents, OutputDir};
use crate::plot::{LineChart, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub backend: BackendSpec,
    pub canvas: (usize, usize),
    pub directions: Vec<PathBuf>,
    /// Explicit base latents; when absent, `num_bases` are sampled with `seed`.
    pub bases: Option<PathBuf>,
    pub num_bases: usize,
    pub seed: u64,
    pub weight: f64,
    pub jobs: usize,
    pub timeout_secs: f64,
}

pub fn run(cfg: &SweepConfig, out: Option<&Path>) -> CliResult<()> {
    let out = require_out(out, "sweep")?;
    let metric = MetricConfig::new(cfg.weight).map_err(CliError::input)?;
    if cfg.directions.is_empty() {
        return Err(CliError::input("no direction files given"));
    }
    let directions = cfg
        .directions
        .iter()
        .map(|p| DirectionSpec::load(p).map_err(CliError::input))
        .collect::<CliResult<Vec<_>>>()?;
    let mut seen = BTreeSet::new();
    for d in &directions {
        if !seen.insert(file_stem(d.name())) {
            return Err(CliError::input(format!("duplicate direction name {:?}", d.name())));
        }
    }

    let timeout = Duration::from_secs_f64(cfg.timeout_secs);
    let mut backend = cfg.backend.open(cfg.canvas, timeout)?;
    let descriptor = backend.descriptor();
    let bases = match &cfg.bases {
        Some(path) => read_latents(path)?,
        None => {
            if cfg.num_bases == 0 {
                return Err(CliError::input("--num-bases must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..cfg.num_bases)
                .map(|_| backend.sample_latent(&mut rng))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    for (i, z) in bases.iter().enumerate() {
        z.expect_dim(descriptor.latent_dim)
            .map_err(|e| CliError::input(format!("base latent {i}: {e}")))?;
    }

    let results = if cfg.jobs <= 1 {
        directions
            .iter()
            .map(|d| sweep(&mut backend, &bases, d, &metric).map_err(CliError::from))
            .collect::<CliResult<Vec<_>>>()?
    } else {
        drop(backend);
        run_parallel(cfg, &directions, &bases, &metric, timeout)?
    };

    write_outputs(cfg, out, &descriptor, &bases, &results)
}

/// Splits directions round-robin over `jobs` independent backends; results
/// come back in input order.
fn run_parallel(
    cfg: &SweepConfig,
    directions: &[DirectionSpec],
    bases: &[LatentCode],
    metric: &MetricConfig,
    timeout: Duration,
) -> CliResult<Vec<SweepResult>> {
    let jobs = cfg.jobs.min(directions.len()).max(1);
    let chunks: Vec<CliResult<Vec<(usize, SweepResult)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                s.spawn(move || {
                    let mut backend = cfg.backend.open(cfg.canvas, timeout)?;
                    directions
                        .iter()
                        .enumerate()
                        .skip(j)
                        .step_by(jobs)
                        .map(|(i, d)| Ok((i, sweep(&mut backend, bases, d, metric)?)))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Backend("sweep worker panicked".into()))))
            .collect()
    });
    let mut indexed = Vec::with_capacity(directions.len());
    for chunk in chunks {
        indexed.extend(chunk?);
    }
    indexed.sort_by_key(|(i, _)| *i);
    Ok(indexed.into_iter().map(|(_, r)| r).collect())
}

fn write_outputs(
    cfg: &SweepConfig,
    out: &Path,
    descriptor: &BackendDescriptor,
    bases: &[LatentCode],
    results: &[SweepResult],
) -> CliResult<()> {
    let mut dir = OutputDir::create(out)?;

    let mut long = Vec::new();
    let mut summary = Vec::new();
    long.extend_from_slice(format!("{}\n", SweepResult::LONG_HEADER).as_bytes());
    summary.extend_from_slice(format!("{}\n", SweepResult::SUMMARY_HEADER).as_bytes());
    for r in results {
        r.write_long_rows(&mut long).expect("in-memory write");
        r.write_summary_rows(&mut summary).expect("in-memory write");
    }
    dir.write("sweep_long.csv", long)?;
    dir.write("sweep_summary.csv", summary)?;

    let mut fits_csv = String::from("direction,side,slope,intercept,r2\n");
    let mut fits_txt = format!("{:<20} {:<9} {:>12} {:>12} {:>8}\n", "direction", "side", "slope", "intercept", "r2");
    for r in results {
        for side in [Side::Negative, Side::Positive] {
            match linear_fit(r, side) {
                Ok(LinearFit { slope, intercept, r2, .. }) => {
                    let _ = writeln!(fits_csv, "{},{side},{},{},{}", r.direction, sig9(slope), sig9(intercept), sig9(r2));
                    let _ = writeln!(
                        fits_txt,
                        "{:<20} {:<9} {:>12.6} {:>12.6} {:>8.4}",
                        r.direction, side, slope, intercept, r2
                    );
                }
                Err(e) => warn!("{}: {e}", r.direction),
            }
        }
    }
    dir.write("fits.csv", fits_csv)?;

    for r in results {
        dir.write(&format!("direction_{}.svg", file_stem(&r.direction)), direction_chart(r).render())?;
    }
    let mut means = LineChart::new("Mean face-frame variation by direction", "offset t", "mean variation (%)");
    for r in results {
        means = means.with_series(Series::new(&r.direction, r.rows.iter().map(|row| (row.t, row.mean.percent())).collect()));
    }
    dir.write("means.svg", means.render())?;
    dir.write("bases.json", serde_json::to_string_pretty(bases).expect("latents serialise") + "\n")?;
    dir.finish(CommandConfig::Sweep(cfg.clone()), Some(descriptor.clone()))?;

    print!("{fits_txt}");
    Ok(())
}

fn direction_chart(r: &SweepResult) -> LineChart {
    let mut chart = LineChart::new(format!("Direction: {}", r.direction), "offset t", "variation (%)");
    for i in 0..r.base_count {
        let pts = r.rows.iter().map(|row| (row.t, row.variations[i].percent())).collect();
        chart = chart.with_series(Series::new(format!("base {i}"), pts));
    }
    chart.with_series(Series::new("mean", r.rows.iter().map(|row| (row.t, row.mean.percent())).collect()))
}

/// Direction name made safe for a file name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
