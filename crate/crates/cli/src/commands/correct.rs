use std::path::{Path, PathBuf};
use std::time::Duration;

use frameguard::correction::{correct, CorrectionConfig, CorrectionTrace};
use frameguard::metric::MetricConfig;
use serde::{Deserialize, Serialize};

use crate::backend::BackendSpec;
use crate::commands::{require_out, CommandConfig};
use crate::error::{CliError, CliResult};
use crate::output::{latent_json, read_labelmap, read_latent, OutputDir};
use crate::plot::{LineChart, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectConfig {
    pub target: PathBuf,
    pub latent: PathBuf,
    pub backend: BackendSpec,
    pub weight: f64,
    pub correction: CorrectionConfig,
    pub timeout_secs: f64,
}

pub fn run(cfg: &CorrectConfig, out: Option<&Path>) -> CliResult<()> {
    let out = require_out(out, "correct")?;
    let metric = MetricConfig::new(cfg.weight).map_err(CliError::input)?;
    cfg.correction.validate().map_err(CliError::input)?;
    let target = read_labelmap(&cfg.target)?;
    let z0 = read_latent(&cfg.latent)?;

    // blobface renders at the target's size
    let mut backend = cfg
        .backend
        .open(target.dims(), Duration::from_secs_f64(cfg.timeout_secs))?;
    let descriptor = backend.descriptor();
    z0.expect_dim(descriptor.latent_dim).map_err(|e| CliError::io(&cfg.latent, e))?;

    let trace = correct(&target, &z0, &mut backend, &metric, &cfg.correction)?;

    let mut dir = OutputDir::create(out)?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).expect("in-memory write");
    dir.write("trace.csv", csv)?;
    dir.write("latent.json", latent_json(&trace.final_latent))?;
    dir.write("correction_absolute.svg", absolute_chart(&trace).render())?;
    dir.write("correction_normalized.svg", normalized_chart(&trace).render())?;
    dir.finish(CommandConfig::Correct(cfg.clone()), Some(descriptor.clone()))?;

    println!("backend: {} (latent_dim {})", descriptor.name, descriptor.latent_dim);
    println!("latent std: {:.6}", trace.l_std.value());
    println!("initial variation: {}", trace.initial_variation);
    println!(
        "final variation: {} after {} iterations ({} accepted)",
        trace.final_variation,
        trace.records.len(),
        trace.accepted_count()
    );
    println!("relative to initial: {:.3}", trace.relative_final());
    println!("outputs: {}", dir_display(out));
    Ok(())
}

fn dir_display(p: &Path) -> String {
    p.display().to_string()
}

fn best_curve(trace: &CorrectionTrace, scale: f64) -> Vec<(f64, f64)> {
    std::iter::once((0.0, trace.initial_variation.value()))
        .chain(trace.records.iter().map(|r| (r.iteration as f64, r.best_variation.value())))
        .map(|(i, v)| (i, v * scale))
        .collect()
}

fn absolute_chart(trace: &CorrectionTrace) -> LineChart {
    LineChart::new("Face-frame variation during correction", "iteration", "variation (%)")
        .with_series(Series::new("best", best_curve(trace, 100.0)))
}

fn normalized_chart(trace: &CorrectionTrace) -> LineChart {
    let initial = trace.initial_variation.value();
    let scale = if initial > 0.0 { 1.0 / initial } else { 0.0 };
    let mut points = best_curve(trace, scale);
    if initial == 0.0 {
        points.iter_mut().for_each(|p| p.1 = 1.0);
    }
    LineChart::new("Normalized face-frame variation", "iteration", "variation / initial")
        .with_series(Series::new("best", points))
}
