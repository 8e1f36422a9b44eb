//! Face-frame correction of a projected latent code.
//!
//! Starting from a latent code whose rendering should match a target label
//! map, the corrector repeatedly adds isotropic Gaussian noise scaled by a
//! decaying strength schedule and keeps a candidate only when it strictly
//! lowers the face-frame variation against the target.
//!
//! The schedule is
//!
//! ```text
//! strength(i) = l_std * noise_0 * (max(0, 1 - i / span) / nrl)^2
//! ```
//!
//! where `l_std` is the pooled standard deviation of latents sampled from the
//! backend. One seeded generator drives the std estimate first and then the
//! iteration loop, so a run is fully determined by its inputs and seed.

use std::io::{self, Write};

use log::warn;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt::sig9;
use crate::genspace::{BackendError, FrameBackend, LatentCode, LatentError};
use crate::labelmap::LabelMap;
use crate::metric::{frame_variation, MetricConfig, MetricError, Variation};

#[derive(Debug, Error)]
pub enum CorrectionError {
    #[error("invalid correction config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl CorrectionError {
    fn dims(expected: (usize, usize), actual: (usize, usize)) -> Self {
        CorrectionError::Metric(MetricError::DimensionMismatch {
            a_width: expected.0,
            a_height: expected.1,
            b_width: actual.0,
            b_height: actual.1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub noise_0: f64,
    pub nrl: f64,
    pub schedule_span: u64,
    pub iterations: u64,
    pub std_samples: usize,
    pub seed: u64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            noise_0: 0.005,
            nrl: 0.75,
            schedule_span: 10_000,
            iterations: 750,
            std_samples: 10_000,
            seed: 0,
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<(), CorrectionError> {
        let bad = |msg: String| Err(CorrectionError::InvalidConfig(msg));
        if !(self.noise_0 > 0.0 && self.noise_0.is_finite()) {
            return bad(format!("noise_0 must be positive, got {}", self.noise_0));
        }
        if !(self.nrl > 0.0 && self.nrl.is_finite()) {
            return bad(format!("nrl must be positive, got {}", self.nrl));
        }
        if self.schedule_span == 0 {
            return bad("schedule_span must be positive".into());
        }
        if self.std_samples < 2 {
            return bad(format!("std_samples must be at least 2, got {}", self.std_samples));
        }
        Ok(())
    }
}

/// Pooled standard deviation of sampled latent codes.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentStd(f64);

impl LatentStd {
    pub fn new(value: f64) -> Option<Self> {
        (value >= 0.0 && value.is_finite()).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when every sample was identical.
    pub fn is_degenerate(self) -> bool {
        self.0 == 0.0
    }
}

/// `sqrt( sum_k |z_k - mean|^2 / (N * D) )` over `samples` draws.
///
/// A degenerate backend (all samples equal) yields 0 and a warning.
pub fn estimate_latent_std<B: FrameBackend + ?Sized>(
    backend: &mut B,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<LatentStd, CorrectionError> {
    if samples < 2 {
        return Err(CorrectionError::InvalidConfig(format!(
            "std estimation needs at least 2 samples, got {samples}"
        )));
    }
    let dim = backend.descriptor().latent_dim;
    let mut draws = Vec::with_capacity(samples);
    for _ in 0..samples {
        let z = backend.sample_latent(rng)?;
        z.expect_dim(dim)?;
        draws.push(z);
    }
    let mut mean = vec![0.0; dim];
    for z in &draws {
        for (m, v) in mean.iter_mut().zip(z.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= samples as f64);
    let sum_sq: f64 = draws
        .iter()
        .flat_map(|z| z.values().iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)))
        .sum();
    let std = (sum_sq / (samples * dim) as f64).sqrt();
    if std == 0.0 {
        warn!("degenerate backend: all {samples} sampled latents are identical, noise strength is 0");
    }
    Ok(LatentStd(std))
}

/// Noise strength at iteration `i`; zero from `schedule_span` onwards.
pub fn strength(i: u64, l_std: LatentStd, cfg: &CorrectionConfig) -> f64 {
    let ramp = (1.0 - i as f64 / cfg.schedule_span as f64).max(0.0);
    let scaled = ramp / cfg.nrl;
    l_std.0 * cfg.noise_0 * scaled * scaled
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub strength: f64,
    pub candidate_variation: Variation,
    pub accepted: bool,
    /// Incumbent variation after this iteration.
    pub best_variation: Variation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTrace {
    pub l_std: LatentStd,
    pub initial_variation: Variation,
    pub records: Vec<IterationRecord>,
    pub final_latent: LatentCode,
    pub final_variation: Variation,
}

impl CorrectionTrace {
    pub fn accepted_count(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }

    /// Best-so-far variation after `iterations` iterations (0 = initial).
    pub fn best_after(&self, iterations: usize) -> Variation {
        match iterations {
            0 => self.initial_variation,
            n => self
                .records
                .get(n - 1)
                .or(self.records.last())
                .map_or(self.initial_variation, |r| r.best_variation),
        }
    }

    /// `final / initial`, or 1 when the initial variation is already 0.
    pub fn relative_final(&self) -> f64 {
        if self.initial_variation.value() == 0.0 {
            1.0
        } else {
            self.final_variation.value() / self.initial_variation.value()
        }
    }

    pub const CSV_HEADER: &'static str = "iteration,strength,candidate_variation,accepted,best_variation";

    /// Writes one CSV row per iteration, floats with 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration,
                sig9(r.strength),
                sig9(r.candidate_variation.value()),
                r.accepted,
                sig9(r.best_variation.value())
            )?;
        }
        Ok(())
    }
}

/// Runs the full correction: std estimate, then `cfg.iterations` noisy steps.
pub fn correct<B: FrameBackend + ?Sized>(
    target: &LabelMap,
    z0: &LatentCode,
    backend: &mut B,
    metric_cfg: &MetricConfig,
    cfg: &CorrectionConfig,
) -> Result<CorrectionTrace, CorrectionError> {
    cfg.validate()?;
    z0.expect_dim(backend.descriptor().latent_dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l_std = estimate_latent_std(backend, cfg.std_samples, &mut rng)?;
    correct_with_std(target, z0, backend, metric_cfg, cfg, l_std, &mut rng)
}

/// The iteration loop alone, for callers that already know `l_std`.
pub fn correct_with_std<B: FrameBackend + ?Sized>(
    target: &LabelMap,
    z0: &LatentCode,
    backend: &mut B,
    metric_cfg: &MetricConfig,
    cfg: &CorrectionConfig,
    l_std: LatentStd,
    rng: &mut dyn RngCore,
) -> Result<CorrectionTrace, CorrectionError> {
    cfg.validate()?;
    z0.expect_dim(backend.descriptor().latent_dim)?;
    if cfg.iterations > cfg.schedule_span {
        warn!(
            "{} iterations exceed the schedule span {}; strength is 0 past the span",
            cfg.iterations, cfg.schedule_span
        );
    }

    let initial_map = backend.render_labels(z0)?;
    if initial_map.dims() != target.dims() {
        return Err(CorrectionError::dims(target.dims(), initial_map.dims()));
    }
    let initial_variation = frame_variation(target, &initial_map, metric_cfg)?;

    let mut current = z0.clone();
    let mut best = initial_variation;
    let mut records = Vec::with_capacity(cfg.iterations as usize);
    for i in 1..=cfg.iterations {
        let s = strength(i, l_std, cfg);
        let candidate = perturb(&current, s, rng)?;
        let map = backend.render_labels(&candidate)?;
        if map.dims() != target.dims() {
            return Err(CorrectionError::dims(target.dims(), map.dims()));
        }
        let v = frame_variation(target, &map, metric_cfg)?;
        let accepted = v < best;
        if accepted {
            best = v;
            current = candidate;
        }
        records.push(IterationRecord {
            iteration: i,
            strength: s,
            candidate_variation: v,
            accepted,
            best_variation: best,
        });
    }

    Ok(CorrectionTrace {
        l_std,
        initial_variation,
        records,
        final_latent: current,
        final_variation: best,
    })
}

fn perturb(z: &LatentCode, strength: f64, rng: &mut dyn RngCore) -> Result<LatentCode, LatentError> {
    let values = z
        .values()
        .iter()
        .map(|v| {
            let eps: f64 = StandardNormal.sample(&mut *rng);
            v + eps * strength
        })
        .collect();
    LatentCode::new(values)
}
