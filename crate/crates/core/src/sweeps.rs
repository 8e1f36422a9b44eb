//! Latent-direction sweeps.
//!
//! For each base latent `z` and offset `t`, a sweep measures the face-frame
//! variation between `render(z)` and `render(z + t * direction)`. Offsets are
//! evenly spaced over the direction's range, endpoints included, with 0
//! inserted when the range straddles it.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt::sig9;
use crate::genspace::{BackendError, FrameBackend, LatentCode, LatentError};
use crate::metric::{frame_variation, MetricConfig, MetricError, Variation};

pub const DEFAULT_BASE_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("cannot read direction file {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("cannot parse direction file {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("no base latents given")]
    NoBases,
    #[error("linear fit needs at least 3 offsets on the {side} side, got {found}")]
    InsufficientPoints { side: Side, found: usize },
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// A named latent direction with the offset range to sweep.
///
/// On disk: `{"name": ..., "range": [min, max], "steps": n, "vector": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DirectionFile", into = "DirectionFile")]
pub struct DirectionSpec {
    name: String,
    vector: LatentCode,
    range_min: f64,
    range_max: f64,
    steps: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectionFile {
    name: String,
    range: [f64; 2],
    steps: usize,
    vector: Vec<f64>,
}

impl TryFrom<DirectionFile> for DirectionSpec {
    type Error = SweepError;

    fn try_from(f: DirectionFile) -> Result<Self, SweepError> {
        let vector = LatentCode::new(f.vector)?;
        DirectionSpec::new(f.name, vector, f.range[0], f.range[1], f.steps)
    }
}

impl From<DirectionSpec> for DirectionFile {
    fn from(d: DirectionSpec) -> Self {
        DirectionFile {
            name: d.name,
            range: [d.range_min, d.range_max],
            steps: d.steps,
            vector: d.vector.into_values(),
        }
    }
}

impl DirectionSpec {
    pub fn new(
        name: impl Into<String>,
        vector: LatentCode,
        range_min: f64,
        range_max: f64,
        steps: usize,
    ) -> Result<Self, SweepError> {
        let name = name.into();
        let bad = |m: String| Err(SweepError::InvalidDirection(m));
        if name.is_empty() {
            return bad("name must not be empty".into());
        }
        if !(range_min.is_finite() && range_max.is_finite() && range_min < range_max) {
            return bad(format!("{name}: range must satisfy min < max, got [{range_min}, {range_max}]"));
        }
        if steps < 2 {
            return bad(format!("{name}: steps must be at least 2, got {steps}"));
        }
        if vector.values().iter().all(|&v| v == 0.0) {
            return bad(format!("{name}: direction vector is zero"));
        }
        Ok(Self {
            name,
            vector,
            range_min,
            range_max,
            steps,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path).map_err(|source| SweepError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| SweepError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("direction serialises")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vector(&self) -> &LatentCode {
        &self.vector
    }

    pub fn range(&self) -> (f64, f64) {
        (self.range_min, self.range_max)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn with_steps(&self, steps: usize) -> Result<Self, SweepError> {
        Self::new(self.name.clone(), self.vector.clone(), self.range_min, self.range_max, steps)
    }

    /// The sweep grid: `steps` evenly spaced offsets including both
    /// endpoints, plus 0 when the range contains it, in ascending order.
    ///
    /// Interior points are `(min * (n - k) + max * k) / n`, which makes
    /// symmetric ranges produce grids that are exact negatives of each other
    /// and makes a `2 * steps - 1` grid contain the `steps` grid bit for bit.
    pub fn offsets(&self) -> Vec<f64> {
        let n = (self.steps - 1) as f64;
        let mut grid: Vec<f64> = (0..self.steps)
            .map(|k| {
                if k == 0 {
                    self.range_min
                } else if k == self.steps - 1 {
                    self.range_max
                } else {
                    let k = k as f64;
                    (self.range_min * (n - k) + self.range_max * k) / n
                }
            })
            .collect();
        if self.range_min <= 0.0 && 0.0 <= self.range_max && !grid.contains(&0.0) {
            grid.push(0.0);
            grid.sort_by(f64::total_cmp);
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    /// One entry per base latent, in base order.
    pub variations: Vec<Variation>,
    pub mean: Variation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub direction: String,
    pub base_count: usize,
    pub rows: Vec<SweepRow>,
}

/// Which half of the offset axis a linear fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Negative,
    Positive,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Negative => "negative",
            Side::Positive => "positive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Measures variation along `dir` from every base latent.
pub fn sweep<B: FrameBackend + ?Sized>(
    backend: &mut B,
    bases: &[LatentCode],
    dir: &DirectionSpec,
    metric_cfg: &MetricConfig,
) -> Result<SweepResult, SweepError> {
    if bases.is_empty() {
        return Err(SweepError::NoBases);
    }
    let dim = backend.descriptor().latent_dim;
    dir.vector.expect_dim(dim)?;
    for z in bases {
        z.expect_dim(dim)?;
    }

    let offsets = dir.offsets();
    let mut columns: Vec<Vec<Variation>> = Vec::with_capacity(bases.len());
    for z in bases {
        let reference = backend.render_labels(z)?;
        let mut column = Vec::with_capacity(offsets.len());
        for &t in &offsets {
            let moved = backend.render_labels(&z.offset(&dir.vector, t)?)?;
            column.push(frame_variation(&reference, &moved, metric_cfg)?);
        }
        columns.push(column);
    }

    let rows = offsets
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let variations: Vec<Variation> = columns.iter().map(|c| c[j]).collect();
            let mean = mean_variation(&variations);
            SweepRow { t, variations, mean }
        })
        .collect();
    Ok(SweepResult {
        direction: dir.name.clone(),
        base_count: bases.len(),
        rows,
    })
}

/// Arithmetic mean; summed in sorted order so it does not depend on the
/// order of the bases.
fn mean_variation(values: &[Variation]) -> Variation {
    let mut sorted: Vec<f64> = values.iter().map(|v| v.value()).collect();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Variation::from_fraction(mean.clamp(0.0, 1.0))
}

/// Ordinary least squares of mean variation against `|t|` over the offsets
/// on one side of 0; the `t = 0` anchor belongs to both sides.
///
/// When all means are equal the fit is exact and `r2` is 1.
pub fn linear_fit(result: &SweepResult, side: Side) -> Result<LinearFit, SweepError> {
    let points: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter(|r| match side {
            Side::Negative => r.t <= 0.0,
            Side::Positive => r.t >= 0.0,
        })
        .map(|r| (r.t.abs(), r.mean.value()))
        .collect();
    if points.len() < 3 {
        return Err(SweepError::InsufficientPoints {
            side,
            found: points.len(),
        });
    }
    let first = points[0].1;
    if points.iter().all(|p| p.1 == first) {
        return Ok(LinearFit {
            slope: 0.0,
            intercept: first,
            r2: 1.0,
            points: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r2 = (1.0 - ss_res / syy).clamp(0.0, 1.0);
    Ok(LinearFit {
        slope,
        intercept,
        r2,
        points: points.len(),
    })
}

impl SweepResult {
    pub const LONG_HEADER: &'static str = "direction,t,seed_index,variation";
    pub const SUMMARY_HEADER: &'static str = "direction,t,mean";

    pub fn write_long_rows<W: Write>(&self, mut out: W) -> io::Result<()> {
        for row in &self.rows {
            for (i, v) in row.variations.iter().enumerate() {
                writeln!(out, "{},{},{},{}", self.direction, sig9(row.t), i, sig9(v.value()))?;
            }
        }
        Ok(())
    }

    pub fn write_summary_rows<W: Write>(&self, mut out: W) -> io::Result<()> {
        for row in &self.rows {
            writeln!(out, "{},{},{}", self.direction, sig9(row.t), sig9(row.mean.value()))?;
        }
        Ok(())
    }

    /// Long-form CSV, header included.
    pub fn write_long_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::LONG_HEADER)?;
        self.write_long_rows(out)
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::SUMMARY_HEADER)?;
        self.write_summary_rows(out)
    }

    pub fn row_at(&self, t: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.t == t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genspace::{blobface_sample, Blobface};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bases(seed: u64, n: usize) -> Vec<LatentCode> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| blobface_sample(&mut rng)).collect()
    }

    fn axis(name: &str, k: usize, min: f64, max: f64, steps: usize) -> DirectionSpec {
        DirectionSpec::new(name, LatentCode::basis(8, k), min, max, steps).unwrap()
    }

    fn synthetic(means: &[(f64, f64)]) -> SweepResult {
        SweepResult {
            direction: "synthetic".into(),
            base_count: 1,
            rows: means
                .iter()
                .map(|&(t, m)| SweepRow {
                    t,
                    variations: vec![Variation::from_fraction(m)],
                    mean: Variation::from_fraction(m),
                })
                .collect(),
        }
    }

    #[test]
    fn direction_validation() {
        let v = LatentCode::basis(8, 0);
        assert!(DirectionSpec::new("a", v.clone(), 1.0, 1.0, 5).is_err());
        assert!(DirectionSpec::new("a", v.clone(), -1.0, 1.0, 1).is_err());
        assert!(DirectionSpec::new("", v.clone(), -1.0, 1.0, 3).is_err());
        assert!(DirectionSpec::new("a", LatentCode::zeros(8), -1.0, 1.0, 3).is_err());
        assert!(DirectionSpec::new("a", v, -1.0, 1.0, 2).is_ok());
    }

    #[test]
    fn direction_json() {
        let text = r#"{"name":"age","range":[-3,3],"steps":7,"vector":[0,1,0,0,0,0,0,0]}"#;
        let d: DirectionSpec = serde_json::from_str(text).unwrap();
        assert_eq!(d.name(), "age");
        assert_eq!(d.range(), (-3.0, 3.0));
        assert_eq!(d.offsets(), vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let back: DirectionSpec = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(back, d);
        let bad = r#"{"name":"age","range":[3,-3],"steps":7,"vector":[1]}"#;
        assert!(serde_json::from_str::<DirectionSpec>(bad).is_err());
    }

    #[test]
    fn zero_inserted_when_off_grid() {
        let d = axis("x", 0, -1.0, 2.0, 4);
        assert_eq!(d.offsets(), vec![-1.0, 0.0, 1.0, 2.0]);
        let d = axis("x", 0, -1.0, 1.0, 4);
        let grid = d.offsets();
        assert_eq!(grid.len(), 5);
        assert!(grid.contains(&0.0));
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let d = axis("x", 0, 0.5, 1.5, 3);
        assert_eq!(d.offsets(), vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn sweep_anchors() {
        let mut backend = Blobface::default();
        let b = bases(1, 6);
        let cfg = MetricConfig::default();
        let res = sweep(&mut backend, &b, &axis("x", 0, -1.0, 1.0, 11), &cfg).unwrap();
        assert_eq!(res.row_at(0.0).unwrap().variations, vec![Variation::ZERO; 6]);

        let noop = sweep(&mut backend, &b, &axis("noop", 7, -3.0, 3.0, 7), &cfg).unwrap();
        for row in &noop.rows {
            assert!(row.variations.iter().all(|v| v.value() == 0.0));
        }
        let fit = linear_fit(&noop, Side::Positive).unwrap();
        assert_eq!((fit.slope, fit.r2), (0.0, 1.0));
    }

    #[test]
    fn translation_is_monotone_and_linear() {
        let mut backend = Blobface::default();
        let b = bases(7, 10);
        let res = sweep(&mut backend, &b, &axis("x", 0, -1.0, 1.0, 21), &MetricConfig::default()).unwrap();
        let m = |t: f64| res.rows.iter().find(|r| (r.t - t).abs() < 1e-9).unwrap().mean.value();
        assert!(m(0.4) >= m(0.2));
        assert!(m(-0.4) >= m(-0.2));
        for side in [Side::Negative, Side::Positive] {
            let fit = linear_fit(&res, side).unwrap();
            assert!(fit.r2 >= 0.8, "{side}: {fit:?}");
            assert!(fit.slope > 0.0);
        }
    }

    #[test]
    fn errors() {
        let mut backend = Blobface::default();
        let cfg = MetricConfig::default();
        assert!(matches!(
            sweep(&mut backend, &[], &axis("x", 0, -1.0, 1.0, 3), &cfg),
            Err(SweepError::NoBases)
        ));
        let short = DirectionSpec::new("s", LatentCode::basis(4, 0), -1.0, 1.0, 3).unwrap();
        assert!(matches!(
            sweep(&mut backend, &bases(0, 2), &short, &cfg),
            Err(SweepError::Latent(LatentError::DimensionMismatch { .. }))
        ));
        let two = synthetic(&[(-1.0, 0.2), (0.0, 0.0), (1.0, 0.2)]);
        assert!(matches!(
            linear_fit(&two, Side::Positive),
            Err(SweepError::InsufficientPoints { found: 2, .. })
        ));
    }

    #[test]
    fn exact_line_fits_perfectly() {
        let res = synthetic(&[(0.0, 0.01), (0.5, 0.035), (1.0, 0.06), (1.5, 0.085)]);
        let fit = linear_fit(&res, Side::Positive).unwrap();
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.slope - 0.05).abs() < 1e-12);
        assert!((fit.intercept - 0.01).abs() < 1e-12);
        let flat = synthetic(&[(-2.0, 0.1), (-1.0, 0.1), (0.0, 0.1)]);
        let fit = linear_fit(&flat, Side::Negative).unwrap();
        assert_eq!((fit.slope, fit.r2), (0.0, 1.0));
    }

    #[test]
    fn csv_layout() {
        let res = synthetic(&[(-0.5, 0.25), (0.0, 0.0)]);
        let mut long = Vec::new();
        res.write_long_csv(&mut long).unwrap();
        assert_eq!(
            String::from_utf8(long).unwrap(),
            "direction,t,seed_index,variation\nsynthetic,-0.5,0,0.25\nsynthetic,0,0,0\n"
        );
        let mut summary = Vec::new();
        res.write_summary_csv(&mut summary).unwrap();
        assert_eq!(
            String::from_utf8(summary).unwrap(),
            "direction,t,mean\nsynthetic,-0.5,0.25\nsynthetic,0,0\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn symmetric_ranges_give_symmetric_grids(r in 0.01f64..10.0, steps in 2usize..40) {
            let g = axis("s", 0, -r, r, steps).offsets();
            let n = g.len();
            for k in 0..n {
                prop_assert_eq!(g[k], -g[n - 1 - k]);
            }
        }

        #[test]
        fn refined_grid_contains_original(min in -5.0f64..0.0, width in 0.1f64..10.0, steps in 2usize..30) {
            let d = axis("s", 0, min, min + width, steps);
            let fine = d.with_steps(2 * steps - 1).unwrap().offsets();
            for t in d.offsets() {
                prop_assert!(fine.contains(&t), "{} missing", t);
            }
        }
    }

    #[test]
    fn refinement_reproduces_variations() {
        let mut backend = Blobface::new(48, 48).unwrap();
        let b = bases(3, 3);
        let cfg = MetricConfig::default();
        let d = axis("y", 1, -0.9, 0.6, 6);
        let coarse = sweep(&mut backend, &b, &d, &cfg).unwrap();
        let fine = sweep(&mut backend, &b, &d.with_steps(11).unwrap(), &cfg).unwrap();
        for row in &coarse.rows {
            assert_eq!(fine.row_at(row.t).unwrap(), row);
        }
    }

    #[test]
    fn mean_ignores_base_order() {
        let mut backend = Blobface::new(48, 48).unwrap();
        let cfg = MetricConfig::default();
        let d = axis("w", 2, -2.0, 2.0, 5);
        let b = bases(9, 7);
        let mut rev = b.clone();
        rev.reverse();
        rev.swap(0, 3);
        let a = sweep(&mut backend, &b, &d, &cfg).unwrap();
        let c = sweep(&mut backend, &rev, &d, &cfg).unwrap();
        for (x, y) in a.rows.iter().zip(&c.rows) {
            assert_eq!(x.mean, y.mean);
        }
    }
}
