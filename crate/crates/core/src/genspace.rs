//! Latent codes, the generator+segmenter backend contract, and `Blobface`,
//! a deterministic synthetic backend.
//!
//! A backend turns a latent code straight into a label map. Real stacks
//! (a GAN followed by a face segmenter) live behind the worker protocol in
//! [`crate::adapter`]; `Blobface` exists so every algorithm in this crate can
//! be exercised in-process.

use std::ops::{Add, Sub};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labelmap::{LabelMap, PixelClass};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatentError {
    #[error("latent code must have at least one component")]
    Empty,
    #[error("latent component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("latent dimension {actual} does not match expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// A point in a generator's latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LatentCode(Vec<f64>);

impl LatentCode {
    pub fn new(values: Vec<f64>) -> Result<Self, LatentError> {
        if values.is_empty() {
            return Err(LatentError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LatentError::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "latent dimension must be positive");
        Self(vec![0.0; dim])
    }

    /// The unit vector along axis `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        assert!(axis < dim, "axis {axis} out of range for dimension {dim}");
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self + t * direction`.
    pub fn offset(&self, direction: &LatentCode, t: f64) -> Result<LatentCode, LatentError> {
        self.expect_dim(direction.dim())?;
        let values = self
            .0
            .iter()
            .zip(&direction.0)
            .map(|(a, d)| a + t * d)
            .collect();
        LatentCode::new(values)
    }

    pub fn expect_dim(&self, expected: usize) -> Result<(), LatentError> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(LatentError::DimensionMismatch {
                expected,
                actual: self.dim(),
            })
        }
    }
}

impl TryFrom<Vec<f64>> for LatentCode {
    type Error = LatentError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        LatentCode::new(values)
    }
}

impl From<LatentCode> for Vec<f64> {
    fn from(z: LatentCode) -> Self {
        z.0
    }
}

impl Add for &LatentCode {
    type Output = LatentCode;

    fn add(self, rhs: &LatentCode) -> LatentCode {
        assert_eq!(self.dim(), rhs.dim(), "latent dimension mismatch");
        LatentCode(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatentCode {
    type Output = LatentCode;

    fn sub(self, rhs: &LatentCode) -> LatentCode {
        assert_eq!(self.dim(), rhs.dim(), "latent dimension mismatch");
        LatentCode(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub latent_dim: usize,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Worker(#[from] crate::adapter::AdapterError),
    #[error("backend failure: {0}")]
    Failure(String),
}

/// A latent-code-driven generator composed with a face segmenter.
///
/// `render_labels` must be deterministic: equal latents give equal maps.
pub trait FrameBackend {
    fn descriptor(&self) -> BackendDescriptor;

    /// Draws a latent code from the backend's realistic-latent distribution.
    ///
    /// In-process backends draw from `rng`; remote backends may use their
    /// own seeded generator and ignore it.
    fn sample_latent(&mut self, rng: &mut dyn RngCore) -> Result<LatentCode, BackendError>;

    fn render_labels(&mut self, z: &LatentCode) -> Result<LabelMap, BackendError>;
}

impl<B: FrameBackend + ?Sized> FrameBackend for &mut B {
    fn descriptor(&self) -> BackendDescriptor {
        (**self).descriptor()
    }

    fn sample_latent(&mut self, rng: &mut dyn RngCore) -> Result<LatentCode, BackendError> {
        (**self).sample_latent(rng)
    }

    fn render_labels(&mut self, z: &LatentCode) -> Result<LabelMap, BackendError> {
        (**self).render_labels(z)
    }
}

impl<B: FrameBackend + ?Sized> FrameBackend for Box<B> {
    fn descriptor(&self) -> BackendDescriptor {
        (**self).descriptor()
    }

    fn sample_latent(&mut self, rng: &mut dyn RngCore) -> Result<LatentCode, BackendError> {
        (**self).sample_latent(rng)
    }

    fn render_labels(&mut self, z: &LatentCode) -> Result<LabelMap, BackendError> {
        (**self).render_labels(z)
    }
}

pub const BLOBFACE_DIM: usize = 8;
pub const BLOBFACE_MIN_CANVAS: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlobfaceError {
    #[error("blobface latents have dimension {BLOBFACE_DIM}, got {0}")]
    BadDimension(usize),
    #[error("blobface canvas must be at least {BLOBFACE_MIN_CANVAS}x{BLOBFACE_MIN_CANVAS}, got {0}x{1}")]
    CanvasTooSmall(usize, usize),
}

/// Bounded odd squashing of the reals into (-0.25, 0.25).
#[inline]
pub fn squash(x: f64) -> f64 {
    0.25 * x.tanh()
}

/// Geometry of a blobface head, in pixel units.
///
/// Latent layout:
///
/// | component | effect |
/// |-----------|--------|
/// | z0, z1    | face centre, `(0.5 + squash(z)) * canvas` |
/// | z2, z3    | horizontal / vertical semi-axis |
/// | z4        | hair thickness |
/// | z5        | angular extent of the hair arc |
/// | z6, z7    | unused |
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobGeometry {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub thickness: f64,
    /// Cosine of the hair arc half-angle, measured from straight up.
    pub arc_cos: f64,
}

impl BlobGeometry {
    pub fn from_latent(z: &[f64], width: usize, height: usize) -> Self {
        let w = width as f64;
        let h = height as f64;
        let arc_half_angle = std::f64::consts::PI * (0.5 + squash(z[5]));
        BlobGeometry {
            cx: w * (0.5 + squash(z[0])),
            cy: h * (0.5 + squash(z[1])),
            rx: w * (0.2 + 0.2 * squash(z[2])),
            ry: h * (0.26 + 0.2 * squash(z[3])),
            thickness: w * (0.07 + 0.1 * squash(z[4])),
            arc_cos: arc_half_angle.cos(),
        }
    }

    /// Class of the pixel whose centre is at `(px, py)`.
    pub fn classify(&self, px: f64, py: f64) -> PixelClass {
        let dx = px - self.cx;
        let dy = py - self.cy;
        let ex = dx / self.rx;
        let ey = dy / self.ry;
        if ex * ex + ey * ey <= 1.0 {
            return PixelClass::Face;
        }
        let ox = dx / (self.rx + self.thickness);
        let oy = dy / (self.ry + self.thickness);
        if ox * ox + oy * oy <= 1.0 {
            // Angle from straight up: cos = -dy / r (image y grows downwards).
            let r = (dx * dx + dy * dy).sqrt();
            if -dy >= r * self.arc_cos {
                return PixelClass::Hair;
            }
        }
        PixelClass::Background
    }
}

/// Renders an 8-dimensional latent as a face ellipse with a hair arc.
pub fn blobface_render(z: &LatentCode, width: usize, height: usize) -> Result<LabelMap, BlobfaceError> {
    if z.dim() != BLOBFACE_DIM {
        return Err(BlobfaceError::BadDimension(z.dim()));
    }
    if width < BLOBFACE_MIN_CANVAS || height < BLOBFACE_MIN_CANVAS {
        return Err(BlobfaceError::CanvasTooSmall(width, height));
    }
    let geom = BlobGeometry::from_latent(z.values(), width, height);
    let map = LabelMap::from_fn(width, height, |x, y| geom.classify(x as f64 + 0.5, y as f64 + 0.5))
        .expect("canvas dimensions validated");
    Ok(map)
}

/// An i.i.d. standard-normal 8-vector.
pub fn blobface_sample(rng: &mut dyn RngCore) -> LatentCode {
    let values = (0..BLOBFACE_DIM)
        .map(|_| StandardNormal.sample(&mut *rng))
        .collect();
    LatentCode(values)
}

/// In-process synthetic backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blobface {
    width: usize,
    height: usize,
}

impl Blobface {
    pub const NAME: &'static str = "blobface";

    pub fn new(width: usize, height: usize) -> Result<Self, BlobfaceError> {
        if width < BLOBFACE_MIN_CANVAS || height < BLOBFACE_MIN_CANVAS {
            return Err(BlobfaceError::CanvasTooSmall(width, height));
        }
        Ok(Self { width, height })
    }

    pub fn canvas(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn render(&self, z: &LatentCode) -> Result<LabelMap, BlobfaceError> {
        blobface_render(z, self.width, self.height)
    }
}

impl Default for Blobface {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
        }
    }
}

impl FrameBackend for Blobface {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: Self::NAME.to_string(),
            latent_dim: BLOBFACE_DIM,
        }
    }

    fn sample_latent(&mut self, rng: &mut dyn RngCore) -> Result<LatentCode, BackendError> {
        Ok(blobface_sample(rng))
    }

    fn render_labels(&mut self, z: &LatentCode) -> Result<LabelMap, BackendError> {
        self.render(z).map_err(|e| match e {
            BlobfaceError::BadDimension(actual) => BackendError::Latent(LatentError::DimensionMismatch {
                expected: BLOBFACE_DIM,
                actual,
            }),
            other => BackendError::Failure(other.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{frame_variation, MetricConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn latent_validation() {
        assert_eq!(LatentCode::new(vec![]), Err(LatentError::Empty));
        assert!(matches!(
            LatentCode::new(vec![0.0, f64::NAN]),
            Err(LatentError::NonFinite { index: 1, .. })
        ));
        let parsed: Result<LatentCode, _> = serde_json::from_str("[1.0, 2.5]");
        assert_eq!(parsed.unwrap().values(), &[1.0, 2.5]);
        assert!(serde_json::from_str::<LatentCode>("[]").is_err());
    }

    #[test]
    fn render_checks_inputs() {
        assert_eq!(
            blobface_render(&LatentCode::zeros(7), 64, 64),
            Err(BlobfaceError::BadDimension(7))
        );
        assert_eq!(
            blobface_render(&LatentCode::zeros(8), 31, 64),
            Err(BlobfaceError::CanvasTooSmall(31, 64))
        );
        assert!(Blobface::new(32, 32).is_ok());
    }

    #[test]
    fn zero_latent_has_all_three_classes() {
        let map = blobface_render(&LatentCode::zeros(8), 64, 64).unwrap();
        for class in PixelClass::ALL {
            assert!(map.count(class) > 50, "{class}: {}", map.count(class));
        }
        // Hair sits above the face centre, never below it.
        for y in 33..64 {
            for x in 0..64 {
                assert_ne!(map.get(x, y), Some(PixelClass::Hair), "hair at ({x},{y})");
            }
        }
        // Left/right mirror symmetry of the centred head.
        for y in 0..64 {
            for x in 0..32 {
                assert_eq!(map.get(x, y), map.get(63 - x, y));
            }
        }
    }

    #[test]
    fn render_is_deterministic() {
        let mut r = rng(3);
        for _ in 0..20 {
            let z = blobface_sample(&mut r);
            assert_eq!(blobface_render(&z, 64, 48).unwrap(), blobface_render(&z, 64, 48).unwrap());
        }
    }

    #[test]
    fn reserved_components_are_ignored() {
        let mut r = rng(4);
        for _ in 0..20 {
            let z = blobface_sample(&mut r);
            let mut v = z.values().to_vec();
            v[6] += 3.7;
            v[7] -= 12.0;
            let z2 = LatentCode::new(v).unwrap();
            assert_eq!(blobface_render(&z, 64, 64).unwrap(), blobface_render(&z2, 64, 64).unwrap());
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let a: Vec<_> = (0..5).map({
            let mut r = rng(99);
            move |_| blobface_sample(&mut r)
        }).collect();
        let b: Vec<_> = (0..5).map({
            let mut r = rng(99);
            move |_| blobface_sample(&mut r)
        }).collect();
        assert_eq!(a, b);
    }

    // Latents cross the worker boundary as JSON and must come back bit-exact.
    #[test]
    fn json_roundtrip_is_exact() {
        let mut r = rng(3);
        for _ in 0..2000 {
            let z = blobface_sample(&mut r);
            let back: LatentCode = serde_json::from_str(&serde_json::to_string(&z).unwrap()).unwrap();
            assert_eq!(back, z);
        }
    }

    #[test]
    fn sample_moments() {
        let mut r = rng(2024);
        let n = 10_000;
        let samples: Vec<_> = (0..n).map(|_| blobface_sample(&mut r)).collect();
        for d in 0..BLOBFACE_DIM {
            let mean = samples.iter().map(|z| z.values()[d]).sum::<f64>() / n as f64;
            let var = samples.iter().map(|z| (z.values()[d] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 0.05, "component {d}: mean {mean}");
            assert!((0.95..=1.05).contains(&var.sqrt()), "component {d}: std {}", var.sqrt());
        }
    }

    #[test]
    fn tiny_perturbations_leave_map_unchanged() {
        let mut r = rng(11);
        for _ in 0..50 {
            let z = blobface_sample(&mut r);
            let mut delta = blobface_sample(&mut r).into_values();
            let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            delta.iter_mut().for_each(|v| *v *= 1e-6 / norm);
            let z2 = &z + &LatentCode::new(delta).unwrap();
            assert_eq!(blobface_render(&z, 64, 64).unwrap(), blobface_render(&z2, 64, 64).unwrap());
        }
    }

    #[test]
    fn translation_variation_grows_with_offset() {
        let cfg = MetricConfig::default();
        let e0 = LatentCode::basis(8, 0);
        let mut r = rng(5);
        for _ in 0..10 {
            let z = blobface_sample(&mut r);
            let base = blobface_render(&z, 64, 64).unwrap();
            for sign in [1.0, -1.0] {
                let mut prev = 0.0;
                for k in 0..=25 {
                    let t = sign * 0.02 * k as f64;
                    let moved = blobface_render(&z.offset(&e0, t).unwrap(), 64, 64).unwrap();
                    let v = frame_variation(&base, &moved, &cfg).unwrap().value();
                    assert!(v >= prev, "t={t}: {v} < {prev} for z={z:?}");
                    prev = v;
                }
            }
        }
    }
}
