//! Face-frame variation between two label maps.
//!
//! Each pixel pair costs 0 when the classes agree, `face_hair_weight` when
//! one side is face and the other hair, and 1 for any disagreement that
//! involves background. The variation is the summed cost divided by the
//! pixel count, so it lies in `[0, 1]`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labelmap::{LabelMap, PixelClass};

pub const DEFAULT_FACE_HAIR_WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("label maps differ in size: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("face/hair weight must lie in [0, 1], got {0}")]
    InvalidWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    face_hair_weight: f64,
}

impl MetricConfig {
    pub fn new(face_hair_weight: f64) -> Result<Self, MetricError> {
        if (0.0..=1.0).contains(&face_hair_weight) {
            Ok(Self { face_hair_weight })
        } else {
            Err(MetricError::InvalidWeight(face_hair_weight))
        }
    }

    pub fn face_hair_weight(&self) -> f64 {
        self.face_hair_weight
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            face_hair_weight: DEFAULT_FACE_HAIR_WEIGHT,
        }
    }
}

/// A face-frame variation value, a fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Variation(f64);

impl Variation {
    pub const ZERO: Variation = Variation(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn percent(self) -> f64 {
        self.0 * 100.0
    }

    pub(crate) fn from_fraction(value: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&value), "variation {value} out of range");
        Variation(value)
    }
}

impl fmt::Display for Variation {
    /// Percentage with three decimals, e.g. `1.812%`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}%", self.percent())
    }
}

/// Pixel counts grouped by the kind of disagreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Breakdown {
    pub equal: usize,
    pub face_hair: usize,
    pub other: usize,
}

impl Breakdown {
    pub fn total(&self) -> usize {
        self.equal + self.face_hair + self.other
    }

    pub fn variation(&self, cfg: &MetricConfig) -> Variation {
        let cost = cfg.face_hair_weight * self.face_hair as f64 + self.other as f64;
        Variation::from_fraction(cost / self.total() as f64)
    }
}

pub fn pixel_cost(c1: PixelClass, c2: PixelClass, cfg: &MetricConfig) -> f64 {
    use PixelClass::*;
    match (c1, c2) {
        _ if c1 == c2 => 0.0,
        (Face, Hair) | (Hair, Face) => cfg.face_hair_weight,
        _ => 1.0,
    }
}

fn check_dims(a: &LabelMap, b: &LabelMap) -> Result<(), MetricError> {
    if a.dims() == b.dims() {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch {
            a_width: a.width(),
            a_height: a.height(),
            b_width: b.width(),
            b_height: b.height(),
        })
    }
}

/// Weighted fraction of pixels classified differently in `a` and `b`.
pub fn frame_variation(a: &LabelMap, b: &LabelMap, cfg: &MetricConfig) -> Result<Variation, MetricError> {
    check_dims(a, b)?;
    // Sum then divide once.
    let cost: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&p, &q)| pixel_cost(p, q, cfg))
        .sum();
    Ok(Variation::from_fraction(cost / a.len() as f64))
}

pub fn variation_breakdown(a: &LabelMap, b: &LabelMap) -> Result<Breakdown, MetricError> {
    check_dims(a, b)?;
    let mut out = Breakdown::default();
    for (&p, &q) in a.pixels().iter().zip(b.pixels()) {
        match (p, q) {
            _ if p == q => out.equal += 1,
            (PixelClass::Face, PixelClass::Hair) | (PixelClass::Hair, PixelClass::Face) => {
                out.face_hair += 1
            }
            _ => out.other += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelmap::PixelClass::*;
    use proptest::prelude::*;

    fn grid(w: usize, h: usize, px: &[PixelClass]) -> LabelMap {
        LabelMap::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn pixel_cost_table() {
        let cfg = MetricConfig::default();
        assert_eq!(pixel_cost(Face, Face, &cfg), 0.0);
        assert_eq!(pixel_cost(Face, Hair, &cfg), 0.2);
        assert_eq!(pixel_cost(Hair, Face, &cfg), 0.2);
        assert_eq!(pixel_cost(Hair, Background, &cfg), 1.0);
        assert_eq!(pixel_cost(Background, Face, &cfg), 1.0);
    }

    #[test]
    fn one_face_hair_pixel_in_two_by_two() {
        let cfg = MetricConfig::default();
        let a = grid(2, 2, &[Face, Face, Background, Hair]);
        let b = grid(2, 2, &[Hair, Face, Background, Hair]);
        assert_eq!(frame_variation(&a, &b, &cfg).unwrap().value(), 0.2 / 4.0);
        assert_eq!(
            variation_breakdown(&a, &b).unwrap(),
            Breakdown { equal: 3, face_hair: 1, other: 0 }
        );
    }

    #[test]
    fn face_background_plus_face_hair() {
        let cfg = MetricConfig::default();
        let a = grid(2, 2, &[Face, Face, Background, Hair]);
        let b = grid(2, 2, &[Background, Hair, Background, Hair]);
        let v = frame_variation(&a, &b, &cfg).unwrap().value();
        assert_eq!(v, (1.0 + 0.2) / 4.0);
        assert!((v - 0.3).abs() < 1e-15);
        assert_eq!(
            variation_breakdown(&a, &b).unwrap(),
            Breakdown { equal: 2, face_hair: 1, other: 1 }
        );
    }

    #[test]
    fn identical_maps_breakdown() {
        let a = grid(3, 2, &[Face, Hair, Background, Face, Hair, Background]);
        assert_eq!(
            variation_breakdown(&a, &a).unwrap(),
            Breakdown { equal: 6, face_hair: 0, other: 0 }
        );
        assert_eq!(frame_variation(&a, &a, &MetricConfig::default()).unwrap(), Variation::ZERO);
    }

    #[test]
    fn dimension_mismatch() {
        let a = LabelMap::filled(2, 3, Face).unwrap();
        let b = LabelMap::filled(3, 2, Face).unwrap();
        let err = frame_variation(&a, &b, &MetricConfig::default()).unwrap_err();
        assert_eq!(
            err,
            MetricError::DimensionMismatch { a_width: 2, a_height: 3, b_width: 3, b_height: 2 }
        );
        assert!(variation_breakdown(&a, &b).is_err());
    }

    #[test]
    fn weight_validation() {
        assert!(MetricConfig::new(-0.01).is_err());
        assert!(MetricConfig::new(1.01).is_err());
        assert!(MetricConfig::new(f64::NAN).is_err());
        assert!(MetricConfig::new(0.0).is_ok());
        assert!(MetricConfig::new(1.0).is_ok());
    }

    #[test]
    fn display_is_three_decimal_percent() {
        assert_eq!(Variation::from_fraction(0.05).to_string(), "5.000%");
        assert_eq!(Variation::from_fraction(0.01812).to_string(), "1.812%");
        assert_eq!(Variation::ZERO.to_string(), "0.000%");
    }

    fn arb_pair() -> impl Strategy<Value = (LabelMap, LabelMap)> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            let px = || prop::collection::vec(0u8..3, w * h);
            (px(), px()).prop_map(move |(a, b)| {
                let mk = |raw: Vec<u8>| {
                    LabelMap::new(w, h, raw.into_iter().map(|r| PixelClass::from_raw(r).unwrap()).collect())
                        .unwrap()
                };
                (mk(a), mk(b))
            })
        })
    }

    proptest! {
        #[test]
        fn breakdown_agrees_with_variation((a, b) in arb_pair(), weight in 0.0f64..=1.0) {
            let cfg = MetricConfig::new(weight).unwrap();
            let bd = variation_breakdown(&a, &b).unwrap();
            prop_assert_eq!(bd.total(), a.len());
            let direct = frame_variation(&a, &b, &cfg).unwrap().value();
            prop_assert!((bd.variation(&cfg).value() - direct).abs() < 1e-12);
        }

        #[test]
        fn affine_in_weight((a, b) in arb_pair(), w1 in 0.0f64..=1.0, w2 in 0.0f64..=1.0) {
            let bd = variation_breakdown(&a, &b).unwrap();
            let f = |w| frame_variation(&a, &b, &MetricConfig::new(w).unwrap()).unwrap().value();
            let slope = bd.face_hair as f64 / a.len() as f64;
            prop_assert!((f(w2) - f(w1) - slope * (w2 - w1)).abs() < 1e-12);
        }

        #[test]
        fn unit_weight_is_hamming((a, b) in arb_pair()) {
            let f = frame_variation(&a, &b, &MetricConfig::new(1.0).unwrap()).unwrap().value();
            let differing = a.pixels().iter().zip(b.pixels()).filter(|(p, q)| p != q).count();
            prop_assert_eq!(f, differing as f64 / a.len() as f64);
        }

        #[test]
        fn zero_iff_equal((a, b) in arb_pair()) {
            let f = frame_variation(&a, &b, &MetricConfig::default()).unwrap().value();
            prop_assert_eq!(f == 0.0, a == b);
            prop_assert_eq!(f, frame_variation(&b, &a, &MetricConfig::default()).unwrap().value());
        }
    }
}
