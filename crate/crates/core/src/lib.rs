//! Face-frame variation between segmentation label maps, and a stochastic
//! correction that lowers it for latent-code-driven generators.
//!
//! - [`labelmap`]: face/hair/background maps and their PGM encoding
//! - [`metric`]: the weighted per-pixel variation
//! - [`genspace`]: latent codes, the backend trait, and the synthetic `Blobface` backend
//! - [`correction`]: scheduled-noise hill climbing on a latent code
//! - [`sweeps`]: variation profiles along latent directions
//! - [`adapter`]: external workers speaking newline-delimited JSON

pub mod adapter;
pub mod correction;
pub mod fmt;
pub mod genspace;
pub mod labelmap;
pub mod metric;
pub mod sweeps;

pub use correction::{correct, estimate_latent_std, strength, CorrectionConfig, CorrectionTrace, LatentStd};
pub use genspace::{BackendDescriptor, BackendError, Blobface, FrameBackend, LatentCode};
pub use labelmap::{decode_labelmap, encode_labelmap, LabelMap, PixelClass};
pub use metric::{frame_variation, pixel_cost, variation_breakdown, MetricConfig, Variation};
pub use sweeps::{linear_fit, sweep, DirectionSpec, Side, SweepResult};
