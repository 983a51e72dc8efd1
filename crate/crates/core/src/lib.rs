//! Subtitle-aware viewport prediction for 360-degree video.
//!
//! The crate turns head trajectories and subtitle files into training data,
//! learns a sequence-to-sequence predictor of future viewport centers and
//! scores it against input-ablated baselines:
//!
//! - [`geometry`]: spherical/Euler conversions and orthodromic distance
//! - [`subtitle`]: SRT/WebVTT parsing and navigation-phrase extraction
//! - [`trajectory`]: trajectory CSV I/O, resampling and sliding windows
//! - [`saliency`]: ground-truth saliency heat maps
//! - [`nn`]: the small neural-network substrate
//! - [`predictor`]: feature encoders, the encoder-decoder model and training
//! - [`synth`]: a synthetic viewer cohort with and without subtitles
//! - [`eval`]: RMSE and orthodromic metrics, comparison tables

pub mod eval;
pub mod geometry;
pub mod nn;
pub mod predictor;
pub mod saliency;
pub mod subtitle;
pub mod synth;
pub mod trajectory;

pub use geometry::{GeoCoord, SphericalCoord};
