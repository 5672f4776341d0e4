//! Saliency prediction for stereoscopic 3D video.
//!
//! The crate turns a stereo clip (left/right views plus disparity) into a
//! per-frame saliency map in three stages:
//!
//! 1. **Feature extraction** builds 24 conspicuity maps per frame covering
//!    photometric contrast, color statistics, texture, motion in all three
//!    axes, depth structure, and detector-driven semantic cues.
//! 2. **Fusion** combines the stack into a single map, either with a trained
//!    random-forest regressor or one of several closed-form schemes.
//! 3. **Evaluation** scores predictions against eye-tracking fixations with
//!    the standard saliency metrics and baselines.
//!
//! Geometry helpers model the viewing setup (screen size, distance, fovea
//! extent, binocular comfort) so the photometric operators can weight
//! center-surround differences the way a human observer would resolve them.
//!
//! See the crate examples for runnable entry points into each stage.

pub mod color;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod gabor;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod segmentation;
pub mod shaping;

pub use error::{Error, Result};
pub use raster::RasterMap;
