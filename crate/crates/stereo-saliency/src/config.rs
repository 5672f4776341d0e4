//! Run configuration: every tunable knob of the pipeline in one TOML file.
//!
//! Every section and field is optional — an empty file is a valid
//! configuration and yields the documented defaults. Unknown keys are
//! rejected: a typo that silently reverts a knob to its default is worse
//! than an error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::motion::ComponentScaling;
use crate::features::photometric::VarianceMode;
use crate::gabor::GaborParams;
use crate::geometry::ViewingGeometry;
use crate::segmentation::{Reducer, SegmentationParams};
use crate::shaping::ShapingConfig;

/// Root configuration for a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Physical viewing setup. Drives the fovea mask, disparity-to-depth
    /// conversion, comfort weighting, and the fixation-density blur, so it
    /// should describe the display the gaze data was recorded on.
    pub geometry: ViewingGeometry,
    pub segmentation: SegmentationParams,
    pub gabor: GaborParams,
    pub shaping: ShapingConfig,
    pub photometric: PhotometricConfig,
    pub motion: MotionConfig,
    pub depth: DepthConfig,
    pub tables: TableOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: ViewingGeometry::hd_reference(),
            segmentation: SegmentationParams::default(),
            gabor: GaborParams::default(),
            shaping: ShapingConfig::default(),
            photometric: PhotometricConfig::default(),
            motion: MotionConfig::default(),
            depth: DepthConfig::default(),
            tables: TableOverrides::default(),
        }
    }
}

/// Knobs for the brightness/color/texture maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotometricConfig {
    /// Joint-RGB quantization of the color-rarity histogram.
    pub histogram_bins_per_channel: usize,
    /// Neighborhood statistic for the variance-contrast maps.
    pub variance: VarianceMode,
}

impl Default for PhotometricConfig {
    fn default() -> Self {
        PhotometricConfig {
            histogram_bins_per_channel: 8,
            variance: VarianceMode::CenterDeviation,
        }
    }
}

/// Knobs for the seven motion maps and the built-in flow fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    /// Segment reduction operator applied to every motion map.
    pub reducer: Reducer,
    /// Histogram bins per axis for the motion-rarity map.
    pub surprise_bins_per_axis: usize,
    /// Built-in block matching: block edge, pixels.
    pub block_size: usize,
    /// Built-in block matching: search radius, pixels.
    pub search_radius: usize,
    /// Displacement conditioning before velocity composition.
    pub scaling: ComponentScaling,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            reducer: Reducer::Mean,
            surprise_bins_per_axis: 16,
            block_size: 16,
            search_radius: 24,
            scaling: ComponentScaling::Rescale,
        }
    }
}

/// Knobs for the depth map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthConfig {
    /// Gaussian sigma (pixels) smoothing depth before abruptness probing.
    pub probe_sigma: f64,
    /// Multiplier turning stored disparity samples into pixel units
    /// (16-bit disparity files are often scaled for precision).
    pub disparity_scale: f64,
}

impl Default for DepthConfig {
    fn default() -> Self {
        DepthConfig {
            probe_sigma: 2.0,
            disparity_scale: 1.0,
        }
    }
}

/// Optional replacements for the shipped data tables. Paths are taken as
/// written — callers resolve them against whatever base they choose.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableOverrides {
    /// Spectral-sensitivity CSV for the HVS color map.
    pub spectral_sensitivity: Option<PathBuf>,
    /// Empirical color-attention CSV.
    pub empirical_colors: Option<PathBuf>,
    /// Photoreceptor density profile (two-column text).
    pub photoreceptor_density: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a TOML document.
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Reads and parses a TOML config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Serializes back to TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Writes the TOML form to a file.
    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_toml())?)
    }

    /// Checks every knob the type system cannot: geometry consistency,
    /// positive sizes, sane histogram resolutions.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let p = &self.photometric;
        if p.histogram_bins_per_channel == 0 || p.histogram_bins_per_channel > 256 {
            return Err(Error::invalid(
                "photometric.histogram_bins_per_channel must lie in 1..=256",
            ));
        }
        let m = &self.motion;
        if m.surprise_bins_per_axis == 0 {
            return Err(Error::invalid("motion.surprise_bins_per_axis must be positive"));
        }
        if m.block_size == 0 || m.search_radius == 0 {
            return Err(Error::invalid(
                "motion.block_size and motion.search_radius must be positive",
            ));
        }
        let d = &self.depth;
        if !(d.probe_sigma.is_finite() && d.probe_sigma > 0.0) {
            return Err(Error::invalid("depth.probe_sigma must be positive"));
        }
        if !(d.disparity_scale.is_finite() && d.disparity_scale > 0.0) {
            return Err(Error::invalid("depth.disparity_scale must be positive"));
        }
        if self.segmentation.spatial_bandwidth <= 0.0
            || self.segmentation.range_bandwidth <= 0.0
        {
            return Err(Error::invalid("segmentation bandwidths must be positive"));
        }
        Ok(())
    }
}
