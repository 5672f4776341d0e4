//! Cross-cutting map conditioning applied to every feature before fusion:
//! compactness masking, minimum-size filtering, and sparsity projection,
//! composed in a fixed order (compactness, size, rescale, sparsity).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::raster::{RasterMap, normalize01, sparsity_project};

/// Which conditioning stages run for one feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapingFlags {
    pub compactness: bool,
    pub size_filter: bool,
    pub sparsity: bool,
}

impl ShapingFlags {
    pub const ALL: ShapingFlags = ShapingFlags {
        compactness: true,
        size_filter: true,
        sparsity: true,
    };
    pub const NONE: ShapingFlags = ShapingFlags {
        compactness: false,
        size_filter: false,
        sparsity: false,
    };
}

fn default_base() -> ShapingFlags {
    ShapingFlags::ALL
}

/// Per-feature shaping policy. Bottom-up maps default to every stage;
/// detector box maps skip sparsity (they are already sparse by
/// construction). Explicit overrides replace the default wholesale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapingConfig {
    #[serde(default = "default_base")]
    pub base: ShapingFlags,
    #[serde(default)]
    pub overrides: BTreeMap<FeatureKind, ShapingFlags>,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        ShapingConfig {
            base: default_base(),
            overrides: BTreeMap::new(),
        }
    }
}

impl ShapingConfig {
    pub fn flags_for(&self, kind: FeatureKind) -> ShapingFlags {
        if let Some(&f) = self.overrides.get(&kind) {
            return f;
        }
        let mut f = self.base;
        if kind.is_high_level() {
            f.sparsity = false;
        }
        f
    }
}

/// Condition one feature map: multiply in the enabled masks, rescale to
/// [0,1], then optionally exponentiate-and-recenter so only the few
/// strongest regions survive. With everything disabled this is plain
/// normalization.
pub fn shape_feature(
    f: &RasterMap,
    compactness: &RasterMap,
    size_mask: &RasterMap,
    flags: ShapingFlags,
) -> Result<RasterMap> {
    if f.dims() != compactness.dims() || f.dims() != size_mask.dims() {
        return Err(Error::dims(format!(
            "feature {:?}, compactness {:?}, size mask {:?}",
            f.dims(),
            compactness.dims(),
            size_mask.dims()
        )));
    }
    let mut m = f.clone();
    if flags.compactness {
        m = m.zip_map(compactness, |a, b| a * b)?;
    }
    if flags.size_filter {
        m = m.zip_map(size_mask, |a, b| a * b)?;
    }
    let m = normalize01(&m)?;
    if flags.sparsity {
        return sparsity_project(&m);
    }
    Ok(m)
}
