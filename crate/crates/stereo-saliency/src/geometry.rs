//! Physical viewing model: screen/observer geometry, the foveal weighting
//! mask used by center-surround operators, disparity-to-depth conversion,
//! and the binocular discomfort penalty mask.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterMap;

/// Relative tolerance on horizontal vs vertical pixels-per-cm before the
/// geometry is rejected as inconsistent.
pub const ASPECT_TOLERANCE: f64 = 0.2;

/// Floor for the depth-conversion denominator; disparities extreme enough
/// to reach it are far outside any plausible comfort zone.
pub const DEPTH_DENOMINATOR_FLOOR: f64 = 1e-3;

/// Observer/display setup. All distances in cm, resolutions in pixels,
/// `alpha_deg` is the half-angle of highest visual acuity in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewingGeometry {
    /// Distance from the viewer's eyes to the screen, cm.
    pub z_observer: f64,
    /// Inter-ocular distance, cm (human average 6.3).
    #[serde(default = "default_l_eyes")]
    pub l_eyes: f64,
    /// Physical screen width, cm.
    pub screen_w: f64,
    /// Physical screen height, cm.
    pub screen_h: f64,
    /// Horizontal resolution, pixels.
    pub res_w: usize,
    /// Vertical resolution, pixels.
    pub res_h: usize,
    /// Half-angle of highest acuity, degrees; must lie in [0.25, 1].
    pub alpha_deg: f64,
    /// Video frame rate, frames per second.
    pub frame_rate: f64,
}

fn default_l_eyes() -> f64 {
    6.3
}

impl ViewingGeometry {
    /// Validates invariants: everything positive, alpha within [0.25°, 1°],
    /// pixels-per-cm consistent between axes within [`ASPECT_TOLERANCE`].
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("z_observer", self.z_observer),
            ("l_eyes", self.l_eyes),
            ("screen_w", self.screen_w),
            ("screen_h", self.screen_h),
            ("alpha_deg", self.alpha_deg),
            ("frame_rate", self.frame_rate),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.res_w == 0 || self.res_h == 0 {
            return Err(Error::invalid("resolution must be positive"));
        }
        if !(0.25..=1.0).contains(&self.alpha_deg) {
            return Err(Error::invalid(format!(
                "alpha must lie in [0.25, 1.0] degrees, got {}",
                self.alpha_deg
            )));
        }
        let ppcm_x = self.res_w as f64 / self.screen_w;
        let ppcm_y = self.res_h as f64 / self.screen_h;
        let rel = (ppcm_x - ppcm_y).abs() / ppcm_x.max(ppcm_y);
        if rel > ASPECT_TOLERANCE {
            return Err(Error::invalid(format!(
                "pixel density differs between axes by {:.0}% (> {:.0}% tolerance)",
                rel * 100.0,
                ASPECT_TOLERANCE * 100.0
            )));
        }
        Ok(())
    }

    /// The HD living-room setup used throughout the built-in tests: a
    /// 46-inch 1920x1080 display (101.8 x 57.25 cm) viewed from 183 cm.
    pub fn hd_reference() -> Self {
        ViewingGeometry {
            z_observer: 183.0,
            l_eyes: 6.3,
            screen_w: 101.8,
            screen_h: 57.25,
            res_w: 1920,
            res_h: 1080,
            alpha_deg: 1.0,
            frame_rate: 24.0,
        }
    }

    /// Same physical setup rescaled to a small working resolution, keeping
    /// angles and pixel density relationships intact.
    pub fn scaled_to(&self, res_w: usize, res_h: usize) -> Self {
        let mut g = *self;
        g.screen_w = self.screen_w * res_w as f64 / self.res_w as f64;
        g.screen_h = self.screen_h * res_h as f64 / self.res_h as f64;
        g.res_w = res_w;
        g.res_h = res_h;
        g
    }

    /// Pixels per degree of visual angle along the horizontal axis.
    pub fn pixels_per_degree(&self) -> f64 {
        self.z_observer * 1.0f64.to_radians().tan() * self.res_w as f64 / self.screen_w
    }
}

/// Radius of the highest-acuity disk in pixels:
/// `round(z_observer * tan(alpha) * res_h / screen_h)`, at least 1.
pub fn fovea_radius(g: &ViewingGeometry) -> Result<usize> {
    g.validate()?;
    let l = g.z_observer * g.alpha_deg.to_radians().tan() * g.res_h as f64 / g.screen_h;
    Ok((l.round() as usize).max(1))
}

/// Monotone non-increasing density profile over normalized eccentricity
/// [0, 1]; anchor 0 must be present. Queries are linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    anchors: Vec<(f64, f64)>,
}

/// Shipped default profile (relative photoreceptor concentration falling
/// from 1.0 at the center to 0.1 at the rim).
pub const DEFAULT_DENSITY_PROFILE: &str = include_str!("../data/photoreceptor_density.tsv");

impl DensityProfile {
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::invalid("density profile is empty"));
        }
        if anchors[0].0 != 0.0 {
            return Err(Error::invalid(
                "density profile must be anchored at eccentricity 0",
            ));
        }
        for w in anchors.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid(
                    "density profile eccentricities must be strictly increasing",
                ));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid(
                    "density profile must be monotone non-increasing",
                ));
            }
        }
        for &(e, d) in &anchors {
            if !e.is_finite() || !d.is_finite() || d < 0.0 {
                return Err(Error::invalid("density profile values must be finite, >= 0"));
            }
        }
        if anchors[0].1 <= 0.0 {
            return Err(Error::invalid("center density must be positive"));
        }
        Ok(DensityProfile { anchors })
    }

    /// Uniform density 1 everywhere.
    pub fn flat() -> Self {
        DensityProfile {
            anchors: vec![(0.0, 1.0), (1.0, 1.0)],
        }
    }

    /// Parses a two-column whitespace-separated table; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut anchors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.ok_or_else(|| Error::invalid(format!("profile line {}: missing column", i + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("profile line {}: {e}", i + 1)))
            };
            let e = parse(it.next())?;
            let d = parse(it.next())?;
            anchors.push((e, d));
        }
        DensityProfile::new(anchors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        DensityProfile::parse(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn shipped_default() -> Self {
        DensityProfile::parse(DEFAULT_DENSITY_PROFILE).expect("shipped profile is valid")
    }

    /// Density at normalized eccentricity `e`, clamped to the table range.
    pub fn density_at(&self, e: f64) -> f64 {
        let a = &self.anchors;
        if e <= a[0].0 {
            return a[0].1;
        }
        if e >= a[a.len() - 1].0 {
            return a[a.len() - 1].1;
        }
        for w in a.windows(2) {
            if e <= w[1].0 {
                let t = (e - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        a[a.len() - 1].1
    }
}

/// Circular weighting mask over the highest-acuity disk. Weights are
/// non-increasing with distance from the center and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FoveaMask {
    radius: usize,
    /// (dx, dy) offsets within the disk, center included.
    offsets: Vec<(i32, i32)>,
    /// Weight per offset, aligned with `offsets`.
    weights: Vec<f64>,
}

impl FoveaMask {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Weight at a given offset, or 0 outside the disk.
    pub fn weight_at(&self, dx: i32, dy: i32) -> f64 {
        self.offsets
            .iter()
            .position(|&o| o == (dx, dy))
            .map_or(0.0, |i| self.weights[i])
    }
}

/// Builds the foveal mask for a geometry: disk of radius [`fovea_radius`],
/// weight at offset distance r interpolated from `profile` at eccentricity
/// r/radius, then normalized to sum 1.
pub fn build_fovea_mask(g: &ViewingGeometry, profile: &DensityProfile) -> Result<FoveaMask> {
    let radius = fovea_radius(g)?;
    build_fovea_mask_with_radius(radius, profile)
}

/// Same as [`build_fovea_mask`] with an explicit radius.
pub fn build_fovea_mask_with_radius(radius: usize, profile: &DensityProfile) -> Result<FoveaMask> {
    if radius == 0 {
        return Err(Error::invalid("fovea radius must be >= 1"));
    }
    let r = radius as i32;
    let r2 = (radius * radius) as f64;
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            if d2 <= r2 {
                offsets.push((dx, dy));
                weights.push(profile.density_at(d2.sqrt() / radius as f64));
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("fovea mask weights sum to zero"));
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(FoveaMask {
        radius,
        offsets,
        weights,
    })
}

/// Converts a pixel-disparity map to real-world depth in cm:
/// `depth = z / (1 + d * screen_w / (l_eyes * res_w))`, denominator floored
/// at [`DEPTH_DENOMINATOR_FLOOR`]. Positive disparity moves content behind
/// the screen plane (depth < z_observer under this sign convention's
/// reciprocal: larger denominator, smaller depth).
pub fn disparity_to_depth(disparity: &RasterMap, g: &ViewingGeometry) -> Result<RasterMap> {
    g.validate()?;
    let k = g.screen_w / (g.l_eyes * g.res_w as f64);
    let z = g.z_observer;
    Ok(disparity.map(|d| {
        let denom = (1.0 + f64::from(d) * k).max(DEPTH_DENOMINATOR_FLOOR);
        (z / denom) as f32
    }))
}

/// Multiplicative comfort penalty per pixel from a segment-constant
/// disparity map: 1 where the arcminute-equivalent magnitude is <= 60,
/// `1.36 - 0.006 * d_arcmin` clamped at 0 beyond that. Continuous at the
/// threshold (both branches give 1 at 60).
pub fn discomfort_mask(segment_disparity: &RasterMap, g: &ViewingGeometry) -> Result<RasterMap> {
    g.validate()?;
    let arcmin_per_px = 60.0 / g.pixels_per_degree();
    Ok(segment_disparity.map(|d| {
        let d_arcmin = f64::from(d).abs() * arcmin_per_px;
        let v = if d_arcmin <= 60.0 {
            1.0
        } else {
            (1.36 - 0.006 * d_arcmin).max(0.0)
        };
        v as f32
    }))
}
