//! Depth saliency: an inverse-depth base map gated by a per-segment
//! depth-abruptness mask and the binocular comfort mask.
//!
//! Proximity alone is a poor saliency cue (the ground plane is close but
//! rarely attended); an object that stands out in depth has smooth depth
//! inside and an abrupt depth change at its boundary. The abruptness mask
//! probes just outside each segment in the four cardinal directions and
//! compares the depth there against the segment centroid's depth.

use crate::error::{Error, Result};
use crate::raster::{RasterMap, gaussian_blur, normalize01};
use crate::segmentation::{Reducer, SegmentLabeling, SegmentStats, segment_reduce};

/// Smoothing applied to the depth map before probing, guarding against
/// single-pixel depth artifacts.
pub const DEFAULT_PROBE_SMOOTHING_SIGMA: f64 = 2.0;

/// One segment's outward depth probe: four anchors just beyond the
/// segment's extent in the cardinal directions, each read as the median
/// of three sub-points along its probe axis.
#[derive(Debug, Clone)]
pub struct AbruptnessProbe {
    /// Anchor pixels (up, right, down, left), clamped to the frame.
    pub anchors: [(usize, usize); 4],
    /// Median-combined depth readings at each anchor.
    pub readings: [f32; 4],
    /// Inverse-distance weights (anchor to centroid).
    pub weights: [f64; 4],
    /// Depth under the segment centroid.
    pub centroid_depth: f32,
    /// Weighted mean absolute depth difference, readings vs centroid.
    pub diff: f64,
}

/// Inverse depth linearly mapped to [0,1]: nearest content 1, farthest 0.
pub fn depth_base(depth: &RasterMap) -> Result<RasterMap> {
    for (i, &v) in depth.as_slice().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i, value: f64::from(v) });
        }
        if v <= 0.0 {
            return Err(Error::invalid(format!(
                "depth must be positive; sample {i} is {v}"
            )));
        }
    }
    normalize01(&depth.map(|v| 1.0 / v))
}

fn median3(mut a: f32, mut b: f32, mut c: f32) -> f32 {
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    if b > c {
        std::mem::swap(&mut b, &mut c);
    }
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    b
}

fn clamp_point(x: f64, y: f64, w: usize, h: usize) -> (usize, usize) {
    (
        (x.round() as isize).clamp(0, w as isize - 1) as usize,
        (y.round() as isize).clamp(0, h as isize - 1) as usize,
    )
}

/// Probe one segment of a (pre-smoothed) depth map.
pub fn probe_segment(smoothed: &RasterMap, stats: &SegmentStats) -> AbruptnessProbe {
    let (w, h) = smoothed.dims();
    let (cx, cy) = stats.centroid;
    let ox = 0.01 * w as f64;
    let oy = 0.01 * h as f64;
    // (x, y, axis): axis 0 probes horizontally, 1 vertically.
    let nominal = [
        (cx, cy - stats.d_up - oy, 1usize),
        (cx + stats.d_right + ox, cy, 0),
        (cx, cy + stats.d_down + oy, 1),
        (cx - stats.d_left - ox, cy, 0),
    ];
    let centroid_px = clamp_point(cx, cy, w, h);
    let centroid_depth = smoothed.get(centroid_px.0, centroid_px.1);
    let mut anchors = [(0usize, 0usize); 4];
    let mut readings = [0f32; 4];
    let mut weights = [0f64; 4];
    let mut num = 0f64;
    let mut den = 0f64;
    for (i, &(px, py, axis)) in nominal.iter().enumerate() {
        let (ax, ay) = clamp_point(px, py, w, h);
        let read = |dx: isize, dy: isize| smoothed.get_clamped(ax as isize + dx, ay as isize + dy);
        let r = if axis == 0 {
            median3(read(-2, 0), read(0, 0), read(2, 0))
        } else {
            median3(read(0, -2), read(0, 0), read(0, 2))
        };
        let dist = ((ax as f64 - cx).powi(2) + (ay as f64 - cy).powi(2)).sqrt();
        // A probe clamped back onto the centroid would otherwise get
        // unbounded weight.
        let wgt = 1.0 / dist.max(1.0);
        anchors[i] = (ax, ay);
        readings[i] = r;
        weights[i] = wgt;
        num += wgt * f64::from((r - centroid_depth).abs());
        den += wgt;
    }
    AbruptnessProbe {
        anchors,
        readings,
        weights,
        centroid_depth,
        diff: num / den,
    }
}

/// Per-segment weighted depth differences, before the above-average
/// boost. The depth map is smoothed with `sigma` first.
pub fn segment_diffs(
    depth: &RasterMap,
    labeling: &SegmentLabeling,
    sigma: f64,
) -> Result<Vec<f64>> {
    if depth.dims() != labeling.dims() {
        return Err(Error::dims(format!(
            "depth {:?} vs labeling {:?}",
            depth.dims(),
            labeling.dims()
        )));
    }
    let smoothed = gaussian_blur(depth, sigma)?;
    Ok(labeling
        .stats()
        .iter()
        .map(|s| probe_segment(&smoothed, s).diff)
        .collect())
}

/// Above-average differences count as abrupt and are promoted to the
/// frame-wide maximum; the rest keep their own value.
pub fn abruptness_values(diffs: &[f64]) -> Vec<f64> {
    if diffs.is_empty() {
        return Vec::new();
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let max = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    diffs
        .iter()
        .map(|&d| if d > mean { max } else { d })
        .collect()
}

/// Segment-constant depth-abruptness mask in [0,1].
pub fn abruptness_mask(
    depth: &RasterMap,
    labeling: &SegmentLabeling,
    sigma: f64,
) -> Result<RasterMap> {
    let values = abruptness_values(&segment_diffs(depth, labeling, sigma)?);
    let painted: Vec<f32> = values.iter().map(|&v| v as f32).collect();
    normalize01(&labeling.paint(&painted)?)
}

/// Segment-reduced inverse-depth base gated by abruptness and comfort,
/// before the final rescale.
pub fn depth_feature_raw(
    depth: &RasterMap,
    labeling: &SegmentLabeling,
    discomfort: &RasterMap,
    reducer: Reducer,
    sigma: f64,
) -> Result<RasterMap> {
    if depth.dims() != discomfort.dims() {
        return Err(Error::dims(format!(
            "depth {:?} vs discomfort {:?}",
            depth.dims(),
            discomfort.dims()
        )));
    }
    let base = segment_reduce(&depth_base(depth)?, labeling, reducer)?;
    let mask = abruptness_mask(depth, labeling, sigma)?;
    base.zip_map(&mask, |b, m| b * m)?
        .zip_map(discomfort, |v, d| v * d)
}

/// The depth conspicuity map: [`depth_feature_raw`] normalized to [0,1].
pub fn depth_feature(
    depth: &RasterMap,
    labeling: &SegmentLabeling,
    discomfort: &RasterMap,
    reducer: Reducer,
    sigma: f64,
) -> Result<RasterMap> {
    normalize01(&depth_feature_raw(depth, labeling, discomfort, reducer, sigma)?)
}
