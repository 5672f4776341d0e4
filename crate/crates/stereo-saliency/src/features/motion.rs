//! The seven motion conspicuity maps: planar displacement (Dx, Dy), depth
//! displacement (Dz), velocity magnitude, Z-emphasized velocity,
//! acceleration, and the element-of-surprise rarity map.
//!
//! Displacements are normalized to [0,1] per frame before velocity
//! composition; every motion feature is segment-reduced (mean by default)
//! under the assumption that object motion is homogeneous.

use crate::error::{Error, Result};
use crate::geometry::ViewingGeometry;
use crate::raster::{RasterMap, normalize01};
use crate::segmentation::{Reducer, SegmentLabeling, segment_reduce};
use serde::{Deserialize, Serialize};

/// Per-frame conditioning of the raw (dx, dy, dz) displacements before any
/// velocity arithmetic: rescaled to [0,1] (the default), or z-scored as an
/// alternative. The z-emphasis map always works on rescaled dz — its
/// exponential emphasis premises values in [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentScaling {
    #[default]
    Rescale,
    Standardize,
}

/// Z-scores a map to mean 0, unit population variance; constant maps
/// (including all-zero static scenes) come back as zeros.
pub fn standardize(m: &RasterMap) -> RasterMap {
    let mean = m.mean();
    let var = m
        .as_slice()
        .iter()
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / m.len() as f64;
    if var <= 1e-24 {
        return RasterMap::zeros(m.width(), m.height());
    }
    let sd = var.sqrt();
    m.map(|v| ((f64::from(v) - mean) / sd) as f32)
}

/// Where a flow field came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowSource {
    /// Ingested from a flow file produced by an external algorithm.
    External,
    /// Computed by the built-in block matcher.
    BlockMatching,
}

/// Per-pixel displacement field in pixels/frame, prev -> cur: the content
/// at (x, y) in the previous frame sits near (x + dx, y + dy) in the
/// current one.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub dx: RasterMap,
    pub dy: RasterMap,
    pub source: FlowSource,
}

impl FlowField {
    pub fn new(dx: RasterMap, dy: RasterMap, source: FlowSource) -> Result<Self> {
        if dx.dims() != dy.dims() {
            return Err(Error::dims(format!(
                "flow channels disagree: {:?} vs {:?}",
                dx.dims(),
                dy.dims()
            )));
        }
        Ok(FlowField { dx, dy, source })
    }

    pub fn zero(width: usize, height: usize) -> Self {
        FlowField {
            dx: RasterMap::zeros(width, height),
            dy: RasterMap::zeros(width, height),
            source: FlowSource::External,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dx.dims()
    }
}

/// Integer block-matching flow: per block, the displacement in
/// [-search, search]^2 minimizing the sum of absolute differences between
/// the previous block and the displaced current-frame window (clamped
/// reads at borders). Ties break toward the smaller displacement. The
/// block grid is bilinearly interpolated back to pixel resolution, so
/// recoverable motion saturates at the search bound.
pub fn block_matching_flow(
    prev: &RasterMap,
    cur: &RasterMap,
    block: usize,
    search: usize,
) -> Result<FlowField> {
    if prev.dims() != cur.dims() {
        return Err(Error::dims(format!(
            "frames disagree: {:?} vs {:?}",
            prev.dims(),
            cur.dims()
        )));
    }
    if block == 0 || search == 0 {
        return Err(Error::invalid("block and search sizes must be positive"));
    }
    let (w, h) = prev.dims();
    let bw = w.div_ceil(block);
    let bh = h.div_ceil(block);
    let mut bdx = RasterMap::zeros(bw, bh);
    let mut bdy = RasterMap::zeros(bw, bh);
    let s = search as i64;
    for by in 0..bh {
        for bx in 0..bw {
            let x0 = bx * block;
            let y0 = by * block;
            let x1 = (x0 + block).min(w);
            let y1 = (y0 + block).min(h);
            // best: (sad, |d|^2, v, u)
            let mut best: Option<(f64, i64, i64, i64)> = None;
            for v in -s..=s {
                for u in -s..=s {
                    let mut sad = 0f64;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let p = f64::from(prev.get(x, y));
                            let c = f64::from(
                                cur.get_clamped(x as isize + u as isize, y as isize + v as isize),
                            );
                            sad += (p - c).abs();
                        }
                    }
                    let key = (sad, u * u + v * v, v, u);
                    let better = match best {
                        None => true,
                        Some((bs, bn, bv, bu)) => {
                            (key.0, key.1, key.2, key.3) < (bs, bn, bv, bu)
                        }
                    };
                    if better {
                        best = Some(key);
                    }
                }
            }
            let (_, _, v, u) = best.expect("candidate set is non-empty");
            bdx.set(bx, by, u as f32);
            bdy.set(bx, by, v as f32);
        }
    }
    let dx = crate::gabor::upsample_bilinear(&bdx, w, h);
    let dy = crate::gabor::upsample_bilinear(&bdy, w, h);
    FlowField::new(dx, dy, FlowSource::BlockMatching)
}

/// Depth displacement prev -> cur: at each pixel,
/// `dz = prev_depth(x, y) - cur_depth(round(x + dx), round(y + dy))`, the
/// displaced endpoint clamped to the frame. Positive values mean the
/// content moved closer. Unnormalized (same units as the depth maps).
pub fn dz_map_raw(
    prev_depth: &RasterMap,
    cur_depth: &RasterMap,
    flow: &FlowField,
) -> Result<RasterMap> {
    if prev_depth.dims() != cur_depth.dims() || prev_depth.dims() != flow.dims() {
        return Err(Error::dims(format!(
            "depth/flow dimensions disagree: {:?}, {:?}, {:?}",
            prev_depth.dims(),
            cur_depth.dims(),
            flow.dims()
        )));
    }
    let (w, h) = prev_depth.dims();
    Ok(RasterMap::from_fn(w, h, |x, y| {
        let tx = (x as f64 + f64::from(flow.dx.get(x, y))).round() as isize;
        let ty = (y as f64 + f64::from(flow.dy.get(x, y))).round() as isize;
        prev_depth.get(x, y) - cur_depth.get_clamped(tx, ty)
    }))
}

/// [`dz_map_raw`] normalized to [0,1] per frame.
pub fn dz_map(
    prev_depth: &RasterMap,
    cur_depth: &RasterMap,
    flow: &FlowField,
) -> Result<RasterMap> {
    normalize01(&dz_map_raw(prev_depth, cur_depth, flow)?)
}

/// Velocity along one axis from a per-frame displacement.
pub fn velocity_component(frame_rate: f64, displacement: f64) -> f64 {
    (frame_rate - 1.0) * displacement
}

/// Euclidean velocity magnitude.
pub fn velocity_magnitude(vx: f64, vy: f64, vz: f64) -> f64 {
    (vx * vx + vy * vy + vz * vz).sqrt()
}

/// Z-displacement emphasis: `exp(dz) - 1`, a fixed point at 0 and strictly
/// above dz for dz > 0.
pub fn z_emphasis(dz: f64) -> f64 {
    dz.exp() - 1.0
}

/// Segment-constant velocity maps, each normalized to [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMaps {
    pub vx: RasterMap,
    pub vy: RasterMap,
    pub vz: RasterMap,
    pub v: RasterMap,
}

fn normalized_components(
    flow: &FlowField,
    dz: &RasterMap,
) -> Result<(RasterMap, RasterMap, RasterMap)> {
    scaled_components(flow, dz, ComponentScaling::Rescale)
}

fn scaled_components(
    flow: &FlowField,
    dz: &RasterMap,
    scaling: ComponentScaling,
) -> Result<(RasterMap, RasterMap, RasterMap)> {
    match scaling {
        ComponentScaling::Rescale => Ok((
            normalize01(&flow.dx)?,
            normalize01(&flow.dy)?,
            normalize01(dz)?,
        )),
        ComponentScaling::Standardize => {
            if flow.dims() != dz.dims() {
                return Err(Error::dims(format!(
                    "flow {:?} vs dz {:?}",
                    flow.dims(),
                    dz.dims()
                )));
            }
            Ok((
                standardize(&flow.dx),
                standardize(&flow.dy),
                standardize(dz),
            ))
        }
    }
}

fn reduce_normalize(
    map: &RasterMap,
    labeling: &SegmentLabeling,
    reducer: Reducer,
) -> Result<RasterMap> {
    normalize01(&segment_reduce(map, labeling, reducer)?)
}

/// Velocity maps from normalized displacements: `Vc = (fr - 1) * dc`,
/// `V = |(Vx, Vy, Vz)|`, each segment-reduced and normalized.
pub fn velocity_maps(
    flow: &FlowField,
    dz: &RasterMap,
    g: &ViewingGeometry,
    labeling: &SegmentLabeling,
    reducer: Reducer,
) -> Result<VelocityMaps> {
    velocity_maps_with(flow, dz, g, labeling, reducer, ComponentScaling::Rescale)
}

/// [`velocity_maps`] with selectable component conditioning.
pub fn velocity_maps_with(
    flow: &FlowField,
    dz: &RasterMap,
    g: &ViewingGeometry,
    labeling: &SegmentLabeling,
    reducer: Reducer,
    scaling: ComponentScaling,
) -> Result<VelocityMaps> {
    g.validate()?;
    if g.frame_rate <= 1.0 {
        return Err(Error::invalid(format!(
            "frame rate must exceed 1, got {}",
            g.frame_rate
        )));
    }
    let (dxn, dyn_, dzn) = scaled_components(flow, dz, scaling)?;
    let fr = g.frame_rate;
    let vx = dxn.map(|d| velocity_component(fr, f64::from(d)) as f32);
    let vy = dyn_.map(|d| velocity_component(fr, f64::from(d)) as f32);
    let vz = dzn.map(|d| velocity_component(fr, f64::from(d)) as f32);
    let v = vx
        .zip_map(&vy, |a, b| (f64::from(a).powi(2) + f64::from(b).powi(2)) as f32)?
        .zip_map(&vz, |ab, c| {
            (f64::from(ab) + f64::from(c).powi(2)).sqrt() as f32
        })?;
    Ok(VelocityMaps {
        vx: reduce_normalize(&vx, labeling, reducer)?,
        vy: reduce_normalize(&vy, labeling, reducer)?,
        vz: reduce_normalize(&vz, labeling, reducer)?,
        v: reduce_normalize(&v, labeling, reducer)?,
    })
}

/// Pixel-level (unreduced) velocity magnitude from normalized components;
/// the acceleration map differences this across frames.
pub fn velocity_magnitude_map(
    flow: &FlowField,
    dz: &RasterMap,
    g: &ViewingGeometry,
) -> Result<RasterMap> {
    velocity_magnitude_map_with(flow, dz, g, ComponentScaling::Rescale)
}

/// [`velocity_magnitude_map`] with selectable component conditioning.
pub fn velocity_magnitude_map_with(
    flow: &FlowField,
    dz: &RasterMap,
    g: &ViewingGeometry,
    scaling: ComponentScaling,
) -> Result<RasterMap> {
    g.validate()?;
    if g.frame_rate <= 1.0 {
        return Err(Error::invalid("frame rate must exceed 1"));
    }
    let (dxn, dyn_, dzn) = scaled_components(flow, dz, scaling)?;
    let fr = g.frame_rate;
    Ok(RasterMap::from_fn(dxn.width(), dxn.height(), |x, y| {
        velocity_magnitude(
            velocity_component(fr, f64::from(dxn.get(x, y))),
            velocity_component(fr, f64::from(dyn_.get(x, y))),
            velocity_component(fr, f64::from(dzn.get(x, y))),
        ) as f32
    }))
}

/// Velocity with the Z displacement re-mapped through [`z_emphasis`]
/// before composition; segment-reduced and normalized.
pub fn z_emphasized_velocity(
    flow: &FlowField,
    dz: &RasterMap,
    g: &ViewingGeometry,
    labeling: &SegmentLabeling,
    reducer: Reducer,
) -> Result<RasterMap> {
    g.validate()?;
    if g.frame_rate <= 1.0 {
        return Err(Error::invalid("frame rate must exceed 1"));
    }
    let (dxn, dyn_, dzn) = normalized_components(flow, dz)?;
    let fr = g.frame_rate;
    let v = RasterMap::from_fn(dxn.width(), dxn.height(), |x, y| {
        velocity_magnitude(
            velocity_component(fr, f64::from(dxn.get(x, y))),
            velocity_component(fr, f64::from(dyn_.get(x, y))),
            velocity_component(fr, z_emphasis(f64::from(dzn.get(x, y)))),
        ) as f32
    });
    reduce_normalize(&v, labeling, reducer)
}

/// Relative acceleration between consecutive velocity-magnitude maps:
/// `|(fr - 1) * (V_cur - V_prev)|`, segment-reduced and normalized. The
/// first frame of a sequence (no previous velocity) emits a zero map.
pub fn acceleration_map(
    v_cur: &RasterMap,
    v_prev: Option<&RasterMap>,
    g: &ViewingGeometry,
    labeling: &SegmentLabeling,
    reducer: Reducer,
) -> Result<RasterMap> {
    g.validate()?;
    let Some(v_prev) = v_prev else {
        return Ok(RasterMap::zeros(v_cur.width(), v_cur.height()));
    };
    let raw = acceleration_raw(v_cur, v_prev, g.frame_rate)?;
    reduce_normalize(&raw.map(f32::abs), labeling, reducer)
}

/// Signed acceleration before the absolute value and shaping.
pub fn acceleration_raw(
    v_cur: &RasterMap,
    v_prev: &RasterMap,
    frame_rate: f64,
) -> Result<RasterMap> {
    v_cur.zip_map(v_prev, |c, p| {
        ((frame_rate - 1.0) * (f64::from(c) - f64::from(p))) as f32
    })
}

/// Element of surprise: rarity of each pixel's quantized (dx, dy, dz)
/// motion vector, `exp(-p / pbar)` over the joint histogram with `pbar`
/// the mean probability of occupied bins; segment-reduced. Values stay in
/// (0, 1] with no further rescaling.
pub fn surprise_map(
    flow: &FlowField,
    dz: &RasterMap,
    bins_per_axis: usize,
    labeling: &SegmentLabeling,
    reducer: Reducer,
) -> Result<RasterMap> {
    if bins_per_axis == 0 {
        return Err(Error::invalid("bins_per_axis must be positive"));
    }
    if flow.dims() != dz.dims() || flow.dims() != labeling.dims() {
        return Err(Error::dims("flow, dz, and labeling dimensions disagree"));
    }
    let axes = [&flow.dx, &flow.dy, dz];
    let ranges: Vec<(f32, f32)> = axes.iter().map(|m| m.min_max()).collect();
    let bins = bins_per_axis as u64;
    let quantize = |v: f32, (lo, hi): (f32, f32)| -> u64 {
        if hi <= lo {
            return 0;
        }
        let t = f64::from(v - lo) / f64::from(hi - lo);
        ((t * bins as f64) as u64).min(bins - 1)
    };
    let n = flow.dx.len() as f64;
    let mut counts: std::collections::HashMap<u64, u32> = Default::default();
    let mut cells = Vec::with_capacity(flow.dx.len());
    for i in 0..flow.dx.len() {
        let cell = quantize(flow.dx.as_slice()[i], ranges[0]) * bins * bins
            + quantize(flow.dy.as_slice()[i], ranges[1]) * bins
            + quantize(dz.as_slice()[i], ranges[2]);
        *counts.entry(cell).or_insert(0) += 1;
        cells.push(cell);
    }
    let occupied = counts.len() as f64;
    let (w, h) = flow.dims();
    let rarity = RasterMap::from_vec(
        w,
        h,
        cells
            .iter()
            .map(|c| {
                let p = f64::from(counts[c]) / n;
                (-p * occupied).exp() as f32
            })
            .collect(),
    )?;
    segment_reduce(&rarity, labeling, reducer)
}

/// The Dx, Dy, Dz conspicuity maps: per-frame normalized displacements,
/// segment-reduced, normalized again after reduction.
pub fn displacement_maps(
    flow: &FlowField,
    dz: &RasterMap,
    labeling: &SegmentLabeling,
    reducer: Reducer,
) -> Result<(RasterMap, RasterMap, RasterMap)> {
    displacement_maps_with(flow, dz, labeling, reducer, ComponentScaling::Rescale)
}

/// [`displacement_maps`] with selectable component conditioning.
pub fn displacement_maps_with(
    flow: &FlowField,
    dz: &RasterMap,
    labeling: &SegmentLabeling,
    reducer: Reducer,
    scaling: ComponentScaling,
) -> Result<(RasterMap, RasterMap, RasterMap)> {
    let (dxn, dyn_, dzn) = scaled_components(flow, dz, scaling)?;
    Ok((
        reduce_normalize(&dxn, labeling, reducer)?,
        reduce_normalize(&dyn_, labeling, reducer)?,
        reduce_normalize(&dzn, labeling, reducer)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};

    fn labeling_from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> u32,
    ) -> SegmentLabeling {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        SegmentLabeling::new(width, height, labels).unwrap()
    }

    fn geometry(frame_rate: f64) -> ViewingGeometry {
        let mut g = ViewingGeometry::hd_reference();
        g.frame_rate = frame_rate;
        g
    }

    fn textured(w: usize, h: usize, shift: i64) -> RasterMap {
        RasterMap::from_fn(w, h, |x, y| {
            let xs = x as i64 - shift;
            ((xs * 37 + y as i64 * 101).rem_euclid(251)) as f32
        })
    }

    #[test]
    fn standardize_yields_zero_mean_unit_variance() {
        let m = RasterMap::from_fn(16, 12, |x, y| ((x * 7 + y * 13) % 29) as f32);
        let z = standardize(&m);
        let mean = z.mean();
        let var = z
            .as_slice()
            .iter()
            .map(|&v| (f64::from(v) - mean).powi(2))
            .sum::<f64>()
            / z.len() as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-6);
        assert_eq!(standardize(&RasterMap::constant(5, 4, 3.0)), RasterMap::zeros(5, 4));
    }

    #[test]
    fn standardized_components_change_the_velocity_field() {
        let (w, h) = (20, 16);
        // Skewed dx: a few fast pixels against a slow majority, so the
        // rescaled and z-scored versions order midrange pixels differently.
        let dx = RasterMap::from_fn(w, h, |x, y| if (x + y) % 7 == 0 { 9.0 } else { 1.0 });
        let dy = RasterMap::zeros(w, h);
        let dz = RasterMap::from_fn(w, h, |x, _| (x % 3) as f32);
        let flow = FlowField::new(dx, dy, FlowSource::External).unwrap();
        let g = geometry(30.0);
        let per_pixel = labeling_from_fn(w, h, |x, y| (y * w + x) as u32);
        let rescaled =
            velocity_maps_with(&flow, &dz, &g, &per_pixel, Reducer::Mean, ComponentScaling::Rescale)
                .unwrap();
        let standardized = velocity_maps_with(
            &flow,
            &dz,
            &g,
            &per_pixel,
            Reducer::Mean,
            ComponentScaling::Standardize,
        )
        .unwrap();
        for m in [&standardized.vx, &standardized.vz, &standardized.v] {
            assert!(m.is_normalized());
        }
        assert_ne!(rescaled.v, standardized.v);
        // Default-path equivalence: the two-argument form is the rescale path.
        let default_maps = velocity_maps(&flow, &dz, &g, &per_pixel, Reducer::Mean).unwrap();
        assert_eq!(default_maps.v, rescaled.v);
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = textured(32, 24, 0);
        let flow = block_matching_flow(&f, &f, 8, 4).unwrap();
        assert_eq!(flow.dx.sum(), 0.0);
        assert_eq!(flow.dy.sum(), 0.0);
        assert_eq!(flow.source, FlowSource::BlockMatching);
    }

    #[test]
    fn translation_recovered_on_interior_blocks() {
        let prev = textured(48, 32, 0);
        let cur = textured(48, 32, 3); // content moved +3 px in x
        let flow = block_matching_flow(&prev, &cur, 8, 5).unwrap();
        // Stay left of the last block column's influence: its rightward
        // reads leave the frame, so its match (and the pixels bilinearly
        // filled from it) is unconstrained.
        for y in 2..30 {
            for x in 2..36 {
                assert_abs_diff_eq!(f64::from(flow.dx.get(x, y)), 3.0, epsilon = 1e-6);
                assert_abs_diff_eq!(f64::from(flow.dy.get(x, y)), 0.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn motion_beyond_search_saturates_at_bound() {
        // On a ramp, SAD is |u - shift| per pixel: the in-range minimum
        // sits exactly at the search bound.
        let prev = RasterMap::from_fn(40, 16, |x, _| x as f32);
        let cur = RasterMap::from_fn(40, 16, |x, _| x as f32 - 5.0);
        let flow = block_matching_flow(&prev, &cur, 8, 2).unwrap();
        assert_abs_diff_eq!(f64::from(flow.dx.get(20, 8)), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn block_matching_rejects_mismatched_frames() {
        let a = RasterMap::zeros(10, 10);
        let b = RasterMap::zeros(10, 11);
        assert!(block_matching_flow(&a, &b, 4, 2).is_err());
    }

    #[test]
    fn dz_static_scene_is_zero() {
        let d = RasterMap::constant(12, 10, 250.0);
        let flow = FlowField::zero(12, 10);
        let raw = dz_map_raw(&d, &d, &flow).unwrap();
        assert_eq!(raw.sum(), 0.0);
        assert_eq!(dz_map(&d, &d, &flow).unwrap().sum(), 0.0);
    }

    #[test]
    fn dz_detects_approaching_object() {
        let prev = RasterMap::from_fn(16, 16, |x, y| {
            if (4..8).contains(&x) && (4..8).contains(&y) { 110.0 } else { 300.0 }
        });
        let cur = RasterMap::from_fn(16, 16, |x, y| {
            if (4..8).contains(&x) && (4..8).contains(&y) { 100.0 } else { 300.0 }
        });
        let raw = dz_map_raw(&prev, &cur, &FlowField::zero(16, 16)).unwrap();
        assert_abs_diff_eq!(f64::from(raw.get(5, 5)), 10.0, epsilon = 1e-4);
        assert_abs_diff_eq!(f64::from(raw.get(0, 0)), 0.0, epsilon = 1e-4);
    }

    #[test]
    fn dz_matches_pointwise_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (w, h) = (14, 11);
        let prev = RasterMap::from_fn(w, h, |_, _| rng.random_range(50.0..400.0));
        let cur = RasterMap::from_fn(w, h, |_, _| rng.random_range(50.0..400.0));
        let dx = RasterMap::from_fn(w, h, |_, _| rng.random_range(-3.0..3.0));
        let dy = RasterMap::from_fn(w, h, |_, _| rng.random_range(-3.0..3.0));
        let flow = FlowField::new(dx, dy, FlowSource::External).unwrap();
        let got = dz_map_raw(&prev, &cur, &flow).unwrap();
        for y in 0..h {
            for x in 0..w {
                let tx = (x as f64 + f64::from(flow.dx.get(x, y))).round() as i64;
                let ty = (y as f64 + f64::from(flow.dy.get(x, y))).round() as i64;
                let cx = tx.clamp(0, w as i64 - 1) as usize;
                let cy = ty.clamp(0, h as i64 - 1) as usize;
                let want = prev.get(x, y) - cur.get(cx, cy);
                assert_eq!(got.get(x, y), want, "({x},{y})");
            }
        }
    }

    #[test]
    fn velocity_arithmetic() {
        assert_abs_diff_eq!(velocity_component(30.0, 2.0), 58.0, epsilon = 1e-12);
        assert_abs_diff_eq!(velocity_magnitude(3.0, 4.0, 0.0), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_motion_gives_zero_velocity_maps() {
        let flow = FlowField::zero(12, 9);
        let dz = RasterMap::zeros(12, 9);
        let labeling = labeling_from_fn(12, 9, |x, _| u32::from(x >= 6));
        let v = velocity_maps(&flow, &dz, &geometry(30.0), &labeling, Reducer::Mean).unwrap();
        assert_eq!(v.vx.sum() + v.vy.sum() + v.vz.sum() + v.v.sum(), 0.0);
    }

    #[test]
    fn velocity_rejects_unit_frame_rate() {
        let flow = FlowField::zero(4, 4);
        let dz = RasterMap::zeros(4, 4);
        let labeling = labeling_from_fn(4, 4, |_, _| 0);
        assert!(velocity_maps(&flow, &dz, &geometry(1.0), &labeling, Reducer::Mean).is_err());
    }

    #[test]
    fn z_emphasis_hand_values() {
        assert_eq!(z_emphasis(0.0), 0.0);
        assert_abs_diff_eq!(z_emphasis(1.0), std::f64::consts::E - 1.0, epsilon = 1e-12);
        for i in 1..=10 {
            let d = i as f64 / 10.0;
            assert!(z_emphasis(d) > d);
        }
    }

    #[test]
    fn z_emphasis_widens_gap_to_top_segment() {
        // Three vertical strips with distinct dz; planar flow zero.
        let dz = RasterMap::from_fn(18, 6, |x, _| [0.2f32, 0.5, 1.0][x / 6]);
        let flow = FlowField::zero(18, 6);
        let labeling = labeling_from_fn(18, 6, |x, _| (x / 6) as u32);
        let g = geometry(30.0);
        let plain = velocity_maps(&flow, &dz, &g, &labeling, Reducer::Mean).unwrap();
        let emph = z_emphasized_velocity(&flow, &dz, &g, &labeling, Reducer::Mean).unwrap();
        // Same ordering, but the middle segment falls further below the top.
        assert_eq!(plain.v.get(1, 1), 0.0);
        assert_eq!(emph.get(1, 1), 0.0);
        assert_eq!(plain.v.get(17, 1), 1.0);
        assert_eq!(emph.get(17, 1), 1.0);
        assert!(
            emph.get(8, 1) < plain.v.get(8, 1),
            "emphasized {} vs plain {}",
            emph.get(8, 1),
            plain.v.get(8, 1)
        );
    }

    #[test]
    fn acceleration_zero_when_velocity_constant() {
        let v = RasterMap::from_fn(10, 8, |x, y| (x + y) as f32);
        let labeling = labeling_from_fn(10, 8, |x, _| u32::from(x >= 5));
        let a = acceleration_map(&v, Some(&v), &geometry(30.0), &labeling, Reducer::Mean).unwrap();
        assert_eq!(a.sum(), 0.0);
    }

    #[test]
    fn acceleration_raw_arithmetic_and_symmetry() {
        let v_prev = RasterMap::constant(6, 6, 1.0);
        let v_up = RasterMap::constant(6, 6, 1.1);
        let v_down = RasterMap::constant(6, 6, 0.9);
        let up = acceleration_raw(&v_up, &v_prev, 30.0).unwrap();
        let down = acceleration_raw(&v_down, &v_prev, 30.0).unwrap();
        assert_abs_diff_eq!(f64::from(up.get(0, 0)), 2.9, epsilon = 1e-5);
        assert_abs_diff_eq!(f64::from(down.get(0, 0)), -2.9, epsilon = 1e-5);
        assert_abs_diff_eq!(
            f64::from(up.get(0, 0).abs()),
            f64::from(down.get(0, 0).abs()),
            epsilon = 1e-7
        );
    }

    #[test]
    fn acceleration_first_frame_is_zero_map() {
        let v = RasterMap::constant(7, 5, 3.0);
        let labeling = labeling_from_fn(7, 5, |_, _| 0);
        let a = acceleration_map(&v, None, &geometry(30.0), &labeling, Reducer::Mean).unwrap();
        assert_eq!(a.dims(), (7, 5));
        assert_eq!(a.sum(), 0.0);
    }

    #[test]
    fn surprise_uniform_motion_is_exp_minus_one() {
        let flow = FlowField {
            dx: RasterMap::constant(12, 8, 2.0),
            dy: RasterMap::constant(12, 8, -1.0),
            source: FlowSource::External,
        };
        let dz = RasterMap::constant(12, 8, 0.5);
        let labeling = labeling_from_fn(12, 8, |x, _| u32::from(x >= 6));
        let m = surprise_map(&flow, &dz, 16, &labeling, Reducer::Mean).unwrap();
        for &v in m.as_slice() {
            assert_abs_diff_eq!(f64::from(v), (-1.0f64).exp(), epsilon = 1e-6);
        }
    }

    #[test]
    fn counter_moving_object_is_surprising() {
        // Static scene with one 3x3 counter-moving block, segmented apart.
        let (w, h) = (18, 12);
        let in_block = |x: usize, y: usize| (8..11).contains(&x) && (4..7).contains(&y);
        let flow = FlowField {
            dx: RasterMap::from_fn(w, h, |x, y| if in_block(x, y) { 4.0 } else { 0.0 }),
            dy: RasterMap::zeros(w, h),
            source: FlowSource::External,
        };
        let dz = RasterMap::zeros(w, h);
        let labeling = labeling_from_fn(w, h, |x, y| u32::from(!in_block(x, y)));
        let m = surprise_map(&flow, &dz, 16, &labeling, Reducer::Mean).unwrap();
        let object = f64::from(m.get(9, 5));
        let ground = f64::from(m.get(0, 0));
        // Two bins: object holds 9/216 of mass, ground the rest.
        let n = (w * h) as f64;
        assert_abs_diff_eq!(object, (-(9.0 / n) * 2.0).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(ground, (-((n - 9.0) / n) * 2.0).exp(), epsilon = 1e-6);
        assert!(object > 0.9 && ground < 0.2);
    }

    #[test]
    fn surprise_depends_only_on_the_motion_multiset() {
        let (w, h) = (10, 10);
        let dx = RasterMap::from_fn(w, h, |x, y| ((x * 3 + y) % 5) as f32);
        let dxt = RasterMap::from_fn(w, h, |x, y| ((y * 3 + x) % 5) as f32);
        let labeling = labeling_from_fn(w, h, |_, _| 0);
        // Single segment + mean reducer: the reduced value is the mean of
        // the rarity multiset, identical for both spatial arrangements.
        let m1 = surprise_map(
            &FlowField::new(dx, RasterMap::zeros(w, h), FlowSource::External).unwrap(),
            &RasterMap::zeros(w, h),
            16,
            &labeling,
            Reducer::Mean,
        )
        .unwrap();
        let m2 = surprise_map(
            &FlowField::new(dxt, RasterMap::zeros(w, h), FlowSource::External).unwrap(),
            &RasterMap::zeros(w, h),
            16,
            &labeling,
            Reducer::Mean,
        )
        .unwrap();
        assert_abs_diff_eq!(f64::from(m1.get(0, 0)), f64::from(m2.get(0, 0)), epsilon = 1e-6);
    }

    #[test]
    fn displacement_maps_are_segment_constant_and_normalized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let (w, h) = (16, 12);
        let flow = FlowField::new(
            RasterMap::from_fn(w, h, |_, _| rng.random_range(-4.0..4.0)),
            RasterMap::from_fn(w, h, |_, _| rng.random_range(-4.0..4.0)),
            FlowSource::External,
        )
        .unwrap();
        let dz = RasterMap::from_fn(w, h, |_, _| rng.random_range(-10.0..10.0));
        let labeling = labeling_from_fn(w, h, |x, y| (x / 8 + 2 * (y / 6)) as u32);
        let (mdx, mdy, mdz) = displacement_maps(&flow, &dz, &labeling, Reducer::Mean).unwrap();
        for m in [&mdx, &mdy, &mdz] {
            assert!(m.is_normalized());
            // Segment-constant: every pixel equals its segment's value.
            for y in 0..h {
                for x in 0..w {
                    let l = labeling.label_at(x, y);
                    let (rx, ry) = (
                        (l % 2) as usize * 8,
                        (l / 2) as usize * 6,
                    );
                    assert_eq!(m.get(x, y), m.get(rx, ry));
                }
            }
        }
    }
}
