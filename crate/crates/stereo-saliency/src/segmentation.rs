//! Region partition of a frame plus the segment-level operators built on
//! it: per-segment statistics, reduction of pixel maps to segment-constant
//! maps, boundary density (edginess), compactness, and the minimum-size
//! saliency filter.
//!
//! Segmentation itself is pluggable: either the built-in mean-shift-style
//! clustering in (x, y, L*, a*, b*) or an externally produced label map
//! ingested from a 16-bit PGM.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::color::{ColorSpace, convert_color};
use crate::error::{Error, Result};
use crate::geometry::ViewingGeometry;
use crate::raster::{RasterMap, normalize01};

/// A complete partition of a frame into contiguous-id segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    k: usize,
    /// 1.0 where a pixel has a 4-neighbor with a different label.
    edge_map: RasterMap,
    stats: Vec<SegmentStats>,
}

/// Per-segment geometry summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats {
    /// Pixel count.
    pub n: usize,
    /// Centroid (x, y) in pixel coordinates.
    pub centroid: (f64, f64),
    /// Bounding box (min_x, min_y, max_x, max_y), inclusive.
    pub bbox: (usize, usize, usize, usize),
    /// Extent from the centroid upward to the segment's topmost row.
    pub d_up: f64,
    /// Extent from the centroid to the rightmost column.
    pub d_right: f64,
    /// Extent from the centroid to the bottommost row.
    pub d_down: f64,
    /// Extent from the centroid to the leftmost column.
    pub d_left: f64,
    /// Second moment about the centroid: sum of squared distances.
    pub second_moment: f64,
    /// n^2 / (2 pi * second_moment), clamped to (0, 1]; 1 for a disk.
    pub compactness: f64,
}

impl SegmentLabeling {
    /// Validates and wraps a label image. Ids must cover 0..k-1 with no
    /// gaps; every pixel must carry a label.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height || labels.is_empty() {
            return Err(Error::dims(format!(
                "label buffer holds {} entries for {}x{} frame",
                labels.len(),
                width,
                height
            )));
        }
        let k = *labels.iter().max().unwrap() as usize + 1;
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "segment ids are not contiguous: id {missing} is unused but {k} ids are implied"
            )));
        }
        let edge_map = compute_edge_map(width, height, &labels);
        let stats = compute_stats(width, height, &labels, k);
        Ok(SegmentLabeling {
            width,
            height,
            labels,
            k,
            edge_map,
            stats,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of segments.
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Binary map of segment-boundary pixels (4-connectivity).
    pub fn edge_map(&self) -> &RasterMap {
        &self.edge_map
    }

    pub fn stats(&self) -> &[SegmentStats] {
        &self.stats
    }

    /// Builds a segment-constant map from one value per segment.
    pub fn paint(&self, per_segment: &[f32]) -> Result<RasterMap> {
        if per_segment.len() != self.k {
            return Err(Error::dims(format!(
                "{} per-segment values for {} segments",
                per_segment.len(),
                self.k
            )));
        }
        let data = self
            .labels
            .iter()
            .map(|&l| per_segment[l as usize])
            .collect();
        RasterMap::from_vec(self.width, self.height, data)
    }
}

fn compute_edge_map(width: usize, height: usize, labels: &[u32]) -> RasterMap {
    RasterMap::from_fn(width, height, |x, y| {
        let l = labels[y * width + x];
        let differs = (x > 0 && labels[y * width + x - 1] != l)
            || (x + 1 < width && labels[y * width + x + 1] != l)
            || (y > 0 && labels[(y - 1) * width + x] != l)
            || (y + 1 < height && labels[(y + 1) * width + x] != l);
        if differs { 1.0 } else { 0.0 }
    })
}

fn compute_stats(width: usize, height: usize, labels: &[u32], k: usize) -> Vec<SegmentStats> {
    let mut n = vec![0usize; k];
    let mut sx = vec![0f64; k];
    let mut sy = vec![0f64; k];
    let mut bbox = vec![(usize::MAX, usize::MAX, 0usize, 0usize); k];
    for y in 0..height {
        for x in 0..width {
            let l = labels[y * width + x] as usize;
            n[l] += 1;
            sx[l] += x as f64;
            sy[l] += y as f64;
            let b = &mut bbox[l];
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
    }
    let cx: Vec<f64> = (0..k).map(|l| sx[l] / n[l] as f64).collect();
    let cy: Vec<f64> = (0..k).map(|l| sy[l] / n[l] as f64).collect();
    let mut m2 = vec![0f64; k];
    for y in 0..height {
        for x in 0..width {
            let l = labels[y * width + x] as usize;
            let dx = x as f64 - cx[l];
            let dy = y as f64 - cy[l];
            m2[l] += dx * dx + dy * dy;
        }
    }
    (0..k)
        .map(|l| {
            let compactness = if m2[l] <= f64::EPSILON {
                1.0
            } else {
                ((n[l] as f64).powi(2) / (2.0 * std::f64::consts::PI * m2[l])).clamp(0.0, 1.0)
            };
            SegmentStats {
                n: n[l],
                centroid: (cx[l], cy[l]),
                bbox: bbox[l],
                d_up: cy[l] - bbox[l].1 as f64,
                d_right: bbox[l].2 as f64 - cx[l],
                d_down: bbox[l].3 as f64 - cy[l],
                d_left: cx[l] - bbox[l].0 as f64,
                second_moment: m2[l],
                compactness,
            }
        })
        .collect()
}

/// Reads an externally produced label map (16-bit PGM, one segment id per
/// pixel) and validates it.
pub fn ingest_labels(path: &Path) -> Result<SegmentLabeling> {
    let (raw, _) = crate::io::read_gray_raw(path)?;
    let labels: Vec<u32> = raw.as_slice().iter().map(|&v| v as u32).collect();
    SegmentLabeling::new(raw.width(), raw.height(), labels)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Parameters of the built-in mean-shift-style segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    /// Spatial bandwidth in pixels.
    pub spatial_bandwidth: f64,
    /// Range bandwidth in L*a*b* units.
    pub range_bandwidth: f64,
    /// Segments smaller than this are merged into their closest neighbor.
    pub min_region: usize,
    /// Mode-seeking iteration cap.
    pub max_iterations: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            spatial_bandwidth: 7.0,
            range_bandwidth: 6.5,
            min_region: 20,
            max_iterations: 5,
        }
    }
}

/// Partitions a frame with mean-shift mode seeking in (x, y, L*, a*, b*)
/// followed by connected-region linking and minimum-size merging. Fully
/// deterministic for fixed params.
pub fn segment(
    frame: &crate::color::ColorFrame,
    params: &SegmentationParams,
) -> Result<SegmentLabeling> {
    if params.spatial_bandwidth <= 0.0 || params.range_bandwidth <= 0.0 {
        return Err(Error::invalid("segmentation bandwidths must be positive"));
    }
    let lab = convert_color(frame, ColorSpace::Lab)?;
    let (width, height) = frame.dims();
    let n = width * height;
    let hs = params.spatial_bandwidth;
    let hr = params.range_bandwidth;
    let hs2 = hs * hs;
    let hr2 = hr * hr;

    // Mode seeking: each pixel's mode drifts toward the weighted mean of
    // original samples inside its spatial/range window (flat kernel).
    let mut modes: Vec<[f64; 5]> = (0..n)
        .map(|i| {
            let (x, y) = (i % width, i / width);
            let c = lab.get(x, y);
            [
                x as f64,
                y as f64,
                f64::from(c[0]),
                f64::from(c[1]),
                f64::from(c[2]),
            ]
        })
        .collect();
    let samples = modes.clone();
    let win = hs.ceil() as i64;
    for m in modes.iter_mut() {
        for _ in 0..params.max_iterations {
            let cx = m[0].round() as i64;
            let cy = m[1].round() as i64;
            let mut acc = [0f64; 5];
            let mut count = 0usize;
            for yy in (cy - win).max(0)..=(cy + win).min(height as i64 - 1) {
                for xx in (cx - win).max(0)..=(cx + win).min(width as i64 - 1) {
                    let s = &samples[yy as usize * width + xx as usize];
                    let ds = (s[0] - m[0]).powi(2) + (s[1] - m[1]).powi(2);
                    if ds > hs2 {
                        continue;
                    }
                    let dr = (s[2] - m[2]).powi(2) + (s[3] - m[3]).powi(2) + (s[4] - m[4]).powi(2);
                    if dr > hr2 {
                        continue;
                    }
                    for c in 0..5 {
                        acc[c] += s[c];
                    }
                    count += 1;
                }
            }
            if count == 0 {
                break;
            }
            let mut shift = 0f64;
            for c in 0..5 {
                let next = acc[c] / count as f64;
                shift += (next - m[c]).powi(2);
                m[c] = next;
            }
            if shift < 1e-4 {
                break;
            }
        }
    }

    // Link 4-adjacent pixels whose converged modes are within the range
    // bandwidth; connected components become segments.
    let mut uf = UnionFind::new(n);
    let close = |a: &[f64; 5], b: &[f64; 5]| {
        (a[2] - b[2]).powi(2) + (a[3] - b[3]).powi(2) + (a[4] - b[4]).powi(2) <= hr2
    };
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if x + 1 < width && close(&modes[i], &modes[i + 1]) {
                uf.union(i, i + 1);
            }
            if y + 1 < height && close(&modes[i], &modes[i + width]) {
                uf.union(i, i + width);
            }
        }
    }

    let mut labels = relabel_contiguous(width, height, |i| uf.find(i));
    merge_small_regions(width, height, &mut labels, &samples, params.min_region);
    SegmentLabeling::new(width, height, labels)
}

/// Assigns contiguous ids in row-major first-occurrence order.
fn relabel_contiguous(width: usize, height: usize, mut root_of: impl FnMut(usize) -> usize) -> Vec<u32> {
    let n = width * height;
    let mut map = std::collections::HashMap::new();
    let mut labels = vec![0u32; n];
    for i in 0..n {
        let root = root_of(i);
        let next = map.len() as u32;
        let id = *map.entry(root).or_insert(next);
        labels[i] = id;
    }
    labels
}

/// Repeatedly merges segments below `min_region` pixels into the 4-adjacent
/// neighbor with the closest mean color. Smallest segment first; ties break
/// toward the lower label.
fn merge_small_regions(
    width: usize,
    height: usize,
    labels: &mut [u32],
    samples: &[[f64; 5]],
    min_region: usize,
) {
    if min_region <= 1 {
        return;
    }
    loop {
        let k = (*labels.iter().max().unwrap() + 1) as usize;
        if k == 1 {
            return;
        }
        let mut size = vec![0usize; k];
        let mut color = vec![[0f64; 3]; k];
        for (i, &l) in labels.iter().enumerate() {
            size[l as usize] += 1;
            for c in 0..3 {
                color[l as usize][c] += samples[i][c + 2];
            }
        }
        for l in 0..k {
            for c in 0..3 {
                color[l][c] /= size[l] as f64;
            }
        }
        let victim = (0..k)
            .filter(|&l| size[l] < min_region)
            .min_by_key(|&l| (size[l], l));
        let Some(victim) = victim else { return };

        // Closest-color 4-adjacent neighbor of the victim segment.
        let mut best: Option<(f64, u32)> = None;
        for y in 0..height {
            for x in 0..width {
                if labels[y * width + x] != victim as u32 {
                    continue;
                }
                for (nx, ny) in neighbors4(x, y, width, height) {
                    let nl = labels[ny * width + nx];
                    if nl == victim as u32 {
                        continue;
                    }
                    let d: f64 = (0..3)
                        .map(|c| (color[victim][c] - color[nl as usize][c]).powi(2))
                        .sum();
                    if best.is_none_or(|(bd, bl)| d < bd || (d == bd && nl < bl)) {
                        best = Some((d, nl));
                    }
                }
            }
        }
        let Some((_, into)) = best else { return };
        for l in labels.iter_mut() {
            if *l == victim as u32 {
                *l = into;
            }
        }
        // Re-compact ids after the merge.
        let compacted = relabel_contiguous(width, height, |i| labels[i] as usize);
        labels.copy_from_slice(&compacted);
    }
}

fn neighbors4(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> impl Iterator<Item = (usize, usize)> {
    [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ]
    .into_iter()
    .filter(move |&(nx, ny)| nx < width && ny < height)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Lower root wins, keeping first-occurrence order stable.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Reduction operator for [`segment_reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    #[default]
    Mean,
    Median,
    Min,
    Max,
}

/// Replaces every pixel with `reducer` applied over its segment, producing
/// a segment-constant map.
pub fn segment_reduce(
    map: &RasterMap,
    labeling: &SegmentLabeling,
    reducer: Reducer,
) -> Result<RasterMap> {
    if map.dims() != labeling.dims() {
        return Err(Error::dims(format!(
            "map {:?} vs labeling {:?}",
            map.dims(),
            labeling.dims()
        )));
    }
    let k = labeling.k();
    let per_segment: Vec<f32> = match reducer {
        Reducer::Mean => {
            let mut sum = vec![0f64; k];
            let mut n = vec![0usize; k];
            for (i, &l) in labeling.labels().iter().enumerate() {
                sum[l as usize] += f64::from(map.as_slice()[i]);
                n[l as usize] += 1;
            }
            (0..k).map(|l| (sum[l] / n[l] as f64) as f32).collect()
        }
        Reducer::Min | Reducer::Max => {
            let init = if reducer == Reducer::Min {
                f32::INFINITY
            } else {
                f32::NEG_INFINITY
            };
            let mut acc = vec![init; k];
            for (i, &l) in labeling.labels().iter().enumerate() {
                let v = map.as_slice()[i];
                let a = &mut acc[l as usize];
                *a = if reducer == Reducer::Min {
                    a.min(v)
                } else {
                    a.max(v)
                };
            }
            acc
        }
        Reducer::Median => {
            let mut buckets: Vec<Vec<f32>> = vec![Vec::new(); k];
            for (i, &l) in labeling.labels().iter().enumerate() {
                buckets[l as usize].push(map.as_slice()[i]);
            }
            buckets
                .into_iter()
                .map(|mut b| {
                    b.sort_by(f32::total_cmp);
                    let m = b.len() / 2;
                    if b.len() % 2 == 1 {
                        b[m]
                    } else {
                        (b[m - 1] + b[m]) / 2.0
                    }
                })
                .collect()
        }
    };
    labeling.paint(&per_segment)
}

/// Boundary pixels per unit segment area, before per-frame normalization.
pub fn edginess_raw(labeling: &SegmentLabeling) -> RasterMap {
    let k = labeling.k();
    let mut edge_count = vec![0f64; k];
    for (i, &l) in labeling.labels().iter().enumerate() {
        edge_count[l as usize] += f64::from(labeling.edge_map().as_slice()[i]);
    }
    let per_segment: Vec<f32> = (0..k)
        .map(|l| (edge_count[l] / labeling.stats()[l].n as f64) as f32)
        .collect();
    labeling.paint(&per_segment).expect("k matches labeling")
}

/// Segment-constant edginess, normalized to [0,1] over the frame.
pub fn edginess(labeling: &SegmentLabeling) -> RasterMap {
    normalize01(&edginess_raw(labeling)).expect("edginess_raw is finite")
}

/// Segment-constant compactness in (0, 1]; disk-shaped segments score near
/// 1, elongated or scattered ones lower.
pub fn compactness_map(labeling: &SegmentLabeling) -> RasterMap {
    let per_segment: Vec<f32> = labeling
        .stats()
        .iter()
        .map(|s| s.compactness as f32)
        .collect();
    labeling.paint(&per_segment).expect("k matches labeling")
}

/// Binary keep-mask: 0 over segments whose bounding box is smaller than 1%
/// of the resolution in both directions, 1 elsewhere.
pub fn size_filter(labeling: &SegmentLabeling, g: &ViewingGeometry) -> Result<RasterMap> {
    g.validate()?;
    let min_w = 0.01 * g.res_w as f64;
    let min_h = 0.01 * g.res_h as f64;
    let per_segment: Vec<f32> = labeling
        .stats()
        .iter()
        .map(|s| {
            let bw = (s.bbox.2 - s.bbox.0 + 1) as f64;
            let bh = (s.bbox.3 - s.bbox.1 + 1) as f64;
            if bw < min_w && bh < min_h { 0.0 } else { 1.0 }
        })
        .collect();
    labeling.paint(&per_segment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::ColorFrame;
    use approx::assert_abs_diff_eq;

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

    #[test]
    fn contiguity_validation() {
        // Ids {0, 2}: id 1 missing.
        assert!(SegmentLabeling::new(2, 1, vec![0, 2]).is_err());
        assert!(SegmentLabeling::new(2, 1, vec![0, 1]).is_ok());
        assert!(SegmentLabeling::new(2, 2, vec![0, 1]).is_err());
    }

    #[test]
    fn uniform_frame_segments_to_one_region() {
        let frame = ColorFrame::rgb8_from_fn(24, 18, |_, _| [120.0, 130.0, 140.0]);
        let s = segment(&frame, &SegmentationParams::default()).unwrap();
        assert_eq!(s.k(), 1);
        assert_eq!(s.edge_map().sum(), 0.0);
    }

    #[test]
    fn two_tone_halves_split_at_seam() {
        let w = 32;
        let frame = ColorFrame::rgb8_from_fn(w, 20, |x, _| {
            if x < w / 2 {
                [200.0, 40.0, 40.0]
            } else {
                [40.0, 40.0, 200.0]
            }
        });
        let s = segment(&frame, &SegmentationParams::default()).unwrap();
        assert_eq!(s.k(), 2);
        for y in 0..20 {
            for x in 0..w {
                let is_edge = s.edge_map().get(x, y) > 0.0;
                assert_eq!(is_edge, x == w / 2 - 1 || x == w / 2, "({x},{y})");
            }
        }
    }

    #[test]
    fn four_quadrants_recovered_with_centroids() {
        let n = 40;
        let frame = ColorFrame::rgb8_from_fn(n, n, |x, y| {
            match (x < n / 2, y < n / 2) {
                (true, true) => [220.0, 30.0, 30.0],
                (false, true) => [30.0, 220.0, 30.0],
                (true, false) => [30.0, 30.0, 220.0],
                (false, false) => [220.0, 220.0, 30.0],
            }
        });
        let s = segment(&frame, &SegmentationParams::default()).unwrap();
        assert_eq!(s.k(), 4);
        // Quadrant centers: 0..19 has centroid 9.5, 20..39 has 29.5.
        let mut found = [false; 4];
        for st in s.stats() {
            assert_eq!(st.n, (n / 2) * (n / 2));
            for (q, &(ex, ey)) in [(9.5, 9.5), (29.5, 9.5), (9.5, 29.5), (29.5, 29.5)]
                .iter()
                .enumerate()
            {
                if (st.centroid.0 - ex).abs() <= 1.0 && (st.centroid.1 - ey).abs() <= 1.0 {
                    found[q] = true;
                }
            }
        }
        assert!(found.iter().all(|&f| f), "centroids {found:?}");
    }

    #[test]
    fn segmentation_is_deterministic() {
        let frame = ColorFrame::rgb8_from_fn(30, 22, |x, y| {
            [
                (x * 8 % 256) as f32,
                (y * 11 % 256) as f32,
                ((x + y) * 5 % 256) as f32,
            ]
        });
        let a = segment(&frame, &SegmentationParams::default()).unwrap();
        let b = segment(&frame, &SegmentationParams::default()).unwrap();
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn reduce_single_segment_gives_global_mean() {
        let map = RasterMap::from_fn(8, 4, |x, y| (x + y) as f32);
        let s = labeling_from_fn(8, 4, |_, _| 0);
        let r = segment_reduce(&map, &s, Reducer::Mean).unwrap();
        let mean = map.mean() as f32;
        for &v in r.as_slice() {
            assert_abs_diff_eq!(v, mean, epsilon = 1e-6);
        }
    }

    #[test]
    fn reduce_is_identity_on_segment_constant_input() {
        let s = labeling_from_fn(10, 10, |x, _| if x < 5 { 0 } else { 1 });
        let map = RasterMap::from_fn(10, 10, |x, _| if x < 5 { 0.25 } else { 0.75 });
        let r = segment_reduce(&map, &s, Reducer::Mean).unwrap();
        assert_eq!(r.as_slice(), map.as_slice());
    }

    #[test]
    fn reduce_checkerboard_hand_means() {
        let s = labeling_from_fn(6, 6, |x, y| ((x + y) % 2) as u32);
        let map = RasterMap::from_fn(6, 6, |x, y| ((x + y) % 2) as f32);
        let r = segment_reduce(&map, &s, Reducer::Mean).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                assert_abs_diff_eq!(r.get(x, y), ((x + y) % 2) as f32, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn reduce_mean_preserves_global_mean() {
        let map = RasterMap::from_fn(17, 13, |x, y| ((x * 31 + y * 7) % 97) as f32 / 97.0);
        let s = labeling_from_fn(17, 13, |x, y| ((x / 3 + y / 2) % 5) as u32);
        let r = segment_reduce(&map, &s, Reducer::Mean).unwrap();
        assert_abs_diff_eq!(r.mean(), map.mean(), epsilon = 1e-6);
    }

    #[test]
    fn reduce_other_reducers() {
        let s = labeling_from_fn(4, 1, |x, _| (x / 2) as u32);
        let map = RasterMap::from_vec(4, 1, vec![1.0, 5.0, 2.0, 8.0]).unwrap();
        let mins = segment_reduce(&map, &s, Reducer::Min).unwrap();
        assert_eq!(mins.as_slice(), &[1.0, 1.0, 2.0, 2.0]);
        let maxs = segment_reduce(&map, &s, Reducer::Max).unwrap();
        assert_eq!(maxs.as_slice(), &[5.0, 5.0, 8.0, 8.0]);
        let med = segment_reduce(&map, &s, Reducer::Median).unwrap();
        assert_eq!(med.as_slice(), &[3.0, 3.0, 5.0, 5.0]);
    }

    #[test]
    fn edginess_single_segment_is_zero() {
        let s = labeling_from_fn(9, 9, |_, _| 0);
        assert_eq!(edginess_raw(&s).sum(), 0.0);
        assert_eq!(edginess(&s).sum(), 0.0);
    }

    #[test]
    fn edginess_two_halves_is_two_over_n() {
        let n = 16;
        let s = labeling_from_fn(n, n, |x, _| if x < n / 2 { 0 } else { 1 });
        let raw = edginess_raw(&s);
        for &v in raw.as_slice() {
            assert_abs_diff_eq!(v, 2.0 / n as f32, epsilon = 1e-7);
        }
    }

    #[test]
    fn tiny_segments_score_higher_edginess() {
        // 2x2 blocks on the left column vs one large region.
        let s = labeling_from_fn(12, 12, |x, y| {
            if x < 2 { (y / 2) as u32 } else { 6 }
        });
        let raw = edginess_raw(&s);
        let tiny = raw.get(0, 0);
        let large = raw.get(11, 11);
        assert!(tiny > large);
    }

    #[test]
    fn compactness_of_disk_is_near_one() {
        let r = 20i64;
        let side = (2 * r + 3) as usize;
        let c = (side / 2) as i64;
        let s = labeling_from_fn(side, side, |x, y| {
            let (dx, dy) = (x as i64 - c, y as i64 - c);
            if dx * dx + dy * dy <= r * r { 0 } else { 1 }
        });
        let disk_label = s.label_at(c as usize, c as usize) as usize;
        let comp = s.stats()[disk_label].compactness;
        assert!((comp - 1.0).abs() <= 0.05, "disk compactness {comp}");
    }

    #[test]
    fn compactness_of_line_matches_formula() {
        let n = 50usize;
        let s = labeling_from_fn(n, 2, |_, y| y as u32);
        let line = s.stats()[0].compactness;
        let expected = 6.0 * n as f64 / (std::f64::consts::PI * ((n * n - 1) as f64));
        assert_abs_diff_eq!(line, expected, epsilon = 1e-9);
    }

    #[test]
    fn square_more_compact_than_rectangle() {
        // 16x16 square and 4x64 rectangle, both 256 px.
        let sq = labeling_from_fn(16, 16, |_, _| 0).stats()[0].compactness;
        let rect = labeling_from_fn(64, 4, |_, _| 0).stats()[0].compactness;
        assert!(sq > rect, "square {sq} vs rectangle {rect}");
    }

    #[test]
    fn size_filter_masks_tiny_segments() {
        let g = ViewingGeometry::hd_reference();
        // 1920x1080 frame: thresholds 19.2 and 10.8.
        let s = labeling_from_fn(1920, 1080, |x, y| {
            if x < 5 && y < 5 {
                1
            } else if x >= 100 && x < 125 && y >= 100 && y < 125 {
                2
            } else {
                0
            }
        });
        let mask = size_filter(&s, &g).unwrap();
        assert_eq!(mask.get(2, 2), 0.0, "5x5 segment masked");
        assert_eq!(mask.get(110, 110), 1.0, "25x25 segment kept");
        assert_eq!(mask.get(1000, 1000), 1.0, "large segment kept");
    }

    #[test]
    fn relabeling_invariance_of_downstream_maps() {
        let s = labeling_from_fn(12, 9, |x, y| ((x / 4) + 3 * (y / 3)) as u32);
        let k = s.k() as u32;
        // Reverse the ids.
        let permuted: Vec<u32> = s.labels().iter().map(|&l| k - 1 - l).collect();
        let s2 = SegmentLabeling::new(12, 9, permuted).unwrap();
        let map = RasterMap::from_fn(12, 9, |x, y| ((x * y) % 7) as f32);
        assert_eq!(
            segment_reduce(&map, &s, Reducer::Mean).unwrap().as_slice(),
            segment_reduce(&map, &s2, Reducer::Mean).unwrap().as_slice()
        );
        assert_eq!(edginess(&s).as_slice(), edginess(&s2).as_slice());
        assert_eq!(
            compactness_map(&s).as_slice(),
            compactness_map(&s2).as_slice()
        );
    }

    #[test]
    fn ingest_rejects_non_contiguous_external_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.pgm");
        // Ids {0, 3}: holes at 1 and 2.
        let raw = RasterMap::from_vec(2, 1, vec![0.0, 3.0]).unwrap();
        crate::io::write_map(&path, &raw.map(|v| v / 65535.0), crate::io::BitDepth::Sixteen)
            .unwrap();
        // Quantization keeps exact small integers? 3/65535*65535 = 3. Yes.
        let err = ingest_labels(&path).unwrap_err();
        assert!(err.to_string().contains("contiguous"), "{err}");
    }

    #[test]
    fn ingest_roundtrip_of_valid_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.pgm");
        let raw = RasterMap::from_vec(3, 2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]).unwrap();
        crate::io::write_map(&path, &raw.map(|v| v / 65535.0), crate::io::BitDepth::Sixteen)
            .unwrap();
        let s = ingest_labels(&path).unwrap();
        assert_eq!(s.k(), 3);
        assert_eq!(s.labels(), &[0, 0, 1, 1, 2, 2]);
    }
}
