//! Brightness, color, and texture conspicuity maps, including the
//! fovea-weighted center-surround operator shared by several of them.

use crate::color::{ColorFrame, ColorSpace, convert_color, rgb8_to_xyz};
use crate::error::{Error, Result};
use crate::gabor::{GaborBank, GaborParams};
use crate::geometry::FoveaMask;
use crate::raster::{RasterMap, normalize01};
use crate::segmentation::{SegmentLabeling, edginess};
use serde::{Deserialize, Serialize};

/// Neighborhood statistic used by the variance-contrast maps: deviations
/// measured from the center pixel (the default), or from the neighborhood
/// mean (classical variance, available as an ablation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    #[default]
    CenterDeviation,
    Classical,
}

/// Local variance in the foveal disk, deviations measured from the center
/// pixel: `var(x) = sum_{i in disk, i != x} (Y_x - Y_i)^2 / (m - 1)` where
/// m is the number of surrounding pixels. Returned unnormalized.
pub fn local_variance_raw(y: &RasterMap, fovea: &FoveaMask) -> Result<RasterMap> {
    local_variance_raw_with(y, fovea, VarianceMode::CenterDeviation)
}

/// [`local_variance_raw`] with a selectable deviation reference.
pub fn local_variance_raw_with(
    y: &RasterMap,
    fovea: &FoveaMask,
    mode: VarianceMode,
) -> Result<RasterMap> {
    let m = fovea.len().saturating_sub(1);
    if m < 2 {
        return Err(Error::invalid(
            "local variance needs a neighborhood of at least 2 surrounding pixels",
        ));
    }
    // Clamped per-row prefix sums make the disk sums O(radius) per pixel.
    let sums = DiskSums::new(y, fovea);
    Ok(RasterMap::from_fn(y.width(), y.height(), |x, yy| {
        let c = f64::from(y.get(x, yy));
        let (s1, s2) = sums.at(x, yy);
        // Exclude the center sample from the disk sums.
        let s1 = s1 - c;
        let s2 = s2 - c * c;
        let var = match mode {
            VarianceMode::CenterDeviation => {
                (s2 - 2.0 * c * s1 + m as f64 * c * c) / (m as f64 - 1.0)
            }
            VarianceMode::Classical => (s2 - s1 * s1 / m as f64) / (m as f64 - 1.0),
        };
        var.max(0.0) as f32
    }))
}

/// [`local_variance_raw`] normalized to [0,1] per frame.
pub fn local_variance(y: &RasterMap, fovea: &FoveaMask) -> Result<RasterMap> {
    local_variance_with(y, fovea, VarianceMode::CenterDeviation)
}

/// [`local_variance`] with a selectable deviation reference.
pub fn local_variance_with(
    y: &RasterMap,
    fovea: &FoveaMask,
    mode: VarianceMode,
) -> Result<RasterMap> {
    normalize01(&local_variance_raw_with(y, fovea, mode)?)
}

/// Per-row clamped prefix sums over the fovea disk support.
struct DiskSums {
    prefix1: Vec<f64>,
    prefix2: Vec<f64>,
    width: usize,
    height: usize,
    halfwidths: Vec<i64>,
    radius: i64,
}

impl DiskSums {
    fn new(map: &RasterMap, fovea: &FoveaMask) -> Self {
        let (w, h) = map.dims();
        let r = fovea.radius() as i64;
        // Half-width of the disk at each vertical offset.
        let mut halfwidths = vec![0i64; (2 * r + 1) as usize];
        for &(dx, dy) in fovea.offsets() {
            let e = &mut halfwidths[(dy as i64 + r) as usize];
            *e = (*e).max(dx.abs() as i64);
        }
        let mut prefix1 = vec![0f64; (w + 1) * h];
        let mut prefix2 = vec![0f64; (w + 1) * h];
        for y in 0..h {
            for x in 0..w {
                let v = f64::from(map.get(x, y));
                prefix1[y * (w + 1) + x + 1] = prefix1[y * (w + 1) + x] + v;
                prefix2[y * (w + 1) + x + 1] = prefix2[y * (w + 1) + x] + v * v;
            }
        }
        DiskSums {
            prefix1,
            prefix2,
            width: w,
            height: h,
            halfwidths,
            radius: r,
        }
    }

    /// Row-range sum with replicate clamping outside [0, w).
    fn row_sum(&self, prefix: &[f64], y: usize, x0: i64, x1: i64) -> f64 {
        let w = self.width as i64;
        let row = &prefix[y * (self.width + 1)..(y + 1) * (self.width + 1)];
        let left_over = (-x0).max(0) as f64;
        let right_over = (x1 - (w - 1)).max(0) as f64;
        let a = x0.clamp(0, w - 1) as usize;
        let b = x1.clamp(0, w - 1) as usize;
        let core = row[b + 1] - row[a];
        let first = row[1] - row[0];
        let last = row[self.width] - row[self.width - 1];
        core + left_over * first + right_over * last
    }

    /// (sum, sum of squares) over the full disk centered at (x, y), with
    /// replicate clamping at the borders.
    fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let mut s1 = 0f64;
        let mut s2 = 0f64;
        for dy in -self.radius..=self.radius {
            let half = self.halfwidths[(dy + self.radius) as usize];
            let yy = (y as i64 + dy).clamp(0, self.height as i64 - 1) as usize;
            let x0 = x as i64 - half;
            let x1 = x as i64 + half;
            s1 += self.row_sum(&self.prefix1, yy, x0, x1);
            s2 += self.row_sum(&self.prefix2, yy, x0, x1);
        }
        (s1, s2)
    }
}

/// Center-surround globalization: per segment K,
/// `S_K = (1/n_K) * sum_{i in K} sum_{j in disk(i), j != i} |base(i) - base(j)| * w(j)`.
/// Returns the raw per-segment values.
pub fn center_surround_raw(
    base: &RasterMap,
    fovea: &FoveaMask,
    labeling: &SegmentLabeling,
) -> Result<Vec<f64>> {
    if base.dims() != labeling.dims() {
        return Err(Error::dims(format!(
            "base {:?} vs labeling {:?}",
            base.dims(),
            labeling.dims()
        )));
    }
    let k = labeling.k();
    let mut acc = vec![0f64; k];
    let offsets = fovea.offsets();
    let weights = fovea.weights();
    for y in 0..base.height() {
        for x in 0..base.width() {
            let center = f64::from(base.get(x, y));
            let mut s = 0f64;
            for (idx, &(dx, dy)) in offsets.iter().enumerate() {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let v = f64::from(base.get_clamped(x as isize + dx as isize, y as isize + dy as isize));
                s += (center - v).abs() * weights[idx];
            }
            acc[labeling.label_at(x, y) as usize] += s;
        }
    }
    for (l, a) in acc.iter_mut().enumerate() {
        *a /= labeling.stats()[l].n as f64;
    }
    Ok(acc)
}

/// Segment-constant center-surround map, normalized to [0,1].
pub fn center_surround(
    base: &RasterMap,
    fovea: &FoveaMask,
    labeling: &SegmentLabeling,
) -> Result<RasterMap> {
    let raw = center_surround_raw(base, fovea, labeling)?;
    let per_segment: Vec<f32> = raw.iter().map(|&v| v as f32).collect();
    normalize01(&labeling.paint(&per_segment)?)
}

/// Brightness variance contrast and brightness contrast maps from the luma
/// channel: center-surround over the local-variance map and over the luma
/// map itself.
pub fn brightness_maps(
    frame: &ColorFrame,
    fovea: &FoveaMask,
    labeling: &SegmentLabeling,
) -> Result<(RasterMap, RasterMap)> {
    brightness_maps_with(frame, fovea, labeling, VarianceMode::CenterDeviation)
}

/// [`brightness_maps`] with a selectable variance statistic.
pub fn brightness_maps_with(
    frame: &ColorFrame,
    fovea: &FoveaMask,
    labeling: &SegmentLabeling,
    mode: VarianceMode,
) -> Result<(RasterMap, RasterMap)> {
    let yuv = convert_color(frame, ColorSpace::Yuv)?;
    let y = yuv.channel(0);
    let variance = local_variance_with(&y, fovea, mode)?;
    let variance_contrast = center_surround(&variance, fovea, labeling)?;
    let contrast = center_surround(&y, fovea, labeling)?;
    Ok((variance_contrast, contrast))
}

/// Rarity of each pixel's quantized RGB color: `exp(-P / Pbar)` where P is
/// the color's joint-histogram probability and Pbar the mean probability
/// over occupied bins. Values lie in (0, 1]; no further rescaling.
pub fn color_histogram_map(frame: &ColorFrame, bins_per_channel: usize) -> Result<RasterMap> {
    if frame.space() != ColorSpace::Rgb8 {
        return Err(Error::invalid("histogram rarity expects an RGB frame"));
    }
    if bins_per_channel == 0 || bins_per_channel > 256 {
        return Err(Error::invalid("bins_per_channel must lie in 1..=256"));
    }
    let bins = bins_per_channel as u32;
    let quantize = |c: f32| -> u32 {
        (((c / 256.0) * bins as f32) as u32).min(bins - 1)
    };
    let n = frame.pixels().len() as f64;
    let mut counts: std::collections::HashMap<u32, u32> = Default::default();
    let mut indices = Vec::with_capacity(frame.pixels().len());
    for px in frame.pixels() {
        let idx = (quantize(px[0]) * bins + quantize(px[1])) * bins + quantize(px[2]);
        *counts.entry(idx).or_insert(0) += 1;
        indices.push(idx);
    }
    let occupied = counts.len() as f64;
    let (w, h) = frame.dims();
    let data = indices
        .iter()
        .map(|idx| {
            let p = f64::from(counts[idx]) / n;
            (-p * occupied).exp() as f32
        })
        .collect();
    RasterMap::from_vec(w, h, data)
}

/// Center-surround variance contrast over the a* and b* chroma channels.
pub fn color_variance_contrast(
    frame: &ColorFrame,
    fovea: &FoveaMask,
    labeling: &SegmentLabeling,
) -> Result<(RasterMap, RasterMap)> {
    color_variance_contrast_with(frame, fovea, labeling, VarianceMode::CenterDeviation)
}

/// [`color_variance_contrast`] with a selectable variance statistic.
pub fn color_variance_contrast_with(
    frame: &ColorFrame,
    fovea: &FoveaMask,
    labeling: &SegmentLabeling,
    mode: VarianceMode,
) -> Result<(RasterMap, RasterMap)> {
    let lab = convert_color(frame, ColorSpace::Lab)?;
    let a = lab.channel(1);
    let b = lab.channel(2);
    let a_map = center_surround(&local_variance_with(&a, fovea, mode)?, fovea, labeling)?;
    let b_map = center_surround(&local_variance_with(&b, fovea, mode)?, fovea, labeling)?;
    Ok((a_map, b_map))
}

/// Correlated color temperature from CIE 1931 xy chromaticity via the
/// McCamy cubic. Chromaticities below the isotemperature epicenter
/// (y < 0.1858), where the cubic leaves its validity domain, are treated
/// as the cold extreme. Output clamped to [1000, 25000] K.
pub fn mccamy_cct(x: f64, y: f64) -> f64 {
    if y <= 0.1858 + 1e-9 {
        return 25000.0;
    }
    let n = (x - 0.3320) / (0.1858 - y);
    let cct = 449.0 * n.powi(3) + 3525.0 * n.powi(2) + 6823.3 * n + 5520.33;
    cct.clamp(1000.0, 25000.0)
}

/// Warmth map: inverse correlated color temperature, rescaled to [0,1]
/// per frame (warm colors are low-temperature).
pub fn warmth_map(frame: &ColorFrame) -> Result<RasterMap> {
    if frame.space() != ColorSpace::Rgb8 {
        return Err(Error::invalid("warmth expects an RGB frame"));
    }
    let (w, h) = frame.dims();
    let data: Vec<f32> = frame
        .pixels()
        .iter()
        .map(|&px| {
            let (xx, yy, zz) = rgb8_to_xyz(px);
            let s = xx + yy + zz;
            let (cx, cy) = if s < 1e-9 {
                // Black carries no chromaticity; use the D65 white point.
                (0.31271, 0.32902)
            } else {
                (xx / s, yy / s)
            };
            (1.0 / mccamy_cct(cx, cy)) as f32
        })
        .collect();
    normalize01(&RasterMap::from_vec(w, h, data)?)
}

/// Saturation of one L*a*b* triple: chroma over the chroma-lightness
/// hypotenuse; 0 when both are 0.
pub fn saturation_value(l: f64, a: f64, b: f64) -> f64 {
    let chroma = (a * a + b * b).sqrt();
    let denom = (chroma * chroma + l * l).sqrt();
    if denom < 1e-12 { 0.0 } else { chroma / denom }
}

/// Per-pixel saturation map in [0,1] by construction.
pub fn saturation_map(frame: &ColorFrame) -> Result<RasterMap> {
    let lab = convert_color(frame, ColorSpace::Lab)?;
    let (w, h) = frame.dims();
    let data = lab
        .pixels()
        .iter()
        .map(|&[l, a, b]| saturation_value(f64::from(l), f64::from(a), f64::from(b)) as f32)
        .collect();
    RasterMap::from_vec(w, h, data)
}

/// One row of the spectral sensitivity lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRow {
    pub wavelength_nm: f64,
    pub rgb: [f32; 3],
    pub sensitivity: f64,
}

/// Spectral colors with their photopic sensitivity, sorted by wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable {
    rows: Vec<SpectralRow>,
}

/// Shipped photopic sensitivity table.
pub const DEFAULT_SPECTRAL_TABLE: &str = include_str!("../../data/spectral_sensitivity.csv");

impl SpectralTable {
    pub fn new(mut rows: Vec<SpectralRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("spectral table is empty"));
        }
        for r in &rows {
            if !(0.0..=1.0).contains(&r.sensitivity) {
                return Err(Error::invalid(format!(
                    "sensitivity {} outside [0,1]",
                    r.sensitivity
                )));
            }
        }
        rows.sort_by(|a, b| a.wavelength_nm.total_cmp(&b.wavelength_nm));
        Ok(SpectralTable { rows })
    }

    /// Parses CSV lines `wavelength_nm, r, g, b, sensitivity`; `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::invalid(format!(
                    "spectral table line {}: expected 5 fields, got {}",
                    i + 1,
                    fields.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|e| Error::invalid(format!("spectral table line {}: {e}", i + 1)))
            };
            rows.push(SpectralRow {
                wavelength_nm: num(fields[0])?,
                rgb: [
                    num(fields[1])? as f32,
                    num(fields[2])? as f32,
                    num(fields[3])? as f32,
                ],
                sensitivity: num(fields[4])?,
            });
        }
        SpectralTable::new(rows)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        SpectralTable::parse(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn shipped_default() -> Self {
        SpectralTable::parse(DEFAULT_SPECTRAL_TABLE).expect("shipped table is valid")
    }

    pub fn rows(&self) -> &[SpectralRow] {
        &self.rows
    }

    /// Sensitivity of the nearest spectral color by squared RGB distance;
    /// exact ties go to the lower wavelength (rows are wavelength-sorted
    /// and only a strictly smaller distance displaces the running best).
    pub fn sensitivity_for(&self, rgb: [f32; 3]) -> f64 {
        let mut best = (f64::INFINITY, 0.0f64);
        for row in &self.rows {
            let d: f64 = (0..3)
                .map(|c| (f64::from(rgb[c]) - f64::from(row.rgb[c])).powi(2))
                .sum();
            if d < best.0 {
                best = (d, row.sensitivity);
            }
        }
        best.1
    }
}

/// Per-pixel photopic sensitivity of the nearest spectral color.
pub fn hvs_sensitivity_map(frame: &ColorFrame, table: &SpectralTable) -> Result<RasterMap> {
    if frame.space() != ColorSpace::Rgb8 {
        return Err(Error::invalid("spectral sensitivity expects an RGB frame"));
    }
    let (w, h) = frame.dims();
    let data = frame
        .pixels()
        .iter()
        .map(|&px| table.sensitivity_for(px) as f32)
        .collect();
    RasterMap::from_vec(w, h, data)
}

/// Reference colors ranked by empirically received attention.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorRankTable {
    rows: Vec<([f32; 3], f64)>,
}

/// Shipped placeholder ranking of twelve colors.
pub const DEFAULT_COLOR_RANK_TABLE: &str = include_str!("../../data/empirical_colors.csv");

impl ColorRankTable {
    pub fn new(rows: Vec<([f32; 3], f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("color rank table is empty"));
        }
        for (_, p) in &rows {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::invalid(format!("probability {p} outside [0,1]")));
            }
        }
        if rows.len() != 12 {
            eprintln!(
                "warning: color rank table has {} rows (12 expected); proceeding",
                rows.len()
            );
        }
        Ok(ColorRankTable { rows })
    }

    /// Parses CSV lines `name, r, g, b, probability`; `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::invalid(format!(
                    "color rank table line {}: expected 5 fields, got {}",
                    i + 1,
                    fields.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|e| Error::invalid(format!("color rank table line {}: {e}", i + 1)))
            };
            rows.push((
                [
                    num(fields[1])? as f32,
                    num(fields[2])? as f32,
                    num(fields[3])? as f32,
                ],
                num(fields[4])?,
            ));
        }
        ColorRankTable::new(rows)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ColorRankTable::parse(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn shipped_default() -> Self {
        ColorRankTable::parse(DEFAULT_COLOR_RANK_TABLE).expect("shipped table is valid")
    }

    pub fn rows(&self) -> &[([f32; 3], f64)] {
        &self.rows
    }

    /// Probability of the nearest color by mean squared RGB error; exact
    /// ties go to the earlier (higher-ranked) row.
    pub fn probability_for(&self, rgb: [f32; 3]) -> f64 {
        let mut best = (f64::INFINITY, 0.0f64);
        for (c, p) in &self.rows {
            let mse: f64 = (0..3)
                .map(|i| (f64::from(rgb[i]) - f64::from(c[i])).powi(2))
                .sum::<f64>()
                / 3.0;
            if mse < best.0 {
                best = (mse, *p);
            }
        }
        best.1
    }
}

/// Per-pixel attention probability of the nearest ranked color.
pub fn empirical_color_map(frame: &ColorFrame, table: &ColorRankTable) -> Result<RasterMap> {
    if frame.space() != ColorSpace::Rgb8 {
        return Err(Error::invalid("empirical color map expects an RGB frame"));
    }
    let (w, h) = frame.dims();
    let data = frame
        .pixels()
        .iter()
        .map(|&px| table.probability_for(px) as f32)
        .collect();
    RasterMap::from_vec(w, h, data)
}

/// Convolves a map with the foveal weighting mask (weights sum to 1).
pub fn fovea_convolve(map: &RasterMap, fovea: &FoveaMask) -> RasterMap {
    RasterMap::from_fn(map.width(), map.height(), |x, y| {
        let mut s = 0f64;
        for (i, &(dx, dy)) in fovea.offsets().iter().enumerate() {
            let v = map.get_clamped(x as isize + dx as isize, y as isize + dy as isize);
            s += f64::from(v) * fovea.weights()[i];
        }
        s as f32
    })
}

/// Texture conspicuity: Gabor energy over the luma channel, smoothed by
/// the foveal mask, weighted by segment edginess, normalized to [0,1].
pub fn texture_map(
    frame: &ColorFrame,
    fovea: &FoveaMask,
    labeling: &SegmentLabeling,
    params: &GaborParams,
) -> Result<RasterMap> {
    let bank = GaborBank::new(params)?;
    texture_map_with_bank(frame, fovea, labeling, &bank)
}

/// [`texture_map`] with a prebuilt filter bank (cheaper across frames).
pub fn texture_map_with_bank(
    frame: &ColorFrame,
    fovea: &FoveaMask,
    labeling: &SegmentLabeling,
    bank: &GaborBank,
) -> Result<RasterMap> {
    let yuv = convert_color(frame, ColorSpace::Yuv)?;
    let energy = bank.energy(&yuv.channel(0));
    let smoothed = fovea_convolve(&energy, fovea);
    let weighted = smoothed.zip_map(&edginess(labeling), |e, w| e * w)?;
    normalize01(&weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DensityProfile, build_fovea_mask_with_radius};
    use crate::segmentation::SegmentLabeling;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};

    fn flat_mask(radius: usize) -> FoveaMask {
        build_fovea_mask_with_radius(radius, &DensityProfile::flat()).unwrap()
    }

    fn shipped_mask(radius: usize) -> FoveaMask {
        build_fovea_mask_with_radius(radius, &DensityProfile::shipped_default()).unwrap()
    }

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
    fn classical_variance_ignores_a_center_outlier() {
        // A lone impulse: measured from the center it dominates the whole
        // disk; measured from the (all-zero) neighborhood mean it vanishes.
        let (w, h) = (15, 15);
        let mut m = RasterMap::zeros(w, h);
        m.set(7, 7, 1.0);
        let fovea = flat_mask(3);
        let centered = local_variance_raw_with(&m, &fovea, VarianceMode::CenterDeviation).unwrap();
        let classical = local_variance_raw_with(&m, &fovea, VarianceMode::Classical).unwrap();
        let n = fovea.len() as f64 - 1.0;
        assert_abs_diff_eq!(f64::from(centered.get(7, 7)), n / (n - 1.0), epsilon = 1e-6);
        assert_abs_diff_eq!(f64::from(classical.get(7, 7)), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn variance_modes_coincide_on_a_linear_ramp_interior() {
        // On a ramp the symmetric disk's mean equals the center sample, so
        // the two deviation references agree away from the borders.
        let (w, h) = (24, 24);
        let m = RasterMap::from_fn(w, h, |x, _| x as f32 / (w - 1) as f32);
        let fovea = flat_mask(3);
        let centered = local_variance_raw_with(&m, &fovea, VarianceMode::CenterDeviation).unwrap();
        let classical = local_variance_raw_with(&m, &fovea, VarianceMode::Classical).unwrap();
        for y in 4..h - 4 {
            for x in 4..w - 4 {
                assert_abs_diff_eq!(centered.get(x, y), classical.get(x, y), epsilon = 1e-5);
            }
        }
    }

    /// Direct evaluation of the local-variance definition.
    fn local_variance_oracle(y: &RasterMap, fovea: &FoveaMask) -> RasterMap {
        let m = fovea.len() - 1;
        RasterMap::from_fn(y.width(), y.height(), |x, yy| {
            let c = f64::from(y.get(x, yy));
            let mut s = 0f64;
            for &(dx, dy) in fovea.offsets() {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let v = f64::from(y.get_clamped(x as isize + dx as isize, yy as isize + dy as isize));
                s += (c - v) * (c - v);
            }
            (s / (m as f64 - 1.0)) as f32
        })
    }

    /// Direct evaluation of the center-surround double sum.
    fn center_surround_oracle(
        base: &RasterMap,
        fovea: &FoveaMask,
        labeling: &SegmentLabeling,
    ) -> Vec<f64> {
        let mut acc = vec![0f64; labeling.k()];
        for y in 0..base.height() {
            for x in 0..base.width() {
                let c = f64::from(base.get(x, y));
                let mut s = 0f64;
                for (i, &(dx, dy)) in fovea.offsets().iter().enumerate() {
                    if (dx, dy) == (0, 0) {
                        continue;
                    }
                    let v =
                        f64::from(base.get_clamped(x as isize + dx as isize, y as isize + dy as isize));
                    s += (c - v).abs() * fovea.weights()[i];
                }
                acc[labeling.label_at(x, y) as usize] += s;
            }
        }
        for (l, a) in acc.iter_mut().enumerate() {
            *a /= labeling.stats()[l].n as f64;
        }
        acc
    }

    #[test]
    fn local_variance_constant_is_zero() {
        let y = RasterMap::constant(12, 10, 77.0);
        let raw = local_variance_raw(&y, &flat_mask(2)).unwrap();
        assert_eq!(raw.sum(), 0.0);
        let norm = local_variance(&y, &flat_mask(2)).unwrap();
        assert_eq!(norm.sum(), 0.0);
    }

    #[test]
    fn local_variance_impulse_matches_hand_value() {
        // Radius-2 disk holds 13 pixels, 12 surrounding the center.
        let mut y = RasterMap::zeros(9, 9);
        y.set(4, 4, 1.0);
        let raw = local_variance_raw(&y, &flat_mask(2)).unwrap();
        assert_abs_diff_eq!(f64::from(raw.get(4, 4)), 12.0 / 11.0, epsilon = 1e-6);
    }

    #[test]
    fn local_variance_matches_bruteforce_on_random_maps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10 {
            let w = rng.random_range(4..=24);
            let h = rng.random_range(4..=24);
            let y = RasterMap::from_fn(w, h, |_, _| rng.random_range(0.0..255.0));
            let mask = if trial % 2 == 0 {
                flat_mask(rng.random_range(1..=4))
            } else {
                shipped_mask(rng.random_range(1..=4))
            };
            let got = local_variance_raw(&y, &mask).unwrap();
            let want = local_variance_oracle(&y, &mask);
            for i in 0..got.len() {
                assert_abs_diff_eq!(
                    f64::from(got.as_slice()[i]),
                    f64::from(want.as_slice()[i]),
                    epsilon = 1e-3
                );
            }
        }
    }

    #[test]
    fn center_surround_constant_base_is_zero() {
        let base = RasterMap::constant(16, 16, 3.5);
        let labeling = labeling_from_fn(16, 16, |x, _| if x < 8 { 0 } else { 1 });
        let raw = center_surround_raw(&base, &shipped_mask(3), &labeling).unwrap();
        assert!(raw.iter().all(|&v| v == 0.0));
        let map = center_surround(&base, &shipped_mask(3), &labeling).unwrap();
        assert_eq!(map.sum(), 0.0);
    }

    #[test]
    fn center_surround_matches_bruteforce_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for trial in 0..8 {
            let w = rng.random_range(6..=32);
            let h = rng.random_range(6..=32);
            let base = RasterMap::from_fn(w, h, |_, _| rng.random_range(0.0..1.0));
            let seg_w = rng.random_range(2..=4);
            let labeling = labeling_from_fn(w, h, |x, y| {
                ((x * seg_w / w) + seg_w * (y * 2 / h)) as u32
            });
            let mask = if trial % 2 == 0 {
                flat_mask(rng.random_range(1..=5))
            } else {
                shipped_mask(rng.random_range(1..=5))
            };
            let got = center_surround_raw(&base, &mask, &labeling).unwrap();
            let want = center_surround_oracle(&base, &mask, &labeling);
            for (g, w_) in got.iter().zip(&want) {
                assert_abs_diff_eq!(g, w_, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn boundary_heavy_small_segment_scores_higher() {
        // A 4x4 block whose disk neighborhoods mostly cross into the other
        // segment, against a large background.
        let base = RasterMap::from_fn(16, 16, |x, y| {
            if (6..10).contains(&x) && (6..10).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let labeling = labeling_from_fn(16, 16, |x, y| {
            u32::from(!((6..10).contains(&x) && (6..10).contains(&y)))
        });
        let raw = center_surround_raw(&base, &shipped_mask(4), &labeling).unwrap();
        assert!(raw[0] > raw[1], "small {} vs large {}", raw[0], raw[1]);
    }

    #[test]
    fn brightness_maps_flat_gray_is_zero() {
        let frame = ColorFrame::rgb8_from_fn(20, 16, |_, _| [128.0, 128.0, 128.0]);
        let labeling = labeling_from_fn(20, 16, |x, _| u32::from(x >= 10));
        let (vc, c) = brightness_maps(&frame, &shipped_mask(3), &labeling).unwrap();
        assert_eq!(vc.sum(), 0.0);
        assert_eq!(c.sum(), 0.0);
    }

    #[test]
    fn bright_disk_dominates_brightness_maps() {
        let frame = ColorFrame::rgb8_from_fn(32, 32, |x, y| {
            let (dx, dy) = (x as i64 - 16, y as i64 - 16);
            if dx * dx + dy * dy <= 36 {
                [230.0, 230.0, 230.0]
            } else {
                [20.0, 20.0, 20.0]
            }
        });
        let labeling = labeling_from_fn(32, 32, |x, y| {
            let (dx, dy) = (x as i64 - 16, y as i64 - 16);
            u32::from(dx * dx + dy * dy > 36)
        });
        let (vc, c) = brightness_maps(&frame, &shipped_mask(4), &labeling).unwrap();
        // Disk segment (label 0) carries the maximum in both maps.
        assert_eq!(vc.get(16, 16), 1.0);
        assert_eq!(c.get(16, 16), 1.0);
        assert_eq!(vc.get(0, 0), 0.0);
        assert_eq!(c.get(0, 0), 0.0);
    }

    #[test]
    fn ramp_has_uniform_variance_but_positive_contrast() {
        let y = RasterMap::from_fn(24, 24, |x, _| 10.0 * x as f32);
        let mask = flat_mask(2);
        let raw = local_variance_raw(&y, &mask).unwrap();
        // Interior local variance of a linear ramp is constant.
        let vals: Vec<f32> = (4..20)
            .flat_map(|yy| (4..20).map(move |xx| (xx, yy)))
            .map(|(xx, yy)| raw.get(xx, yy))
            .collect();
        let first = f64::from(vals[0]);
        for &v in &vals {
            assert_abs_diff_eq!(f64::from(v), first, epsilon = 1e-3);
        }
        // Three vertical strips; the middle one sees no frame border, so
        // its variance-map contrast vanishes while its luma contrast stays
        // positive.
        let labeling = labeling_from_fn(24, 24, |x, _| (x / 8) as u32);
        let contrast_raw = center_surround_raw(&y, &mask, &labeling).unwrap();
        assert!(contrast_raw[1] > 1.0, "luma contrast {}", contrast_raw[1]);
        let variance_raw = center_surround_raw(&raw, &mask, &labeling).unwrap();
        assert!(
            variance_raw[1] < 1e-6,
            "interior variance contrast {}",
            variance_raw[1]
        );
        // After normalization the interior segment sits at the bottom of
        // the scale.
        let vc = center_surround(&raw, &mask, &labeling).unwrap();
        assert_eq!(vc.get(12, 12), 0.0);
    }

    #[test]
    fn histogram_rarity_single_color() {
        let frame = ColorFrame::rgb8_from_fn(8, 8, |_, _| [10.0, 200.0, 30.0]);
        let m = color_histogram_map(&frame, 8).unwrap();
        for &v in m.as_slice() {
            assert_abs_diff_eq!(f64::from(v), (-1.0f64).exp(), epsilon = 1e-6);
        }
    }

    #[test]
    fn histogram_rarity_two_equal_colors() {
        let frame = ColorFrame::rgb8_from_fn(8, 8, |x, _| {
            if x < 4 { [255.0, 0.0, 0.0] } else { [0.0, 0.0, 255.0] }
        });
        let m = color_histogram_map(&frame, 8).unwrap();
        for &v in m.as_slice() {
            assert_abs_diff_eq!(f64::from(v), (-1.0f64).exp(), epsilon = 1e-6);
        }
    }

    #[test]
    fn histogram_rarity_odd_pixel() {
        let n = 64.0f64;
        let frame = ColorFrame::rgb8_from_fn(8, 8, |x, y| {
            if x == 3 && y == 3 { [255.0, 255.0, 0.0] } else { [0.0, 80.0, 0.0] }
        });
        let m = color_histogram_map(&frame, 8).unwrap();
        let odd = f64::from(m.get(3, 3));
        let common = f64::from(m.get(0, 0));
        assert_abs_diff_eq!(odd, (-(1.0 / n) * 2.0).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(common, (-((n - 1.0) / n) * 2.0).exp(), epsilon = 1e-6);
        assert!(odd > 0.9 && common < 0.2);
    }

    #[test]
    fn histogram_rarity_is_permutation_invariant() {
        let frame = ColorFrame::rgb8_from_fn(8, 8, |x, y| {
            [(x * 32) as f32, (y * 32) as f32, 128.0]
        });
        let swapped = ColorFrame::rgb8_from_fn(8, 8, |x, y| {
            // Transpose is a spatial permutation of the same multiset.
            [(y * 32) as f32, (x * 32) as f32, 128.0]
        });
        let a = color_histogram_map(&frame, 8).unwrap();
        let b = color_histogram_map(&swapped, 8).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(a.get(x, y), b.get(y, x));
            }
        }
    }

    #[test]
    fn chroma_contrast_gray_frame_is_zero() {
        // Constant gray: chroma is exactly zero, both maps vanish.
        let frame = ColorFrame::rgb8_from_fn(18, 14, |_, _| [128.0, 128.0, 128.0]);
        let labeling = labeling_from_fn(18, 14, |x, _| u32::from(x >= 9));
        let (a, b) = color_variance_contrast(&frame, &shipped_mask(3), &labeling).unwrap();
        assert_eq!(a.sum(), 0.0);
        assert_eq!(b.sum(), 0.0);

        // Varying grays: residual chroma is conversion rounding only, so
        // the raw chroma contrast stays orders of magnitude below the luma
        // contrast of the same frame.
        let frame = ColorFrame::rgb8_from_fn(18, 14, |x, _| {
            let v = (x * 13 % 200) as f32;
            [v, v, v]
        });
        let mask = shipped_mask(3);
        let lab = convert_color(&frame, ColorSpace::Lab).unwrap();
        let a_raw = center_surround_raw(
            &local_variance_raw(&lab.channel(1), &mask).unwrap(),
            &mask,
            &labeling,
        )
        .unwrap();
        let yuv = convert_color(&frame, ColorSpace::Yuv).unwrap();
        let y_raw = center_surround_raw(
            &local_variance_raw(&yuv.channel(0), &mask).unwrap(),
            &mask,
            &labeling,
        )
        .unwrap();
        assert!(
            a_raw[0] < 1e-6 * y_raw[0],
            "a* {} vs luma {}",
            a_raw[0],
            y_raw[0]
        );
    }

    #[test]
    fn red_patch_on_green_marks_a_channel() {
        let frame = ColorFrame::rgb8_from_fn(24, 24, |x, y| {
            if (8..16).contains(&x) && (8..16).contains(&y) {
                [255.0, 0.0, 0.0]
            } else {
                [0.0, 200.0, 0.0]
            }
        });
        let mask = shipped_mask(3);
        let lab = convert_color(&frame, ColorSpace::Lab).unwrap();
        let labeling = labeling_from_fn(24, 24, |x, y| {
            u32::from(!((8..16).contains(&x) && (8..16).contains(&y)))
        });
        let a_raw =
            center_surround_raw(&local_variance_raw(&lab.channel(1), &mask).unwrap(), &mask, &labeling)
                .unwrap();
        let b_raw =
            center_surround_raw(&local_variance_raw(&lab.channel(2), &mask).unwrap(), &mask, &labeling)
                .unwrap();
        // The red/green transition swings a* far more than b*.
        assert!(a_raw[0] > 20.0 * b_raw[0], "a {} vs b {}", a_raw[0], b_raw[0]);
    }

    #[test]
    fn mccamy_reference_points() {
        // D65 chromaticity.
        assert_abs_diff_eq!(mccamy_cct(0.31271, 0.32902), 6504.0, epsilon = 30.0);
        // Illuminant A.
        assert_abs_diff_eq!(mccamy_cct(0.44757, 0.40745), 2856.0, epsilon = 30.0);
        // Below the epicenter: treated as the cold extreme.
        assert_eq!(mccamy_cct(0.15, 0.06), 25000.0);
    }

    #[test]
    fn warmth_orders_red_above_blue() {
        let frame = ColorFrame::rgb8_from_fn(16, 8, |x, _| {
            if x < 8 { [255.0, 30.0, 30.0] } else { [30.0, 30.0, 255.0] }
        });
        let m = warmth_map(&frame).unwrap();
        assert!(m.get(2, 4) > m.get(13, 4), "red {} vs blue {}", m.get(2, 4), m.get(13, 4));
    }

    #[test]
    fn warmth_constant_frame_is_constant() {
        let frame = ColorFrame::rgb8_from_fn(8, 8, |_, _| [200.0, 150.0, 90.0]);
        let m = warmth_map(&frame).unwrap();
        assert_eq!(m.min_max(), (0.0, 0.0));
    }

    #[test]
    fn saturation_hand_values() {
        assert_eq!(saturation_value(50.0, 0.0, 0.0), 0.0);
        assert_eq!(saturation_value(0.0, 0.0, 0.0), 0.0);
        assert_abs_diff_eq!(saturation_value(0.0, 3.0, 4.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            saturation_value(5.0, 3.0, 4.0),
            5.0 / 50.0f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn saturation_map_bounds_and_achromatic() {
        let frame = ColorFrame::rgb8_from_fn(8, 8, |x, y| {
            [(x * 30) as f32, (y * 30) as f32, 120.0]
        });
        let m = saturation_map(&frame).unwrap();
        assert!(m.is_normalized());
        let gray = ColorFrame::rgb8_from_fn(4, 4, |_, _| [90.0, 90.0, 90.0]);
        let gm = saturation_map(&gray).unwrap();
        for &v in gm.as_slice() {
            assert!(v < 0.02, "gray saturation {v}");
        }
    }

    #[test]
    fn spectral_lookup_exact_and_ordering() {
        let t = SpectralTable::shipped_default();
        // Pixel equal to the 555 nm row returns its sensitivity exactly.
        assert_eq!(t.sensitivity_for([164.0, 255.0, 0.0]), 1.0);
        let green = t.sensitivity_for([0.0, 255.0, 0.0]);
        let deep_blue = t.sensitivity_for([0.0, 0.0, 255.0]);
        assert!(green > deep_blue, "green {green} vs blue {deep_blue}");
    }

    #[test]
    fn spectral_tie_breaks_to_lower_wavelength() {
        let t = SpectralTable::new(vec![
            SpectralRow {
                wavelength_nm: 500.0,
                rgb: [0.0, 100.0, 0.0],
                sensitivity: 0.3,
            },
            SpectralRow {
                wavelength_nm: 600.0,
                rgb: [0.0, 200.0, 0.0],
                sensitivity: 0.6,
            },
        ])
        .unwrap();
        // (0,150,0) is equidistant from both rows.
        assert_eq!(t.sensitivity_for([0.0, 150.0, 0.0]), 0.3);
    }

    #[test]
    fn spectral_table_rejects_empty_and_bad_rows() {
        assert!(SpectralTable::new(vec![]).is_err());
        assert!(SpectralTable::parse("500,0,0,0,1.5").is_err());
    }

    #[test]
    fn empirical_color_lookup() {
        let t = ColorRankTable::shipped_default();
        assert_eq!(t.rows().len(), 12);
        assert_eq!(t.probability_for([255.0, 0.0, 0.0]), 0.95);
        // All-gray frame maps to the gray row's probability.
        let frame = ColorFrame::rgb8_from_fn(6, 6, |_, _| [100.0, 100.0, 100.0]);
        let m = empirical_color_map(&frame, &t).unwrap();
        for &v in m.as_slice() {
            assert_abs_diff_eq!(f64::from(v), 0.22, epsilon = 1e-6);
        }
    }

    #[test]
    fn empirical_tie_breaks_to_lower_index() {
        let t = ColorRankTable::new(vec![
            ([100.0, 0.0, 0.0], 0.9),
            ([200.0, 0.0, 0.0], 0.4),
        ])
        .unwrap();
        assert_eq!(t.probability_for([150.0, 0.0, 0.0]), 0.9);
    }

    #[test]
    fn fovea_convolve_preserves_constant() {
        let m = RasterMap::constant(10, 10, 0.4);
        let out = fovea_convolve(&m, &shipped_mask(3));
        for &v in out.as_slice() {
            assert_abs_diff_eq!(f64::from(v), 0.4, epsilon = 1e-6);
        }
    }

    #[test]
    fn texture_constant_frame_is_zero() {
        let frame = ColorFrame::rgb8_from_fn(24, 24, |_, _| [90.0, 90.0, 90.0]);
        let labeling = labeling_from_fn(24, 24, |x, _| u32::from(x >= 12));
        let params = GaborParams {
            wavelengths: vec![4.0, 8.0],
            orientations: 4,
            ..GaborParams::default()
        };
        let m = texture_map(&frame, &shipped_mask(3), &labeling, &params).unwrap();
        assert!(m.sum() < 1e-3);
    }

    #[test]
    fn textured_fragmented_region_scores_higher() {
        // Uniform fine grating everywhere; the left half is fragmented into
        // many small segments (dense boundaries), the right is one segment.
        let frame = ColorFrame::rgb8_from_fn(32, 32, |x, _| {
            let v = if x % 2 == 0 { 40.0 } else { 215.0 };
            [v, v, v]
        });
        let labeling = labeling_from_fn(32, 32, |x, y| {
            if x < 16 {
                (x / 4 + 4 * (y / 4)) as u32
            } else {
                32
            }
        });
        let params = GaborParams {
            wavelengths: vec![4.0],
            orientations: 4,
            ..GaborParams::default()
        };
        let m = texture_map(&frame, &shipped_mask(3), &labeling, &params).unwrap();
        assert!(
            m.get(5, 16) > m.get(24, 16),
            "fragmented {} vs solid {}",
            m.get(5, 16),
            m.get(24, 16)
        );
    }
}
