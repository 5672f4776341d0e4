//! Single-channel float rasters, the common currency of every feature and
//! saliency map, plus the shared normalization, blurring, and sparsity
//! projection operators.

use crate::error::{Error, Result};

/// A single-channel image of `f32` values stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RasterMap {
    /// All-zero map.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0)
    }

    /// Map filled with one value.
    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        assert!(width * height > 0, "raster must have at least one pixel");
        RasterMap {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a map from row-major data, rejecting length mismatches and
    /// non-finite values.
    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width * height == 0 {
            return Err(Error::invalid("raster must have at least one pixel"));
        }
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "expected {} values for {}x{}, got {}",
                width * height,
                width,
                height,
                data.len()
            )));
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                value: value as f64,
            });
        }
        Ok(RasterMap {
            width,
            height,
            data,
        })
    }

    /// Builds a map by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        RasterMap {
            width,
            height,
            data,
        }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        self.data[y * self.width + x] = value;
    }

    /// Value at (x, y) with coordinates clamped to the frame border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.get(cx, cy)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn min_max(&self) -> (f32, f32) {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True when every value already lies in `[0, 1]` (small slack for
    /// rounding).
    pub fn is_normalized(&self) -> bool {
        self.data.iter().all(|&v| (-1e-6..=1.0 + 1e-6).contains(&v))
    }

    /// Same-shape map with `f` applied per pixel.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> RasterMap {
        RasterMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two same-shape maps.
    pub fn zip_map(&self, other: &RasterMap, f: impl Fn(f32, f32) -> f32) -> Result<RasterMap> {
        if self.dims() != other.dims() {
            return Err(Error::dims(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(RasterMap {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Indices that sort the pixel values ascending (stable on ties).
    pub fn argsort(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.data.len()).collect();
        idx.sort_by(|&a, &b| self.data[a].total_cmp(&self.data[b]).then(a.cmp(&b)));
        idx
    }
}

/// Linearly rescales a map so its minimum becomes 0 and its maximum 1.
/// A constant map carries no signal and maps to all zeros.
pub fn normalize01(m: &RasterMap) -> Result<RasterMap> {
    if !m.is_finite() {
        return Err(Error::invalid("normalize01: map contains non-finite values"));
    }
    let (lo, hi) = m.min_max();
    let span = (hi - lo) as f64;
    if span <= 0.0 {
        return Ok(RasterMap::zeros(m.width, m.height));
    }
    Ok(m.map(|v| (((v - lo) as f64 / span) as f32).clamp(0.0, 1.0)))
}

/// Separable Gaussian smoothing with edge-replicate boundaries.
/// `sigma = 0` is the identity.
pub fn gaussian_blur(m: &RasterMap, sigma: f64) -> Result<RasterMap> {
    if sigma < 0.0 {
        return Err(Error::invalid(format!("negative blur sigma: {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(m.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let (w, h) = m.dims();

    // Horizontal pass.
    let mut tmp = vec![0f32; w * h];
    for y in 0..h {
        let row = m.row(y);
        for x in 0..w {
            let mut acc = 0f64;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - radius as isize).clamp(0, w as isize - 1);
                acc += kv * row[sx as usize] as f64;
            }
            tmp[y * w + x] = acc as f32;
        }
    }
    // Vertical pass.
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f64;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - radius as isize).clamp(0, h as isize - 1);
                acc += kv * tmp[sy as usize * w + x] as f64;
            }
            out[y * w + x] = acc as f32;
        }
    }
    Ok(RasterMap {
        width: w,
        height: h,
        data: out,
    })
}

/// Normalized 1-D Gaussian taps, radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Convex projection that amplifies local maxima of a `[0, 1]` map:
/// `exp(f) - mean(f)`, linearly rescaled back to `[0, 1]`.
/// Pixel ordering is preserved exactly; constant input maps to zeros.
pub fn sparsity_project(m: &RasterMap) -> Result<RasterMap> {
    if !m.is_normalized() {
        let (lo, hi) = m.min_max();
        return Err(Error::invalid(format!(
            "sparsity_project expects a [0,1]-normalized map, got range [{lo}, {hi}]"
        )));
    }
    let mean = m.mean();
    let phi = m.map(|v| ((v as f64).exp() - mean) as f32);
    let (lo, hi) = phi.min_max();
    if (hi - lo) as f64 <= 0.0 {
        return Ok(RasterMap::zeros(m.width, m.height));
    }
    normalize01(&phi)
}
