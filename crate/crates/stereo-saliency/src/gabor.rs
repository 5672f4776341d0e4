//! Gabor filter bank for texture energy.
//!
//! The bank covers a grid of wavelengths and orientations with quadrature
//! (even/odd) pairs; per-pixel energy is the L2 norm over all responses.
//! Larger wavelengths are evaluated on a box-downsampled pyramid with the
//! base-wavelength kernel, then upsampled back, which keeps responses
//! comparable across scales and the kernel support small.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    /// Wavelengths in pixels; each must be an integer multiple of the
    /// smallest (pyramid levels).
    pub wavelengths: Vec<f64>,
    /// Number of evenly spaced orientations over 180 degrees.
    pub orientations: usize,
    /// Half-response spatial-frequency bandwidth in octaves.
    pub bandwidth_octaves: f64,
    /// Envelope aspect ratio (1 = isotropic).
    pub aspect_ratio: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        GaborParams {
            wavelengths: vec![4.0, 8.0, 16.0, 32.0],
            orientations: 8,
            bandwidth_octaves: 1.0,
            aspect_ratio: 0.5,
        }
    }
}

/// One quadrature filter: even/odd kernels at the base wavelength plus the
/// pyramid factor it is evaluated at.
#[derive(Debug, Clone)]
pub struct GaborFilter {
    pub wavelength: f64,
    pub orientation_rad: f64,
    /// Integer downsampling factor this filter runs at.
    pub scale_factor: usize,
    radius: i64,
    even: Vec<f64>,
    odd: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaborBank {
    filters: Vec<GaborFilter>,
}

impl GaborBank {
    pub fn new(params: &GaborParams) -> Result<Self> {
        if params.wavelengths.is_empty() || params.orientations == 0 {
            return Err(Error::invalid("gabor bank needs wavelengths and orientations"));
        }
        if params.bandwidth_octaves <= 0.0 || params.aspect_ratio <= 0.0 {
            return Err(Error::invalid("gabor bandwidth and aspect must be positive"));
        }
        let base = params
            .wavelengths
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(base.is_finite() && base >= 2.0) {
            return Err(Error::invalid("smallest wavelength must be >= 2 px"));
        }
        let mut filters = Vec::new();
        for &wl in &params.wavelengths {
            let ratio = wl / base;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
                return Err(Error::invalid(format!(
                    "wavelength {wl} is not an integer multiple of the base {base}"
                )));
            }
            for o in 0..params.orientations {
                let theta = o as f64 * std::f64::consts::PI / params.orientations as f64;
                filters.push(GaborFilter::build(
                    base,
                    wl,
                    theta,
                    ratio.round() as usize,
                    params.bandwidth_octaves,
                    params.aspect_ratio,
                ));
            }
        }
        Ok(GaborBank { filters })
    }

    pub fn filters(&self) -> &[GaborFilter] {
        &self.filters
    }

    /// Quadrature energy map per filter, at full input resolution.
    pub fn apply(&self, y: &RasterMap) -> Vec<RasterMap> {
        let mut cache: std::collections::HashMap<usize, RasterMap> = Default::default();
        self.filters
            .iter()
            .map(|f| {
                let level = cache
                    .entry(f.scale_factor)
                    .or_insert_with(|| downsample_box(y, f.scale_factor));
                let energy = f.energy(level);
                if f.scale_factor == 1 {
                    energy
                } else {
                    upsample_bilinear(&energy, y.width(), y.height())
                }
            })
            .collect()
    }

    /// L2 norm of all filter responses per pixel.
    pub fn energy(&self, y: &RasterMap) -> RasterMap {
        let per_filter = self.apply(y);
        RasterMap::from_fn(y.width(), y.height(), |x, yy| {
            let s: f64 = per_filter
                .iter()
                .map(|m| f64::from(m.get(x, yy)).powi(2))
                .sum();
            s.sqrt() as f32
        })
    }
}

impl GaborFilter {
    fn build(
        base_wavelength: f64,
        wavelength: f64,
        theta: f64,
        scale_factor: usize,
        bandwidth: f64,
        aspect: f64,
    ) -> Self {
        // Envelope width from the octave bandwidth.
        let slratio = (2f64.powf(bandwidth) + 1.0) / (2f64.powf(bandwidth) - 1.0);
        let sigma = base_wavelength / std::f64::consts::PI * (2f64.ln() / 2.0).sqrt() * slratio;
        let radius = (2.5 * sigma).ceil() as i64;
        let side = (2 * radius + 1) as usize;
        let mut even = vec![0f64; side * side];
        let mut odd = vec![0f64; side * side];
        let (sin_t, cos_t) = theta.sin_cos();
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let xr = dx as f64 * cos_t + dy as f64 * sin_t;
                let yr = -(dx as f64) * sin_t + dy as f64 * cos_t;
                let env =
                    (-(xr * xr + aspect * aspect * yr * yr) / (2.0 * sigma * sigma)).exp();
                let phase = 2.0 * std::f64::consts::PI * xr / base_wavelength;
                let i = ((dy + radius) * (2 * radius + 1) + dx + radius) as usize;
                even[i] = env * phase.cos();
                odd[i] = env * phase.sin();
            }
        }
        // Remove the even kernel's DC so constant input yields zero energy.
        let mean = even.iter().sum::<f64>() / even.len() as f64;
        for v in &mut even {
            *v -= mean;
        }
        GaborFilter {
            wavelength,
            orientation_rad: theta,
            scale_factor,
            radius,
            even,
            odd,
        }
    }

    /// sqrt(even^2 + odd^2) response on one pyramid level.
    fn energy(&self, level: &RasterMap) -> RasterMap {
        let r = self.radius;
        let side = (2 * r + 1) as usize;
        RasterMap::from_fn(level.width(), level.height(), |x, y| {
            let mut e = 0f64;
            let mut o = 0f64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = f64::from(level.get_clamped(x as isize + dx as isize, y as isize + dy as isize));
                    let i = ((dy + r) * side as i64 + dx + r) as usize;
                    e += v * self.even[i];
                    o += v * self.odd[i];
                }
            }
            ((e * e + o * o).sqrt()) as f32
        })
    }
}

/// Box-average downsampling by an integer factor (tail blocks average the
/// remaining pixels).
pub fn downsample_box(map: &RasterMap, factor: usize) -> RasterMap {
    if factor <= 1 {
        return map.clone();
    }
    let w = map.width().div_ceil(factor);
    let h = map.height().div_ceil(factor);
    RasterMap::from_fn(w, h, |bx, by| {
        let x0 = bx * factor;
        let y0 = by * factor;
        let x1 = (x0 + factor).min(map.width());
        let y1 = (y0 + factor).min(map.height());
        let mut s = 0f64;
        for y in y0..y1 {
            for x in x0..x1 {
                s += f64::from(map.get(x, y));
            }
        }
        (s / ((x1 - x0) * (y1 - y0)) as f64) as f32
    })
}

/// Bilinear upsampling to explicit output dimensions.
pub fn upsample_bilinear(map: &RasterMap, out_w: usize, out_h: usize) -> RasterMap {
    let sx = map.width() as f64 / out_w as f64;
    let sy = map.height() as f64 / out_h as f64;
    RasterMap::from_fn(out_w, out_h, |x, y| {
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, map.width() as f64 - 1.0);
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, map.height() as f64 - 1.0);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(map.width() - 1);
        let y1 = (y0 + 1).min(map.height() - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = f64::from(map.get(x0, y0)) * (1.0 - tx) + f64::from(map.get(x1, y0)) * tx;
        let bot = f64::from(map.get(x0, y1)) * (1.0 - tx) + f64::from(map.get(x1, y1)) * tx;
        (top * (1.0 - ty) + bot * ty) as f32
    })
}
