//! Three-channel frames and the two color conversions the feature maps rely
//! on: BT.601 RGB->YUV and sRGB(D65) -> CIE L*a*b*.

use crate::error::{Error, Result};
use crate::raster::RasterMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    /// 8-bit RGB, channel values in [0, 255].
    Rgb8,
    /// BT.601 luma/chroma; Y keeps the [0, 255] scale of the input.
    Yuv,
    /// CIE L*a*b* with D65 white point; L* in [0, 100].
    Lab,
}

impl ColorSpace {
    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Rgb8 => "RGB-8bit",
            ColorSpace::Yuv => "YUV",
            ColorSpace::Lab => "CIELAB",
        }
    }
}

/// A three-channel image. Channel semantics depend on `space`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorFrame {
    width: usize,
    height: usize,
    space: ColorSpace,
    data: Vec<[f32; 3]>,
}

impl ColorFrame {
    pub fn from_rgb8(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        if width * height == 0 {
            return Err(Error::invalid("frame must have at least one pixel"));
        }
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "expected {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        for (i, px) in data.iter().enumerate() {
            for &c in px {
                if !c.is_finite() || !(0.0..=255.0).contains(&c) {
                    return Err(Error::invalid(format!(
                        "RGB-8bit channel out of [0,255] at pixel {i}: {c}"
                    )));
                }
            }
        }
        Ok(ColorFrame {
            width,
            height,
            space: ColorSpace::Rgb8,
            data,
        })
    }

    /// Builds an RGB frame by evaluating `f(x, y) -> [r, g, b]` in 0..=255.
    pub fn rgb8_from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        ColorFrame {
            width,
            height,
            space: ColorSpace::Rgb8,
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

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.data
    }

    /// Extracts one channel as a raster map.
    pub fn channel(&self, c: usize) -> RasterMap {
        assert!(c < 3);
        RasterMap::from_fn(self.width, self.height, |x, y| self.get(x, y)[c])
    }
}

/// Converts an RGB-8bit frame into `target` space. Conversions between two
/// derived spaces are not supported.
pub fn convert_color(frame: &ColorFrame, target: ColorSpace) -> Result<ColorFrame> {
    if frame.space != ColorSpace::Rgb8 {
        return Err(Error::UnsupportedConversion {
            from: frame.space.name(),
            to: target.name(),
        });
    }
    let data: Vec<[f32; 3]> = match target {
        ColorSpace::Rgb8 => frame.data.clone(),
        ColorSpace::Yuv => frame.data.iter().map(|px| rgb8_to_yuv(*px)).collect(),
        ColorSpace::Lab => frame.data.iter().map(|px| rgb8_to_lab(*px)).collect(),
    };
    Ok(ColorFrame {
        width: frame.width,
        height: frame.height,
        space: target,
        data,
    })
}

/// BT.601 full-range luma/chroma, keeping the input 0..255 scale for Y.
pub fn rgb8_to_yuv([r, g, b]: [f32; 3]) -> [f32; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let u = 0.492 * (b - y);
    let v = 0.877 * (r - y);
    [y as f32, u as f32, v as f32]
}

/// sRGB (D65) to CIE L*a*b*.
pub fn rgb8_to_lab([r, g, b]: [f32; 3]) -> [f32; 3] {
    let (x, y, z) = rgb8_to_xyz([r, g, b]);
    // D65 reference white.
    const XN: f64 = 0.950_47;
    const YN: f64 = 1.0;
    const ZN: f64 = 1.088_83;
    let fx = lab_f(x / XN);
    let fy = lab_f(y / YN);
    let fz = lab_f(z / ZN);
    let l = 116.0 * fy - 16.0;
    let a = 500.0 * (fx - fy);
    let bb = 200.0 * (fy - fz);
    [l as f32, a as f32, bb as f32]
}

/// sRGB (D65) to CIE XYZ, Y normalized so white is 1.0.
pub fn rgb8_to_xyz([r, g, b]: [f32; 3]) -> (f64, f64, f64) {
    let rl = srgb_linearize(r as f64 / 255.0);
    let gl = srgb_linearize(g as f64 / 255.0);
    let bl = srgb_linearize(b as f64 / 255.0);
    let x = 0.412_456_4 * rl + 0.357_576_1 * gl + 0.180_437_5 * bl;
    let y = 0.212_672_9 * rl + 0.715_152_2 * gl + 0.072_175_0 * bl;
    let z = 0.019_333_9 * rl + 0.119_192_0 * gl + 0.950_304_1 * bl;
    (x, y, z)
}

fn srgb_linearize(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn white_maps_to_l_100() {
        let lab = rgb8_to_lab([255.0, 255.0, 255.0]);
        assert_abs_diff_eq!(lab[0], 100.0, epsilon = 0.01);
        assert_abs_diff_eq!(lab[1], 0.0, epsilon = 0.01);
        assert_abs_diff_eq!(lab[2], 0.0, epsilon = 0.01);
    }

    #[test]
    fn black_maps_to_zero() {
        let yuv = rgb8_to_yuv([0.0, 0.0, 0.0]);
        assert_eq!(yuv[0], 0.0);
        let lab = rgb8_to_lab([0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(lab[0], 0.0, epsilon = 1e-4);
    }

    #[test]
    fn red_matches_published_reference() {
        // Published sRGB(D65) -> Lab reference values for pure red.
        let lab = rgb8_to_lab([255.0, 0.0, 0.0]);
        assert_abs_diff_eq!(lab[0], 53.2408, epsilon = 0.01);
        assert_abs_diff_eq!(lab[1], 80.0925, epsilon = 0.01);
        assert_abs_diff_eq!(lab[2], 67.2032, epsilon = 0.01);
    }

    #[test]
    fn gray_values_are_achromatic() {
        for v in [0.0f32, 31.0, 75.0, 128.0, 200.0, 255.0] {
            let lab = rgb8_to_lab([v, v, v]);
            assert!(lab[1].abs() < 0.5, "a* {} for gray {v}", lab[1]);
            assert!(lab[2].abs() < 0.5, "b* {} for gray {v}", lab[2]);
        }
    }

    #[test]
    fn conversion_from_derived_space_rejected() {
        let f = ColorFrame::rgb8_from_fn(2, 2, |_, _| [10.0, 20.0, 30.0]);
        let yuv = convert_color(&f, ColorSpace::Yuv).unwrap();
        assert!(convert_color(&yuv, ColorSpace::Lab).is_err());
    }

    #[test]
    fn rgb8_rejects_out_of_range() {
        assert!(ColorFrame::from_rgb8(1, 1, vec![[0.0, -1.0, 0.0]]).is_err());
        assert!(ColorFrame::from_rgb8(1, 1, vec![[0.0, 300.0, 0.0]]).is_err());
    }

    #[test]
    fn luma_weights_are_bt601() {
        let y = rgb8_to_yuv([255.0, 0.0, 0.0])[0];
        assert_abs_diff_eq!(y, 0.299 * 255.0, epsilon = 1e-3);
        let y = rgb8_to_yuv([0.0, 255.0, 0.0])[0];
        assert_abs_diff_eq!(y, 0.587 * 255.0, epsilon = 1e-3);
    }
}
