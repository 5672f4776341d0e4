//! Map and flow file I/O.
//!
//! Three on-disk forms are supported:
//! - a raw float container for lossless intermediates: `u32` LE width,
//!   `u32` LE height, then `width*height` `f32` LE values row-major;
//! - 8/16-bit grayscale PGM/PNG for normalized maps and integer label/
//!   disparity images;
//! - Middlebury `.flo` two-channel flow files (tagged "PIEH").

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::RasterMap;

/// Writes a map as a raw float container.
pub fn write_raw(path: &Path, map: &RasterMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(map.width() as u32).to_le_bytes())?;
    w.write_all(&(map.height() as u32).to_le_bytes())?;
    for &v in map.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a raw float container written by [`write_raw`].
pub fn read_raw(path: &Path) -> Result<RasterMap> {
    let mut r = BufReader::new(File::open(path)?);
    let width = read_u32_le(&mut r, path)? as usize;
    let height = read_u32_le(&mut r, path)? as usize;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "zero dimension in header"));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(path, "dimension overflow"))?;
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format(path, format!("truncated: expected {n} float values")))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::format(path, "trailing bytes after pixel data"));
    }
    let data: Vec<f32> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    RasterMap::from_vec(width, height, data)
        .map_err(|e| Error::format(path, format!("invalid pixel data: {e}")))
}

fn read_u32_le(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::format(path, "truncated header"))?;
    Ok(u32::from_le_bytes(b))
}

/// Bit depth for integer map output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Writes a normalized map ([0,1]) as grayscale PGM or PNG, chosen by the
/// file extension, quantizing to the requested bit depth.
pub fn write_map(path: &Path, map: &RasterMap, depth: BitDepth) -> Result<()> {
    if !map.is_normalized() {
        return Err(Error::invalid(format!(
            "map written to {} must be normalized to [0,1]",
            path.display()
        )));
    }
    let (w, h) = (map.width() as u32, map.height() as u32);
    let scale = depth.max_value();
    match depth {
        BitDepth::Eight => {
            let buf: Vec<u8> = map
                .as_slice()
                .iter()
                .map(|&v| (f64::from(v).clamp(0.0, 1.0) * scale).round() as u8)
                .collect();
            image::GrayImage::from_raw(w, h, buf)
                .expect("buffer sized from map dims")
                .save(path)
                .map_err(|e| Error::format(path, e.to_string()))
        }
        BitDepth::Sixteen => {
            let buf: Vec<u16> = map
                .as_slice()
                .iter()
                .map(|&v| (f64::from(v).clamp(0.0, 1.0) * scale).round() as u16)
                .collect();
            image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, buf)
                .expect("buffer sized from map dims")
                .save(path)
                .map_err(|e| Error::format(path, e.to_string()))
        }
    }
}

/// Reads a grayscale PGM/PNG as raw integer sample values (no rescaling).
/// Returns the map and the source bit depth. Color inputs are rejected.
pub fn read_gray_raw(path: &Path) -> Result<(RasterMap, BitDepth)> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            let data: Vec<f32> = buf.into_raw().into_iter().map(f32::from).collect();
            Ok((
                RasterMap::from_vec(w as usize, h as usize, data)?,
                BitDepth::Eight,
            ))
        }
        image::DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            let data: Vec<f32> = buf.into_raw().into_iter().map(f32::from).collect();
            Ok((
                RasterMap::from_vec(w as usize, h as usize, data)?,
                BitDepth::Sixteen,
            ))
        }
        other => Err(Error::format(
            path,
            format!(
                "expected grayscale image, got {} channels",
                other.color().channel_count()
            ),
        )),
    }
}

/// Reads a grayscale PGM/PNG normalized to [0,1] by its bit depth.
pub fn read_map(path: &Path) -> Result<RasterMap> {
    let (raw, depth) = read_gray_raw(path)?;
    let scale = depth.max_value() as f32;
    Ok(raw.map(|v| v / scale))
}

/// Reads an 8-bit RGB or grayscale PNG as a color frame.
pub fn read_color(path: &Path) -> Result<crate::color::ColorFrame> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data: Vec<[f32; 3]> = rgb
        .pixels()
        .map(|p| [f32::from(p[0]), f32::from(p[1]), f32::from(p[2])])
        .collect();
    crate::color::ColorFrame::from_rgb8(w as usize, h as usize, data)
}

/// Writes an 8-bit RGB PNG from three normalized channel maps.
pub fn write_color(path: &Path, frame: &crate::color::ColorFrame) -> Result<()> {
    let (w, h) = frame.dims();
    let mut buf = Vec::with_capacity(w * h * 3);
    for px in frame.pixels() {
        for &c in px {
            buf.push(c.clamp(0.0, 255.0).round() as u8);
        }
    }
    image::RgbImage::from_raw(w as u32, h as u32, buf)
        .expect("buffer sized from frame dims")
        .save(path)
        .map_err(|e| Error::format(path, e.to_string()))
}

const FLO_TAG: f32 = 202021.25; // spells "PIEH" in little-endian bytes

/// Writes a two-channel flow field as a Middlebury `.flo` file.
pub fn write_flo(path: &Path, dx: &RasterMap, dy: &RasterMap) -> Result<()> {
    if dx.dims() != dy.dims() {
        return Err(Error::dims(format!(
            "flow channels disagree: {:?} vs {:?}",
            dx.dims(),
            dy.dims()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&FLO_TAG.to_le_bytes())?;
    w.write_all(&(dx.width() as i32).to_le_bytes())?;
    w.write_all(&(dx.height() as i32).to_le_bytes())?;
    for i in 0..dx.len() {
        w.write_all(&dx.as_slice()[i].to_le_bytes())?;
        w.write_all(&dy.as_slice()[i].to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a Middlebury `.flo` flow file into (dx, dy) maps.
pub fn read_flo(path: &Path) -> Result<(RasterMap, RasterMap)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::format(path, "truncated header"))?;
    let tag = f32::from_le_bytes(b);
    if tag != FLO_TAG {
        return Err(Error::format(
            path,
            format!("bad magic {tag}; expected {FLO_TAG}"),
        ));
    }
    let width = read_u32_le(&mut r, path)? as i32;
    let height = read_u32_le(&mut r, path)? as i32;
    if width <= 0 || height <= 0 {
        return Err(Error::format(path, "non-positive dimension in header"));
    }
    let (width, height) = (width as usize, height as usize);
    let n = width * height;
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format(path, format!("truncated: expected {n} flow vectors")))?;
    let mut dx = Vec::with_capacity(n);
    let mut dy = Vec::with_capacity(n);
    for c in buf.chunks_exact(8) {
        dx.push(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        dy.push(f32::from_le_bytes([c[4], c[5], c[6], c[7]]));
    }
    Ok((
        RasterMap::from_vec(width, height, dx)
            .map_err(|e| Error::format(path, format!("invalid dx channel: {e}")))?,
        RasterMap::from_vec(width, height, dy)
            .map_err(|e| Error::format(path, format!("invalid dy channel: {e}")))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RasterMap;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn raw_container_roundtrip_is_exact() {
        let map = RasterMap::from_fn(7, 5, |x, y| (x as f32 * 0.37 - y as f32 * 1.21).sin());
        let (_d, path) = tmp("m.raw");
        write_raw(&path, &map).unwrap();
        let back = read_raw(&path).unwrap();
        assert_eq!(back.dims(), (7, 5));
        assert_eq!(back.as_slice(), map.as_slice());
    }

    #[test]
    fn raw_container_layout_is_w_h_then_le_floats() {
        let map = RasterMap::from_vec(2, 1, vec![1.5, -2.0]).unwrap();
        let (_d, path) = tmp("m.raw");
        write_raw(&path, &map).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], &2u32.to_le_bytes());
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1.5f32.to_le_bytes());
        assert_eq!(&bytes[12..16], &(-2.0f32).to_le_bytes());
        assert_eq!(bytes.len(), 16);
    }

    #[test]
    fn raw_container_rejects_truncation_and_trailing() {
        let map = RasterMap::from_fn(4, 4, |x, y| (x + y) as f32);
        let (_d, path) = tmp("m.raw");
        write_raw(&path, &map).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(read_raw(&path).is_err());
        let mut extended = bytes.clone();
        extended.push(0);
        std::fs::write(&path, &extended).unwrap();
        assert!(read_raw(&path).is_err());
    }

    #[test]
    fn pgm16_roundtrip_preserves_label_values() {
        let labels = RasterMap::from_fn(6, 4, |x, y| ((y * 6 + x) * 997 % 65536) as f32);
        let norm = labels.map(|v| v / 65535.0);
        let (_d, path) = tmp("labels.pgm");
        write_map(&path, &norm, BitDepth::Sixteen).unwrap();
        let (back, depth) = read_gray_raw(&path).unwrap();
        assert_eq!(depth, BitDepth::Sixteen);
        for i in 0..labels.len() {
            assert_eq!(back.as_slice()[i], labels.as_slice()[i]);
        }
    }

    #[test]
    fn png8_roundtrip_is_within_quantization_error() {
        let map = RasterMap::from_fn(9, 9, |x, y| ((x * y) as f32 / 64.0).min(1.0));
        let (_d, path) = tmp("m.png");
        write_map(&path, &map, BitDepth::Eight).unwrap();
        let back = read_map(&path).unwrap();
        for i in 0..map.len() {
            let err = (back.as_slice()[i] - map.as_slice()[i]).abs();
            assert!(err <= 0.5 / 255.0 + 1e-6, "err {err} at {i}");
        }
    }

    #[test]
    fn write_map_rejects_unnormalized() {
        let map = RasterMap::from_vec(2, 1, vec![0.0, 2.0]).unwrap();
        let (_d, path) = tmp("m.png");
        assert!(write_map(&path, &map, BitDepth::Eight).is_err());
    }

    #[test]
    fn flo_roundtrip_and_magic() {
        let dx = RasterMap::from_fn(5, 3, |x, _| x as f32 - 2.0);
        let dy = RasterMap::from_fn(5, 3, |_, y| 0.5 * y as f32);
        let (_d, path) = tmp("f.flo");
        write_flo(&path, &dx, &dy).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"PIEH");
        let (bx, by) = read_flo(&path).unwrap();
        assert_eq!(bx.as_slice(), dx.as_slice());
        assert_eq!(by.as_slice(), dy.as_slice());

        let mut corrupted = bytes.clone();
        corrupted[0] = b'X';
        std::fs::write(&path, &corrupted).unwrap();
        assert!(read_flo(&path).is_err());
    }

    #[test]
    fn color_png_roundtrip() {
        let frame = crate::color::ColorFrame::rgb8_from_fn(4, 3, |x, y| {
            [x as f32 * 60.0, y as f32 * 80.0, 17.0]
        });
        let (_d, path) = tmp("c.png");
        write_color(&path, &frame).unwrap();
        let back = read_color(&path).unwrap();
        assert_eq!(back.dims(), (4, 3));
        for (a, b) in back.pixels().iter().zip(frame.pixels()) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 0.51);
            }
        }
    }
}
