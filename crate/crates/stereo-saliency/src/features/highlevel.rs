//! High-level cue maps built from externally detected regions: face,
//! person, vehicle, animal, text, and horizon.
//!
//! Detectors run out-of-process; their boxes arrive through a plain-text
//! sidecar file (one record per line: `frame class x y w h [score]`,
//! whitespace- or comma-delimited, `#` comments allowed). Each class
//! becomes a per-frame map: the per-pixel maximum of detection scores
//! whose feathered boxes cover the pixel.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::raster::RasterMap;

/// Gaussian edge-feathering scale in pixels.
pub const FEATHER_SIGMA: f64 = 5.0 / 3.0;
/// Feathered values are cut to zero beyond this distance from the box.
pub const FEATHER_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectionClass {
    Face,
    Person,
    Vehicle,
    Animal,
    Text,
    Horizon,
}

/// All classes, in feature-stack order.
pub const DETECTION_CLASSES: [DetectionClass; 6] = [
    DetectionClass::Face,
    DetectionClass::Person,
    DetectionClass::Vehicle,
    DetectionClass::Animal,
    DetectionClass::Text,
    DetectionClass::Horizon,
];

impl DetectionClass {
    pub fn name(self) -> &'static str {
        match self {
            DetectionClass::Face => "face",
            DetectionClass::Person => "person",
            DetectionClass::Vehicle => "vehicle",
            DetectionClass::Animal => "animal",
            DetectionClass::Text => "text",
            DetectionClass::Horizon => "horizon",
        }
    }

    pub fn feature_kind(self) -> FeatureKind {
        match self {
            DetectionClass::Face => FeatureKind::Face,
            DetectionClass::Person => FeatureKind::Person,
            DetectionClass::Vehicle => FeatureKind::Vehicle,
            DetectionClass::Animal => FeatureKind::Animal,
            DetectionClass::Text => FeatureKind::Text,
            DetectionClass::Horizon => FeatureKind::Horizon,
        }
    }
}

impl FromStr for DetectionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DETECTION_CLASSES
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown detection class {s:?}")))
    }
}

/// One detector output box.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_index: usize,
    pub class: DetectionClass,
    /// Box origin and size in pixels; covers pixel centers in
    /// [x, x+w) x [y, y+h).
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl Detection {
    /// Enforces a finite, frame-intersecting box and a score in [0,1].
    pub fn validate(&self, frame_w: usize, frame_h: usize) -> Result<()> {
        for (name, v) in [("x", self.x), ("y", self.y), ("w", self.w), ("h", self.h)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("box {name} is not finite: {v}")));
            }
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::invalid(format!(
                "box size must be positive, got {}x{}",
                self.w, self.h
            )));
        }
        if !(self.score.is_finite() && (0.0..=1.0).contains(&self.score)) {
            return Err(Error::invalid(format!(
                "score must lie in [0,1], got {}",
                self.score
            )));
        }
        let intersects = self.x < frame_w as f64
            && self.x + self.w > 0.0
            && self.y < frame_h as f64
            && self.y + self.h > 0.0;
        if !intersects {
            return Err(Error::invalid(format!(
                "box ({}, {}, {}, {}) lies outside the {frame_w}x{frame_h} frame",
                self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }
}

/// Parse a detection sidecar file against the frame dimensions it must
/// fit. Malformed or out-of-frame records reject the whole file with a
/// line diagnostic; unknown class tokens are skipped with a warning.
pub fn ingest_detections(
    path: impl AsRef<Path>,
    frame_w: usize,
    frame_h: usize,
) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let record = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        if !(fields.len() == 6 || fields.len() == 7) {
            return Err(record(format!(
                "expected `frame class x y w h [score]`, got {} fields",
                fields.len()
            )));
        }
        let frame_index: usize = fields[0]
            .parse()
            .map_err(|e| record(format!("bad frame index {:?}: {e}", fields[0])))?;
        let class = match fields[1].parse::<DetectionClass>() {
            Ok(c) => c,
            Err(_) => {
                eprintln!(
                    "warning: {}:{lineno}: skipping unknown detection class {:?}",
                    path.display(),
                    fields[1]
                );
                continue;
            }
        };
        let mut nums = [0f64; 5];
        nums[4] = 1.0; // missing score means a binary detector
        for (i, field) in fields[2..].iter().enumerate() {
            nums[i] = field
                .parse()
                .map_err(|e| record(format!("bad number {field:?}: {e}")))?;
        }
        let det = Detection {
            frame_index,
            class,
            x: nums[0],
            y: nums[1],
            w: nums[2],
            h: nums[3],
            score: nums[4],
        };
        det.validate(frame_w, frame_h)
            .map_err(|e| record(e.to_string()))?;
        out.push(det);
    }
    Ok(out)
}

fn feather(distance: f64) -> f64 {
    if distance <= 0.0 {
        1.0
    } else if distance > FEATHER_RADIUS {
        0.0
    } else {
        (-distance * distance / (2.0 * FEATHER_SIGMA * FEATHER_SIGMA)).exp()
    }
}

/// Max-combine the class's feathered boxes into one map. Horizon boxes
/// widen to the full frame (the cue is a row band, not a region).
pub fn class_map(
    dets: &[Detection],
    class: DetectionClass,
    frame_w: usize,
    frame_h: usize,
) -> RasterMap {
    let mut map = RasterMap::zeros(frame_w, frame_h);
    for det in dets.iter().filter(|d| d.class == class) {
        let (bx, bw) = if class == DetectionClass::Horizon {
            (0.0, frame_w as f64)
        } else {
            (det.x, det.w)
        };
        // Pixel centers covered by the core.
        let x0 = bx.ceil();
        let x1 = (bx + bw - 1.0).floor();
        let y0 = det.y.ceil();
        let y1 = (det.y + det.h - 1.0).floor();
        let pad = FEATHER_RADIUS.ceil() as isize;
        let rx0 = ((x0 as isize) - pad).max(0) as usize;
        let rx1 = ((x1 as isize) + pad).min(frame_w as isize - 1).max(0) as usize;
        let ry0 = ((y0 as isize) - pad).max(0) as usize;
        let ry1 = ((y1 as isize) + pad).min(frame_h as isize - 1).max(0) as usize;
        for py in ry0..=ry1 {
            for px in rx0..=rx1 {
                let dx = (x0 - px as f64).max(px as f64 - x1).max(0.0);
                let dy = (y0 - py as f64).max(py as f64 - y1).max(0.0);
                let v = (det.score * feather(dx.hypot(dy))) as f32;
                if v > map.get(px, py) {
                    map.set(px, py, v);
                }
            }
        }
    }
    map
}

/// All six class maps for one frame, in [`DETECTION_CLASSES`] order.
pub fn class_maps_for_frame(
    dets: &[Detection],
    frame_index: usize,
    frame_w: usize,
    frame_h: usize,
) -> [RasterMap; 6] {
    let frame: Vec<Detection> = dets
        .iter()
        .filter(|d| d.frame_index == frame_index)
        .cloned()
        .collect();
    DETECTION_CLASSES.map(|c| class_map(&frame, c, frame_w, frame_h))
}
