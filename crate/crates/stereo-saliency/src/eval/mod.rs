//! Ground truth and benchmarking: fixation ingestion, gaze-density maps,
//! the metric suite, reference baselines, report post-processing, and the
//! summary statistics used to compare models.

pub mod baselines;
pub mod emd;
pub mod metrics;
pub mod postprocess;
pub mod stats;

pub use baselines::{center_map, chance_map, infinite_humans, one_human, score_frame};
pub use emd::emd;
pub use metrics::{metric, FrameGroundTruth, Metric};
pub use postprocess::{histogram_match, postprocess, tune_postprocess};
pub use stats::{stats, MetricReport, ModelScores, PerVideoScores};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::ViewingGeometry;
use crate::raster::{gaussian_blur, RasterMap};

/// One recorded gaze sample: who looked where, and when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationRecord {
    pub subject: u32,
    pub frame: u32,
    /// Pixel coordinates, sub-pixel precision, inside the frame.
    pub x: f32,
    pub y: f32,
    pub t_ms: f64,
}

/// All fixation records for one clip, tied to its frame size. Every
/// record's coordinates lie inside the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    width: usize,
    height: usize,
    records: Vec<FixationRecord>,
}

/// CSV column order for fixation files.
pub const FIXATION_CSV_HEADER: &str = "subject,frame,x,y,t_ms";

impl FixationSet {
    pub fn new(width: usize, height: usize, records: Vec<FixationRecord>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("fixation set needs a non-empty frame"));
        }
        for (i, r) in records.iter().enumerate() {
            validate_record(r, width, height)
                .map_err(|msg| Error::invalid(format!("record {i}: {msg}")))?;
        }
        Ok(FixationSet {
            width,
            height,
            records,
        })
    }

    /// Parse the `subject,frame,x,y,t_ms` CSV produced by eye-tracking
    /// exports. The header row is required; any malformed or out-of-frame
    /// row rejects the whole file with its line number.
    pub fn from_csv(path: &Path, width: usize, height: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim().eq_ignore_ascii_case(FIXATION_CSV_HEADER) => {}
            _ => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("expected header `{FIXATION_CSV_HEADER}`"),
                });
            }
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let record = parse_csv_row(line).map_err(|message| Error::Record {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            })?;
            validate_record(&record, width, height).map_err(|message| Error::Record {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            })?;
            records.push(record);
        }
        FixationSet::new(width, height, records)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(FIXATION_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{},{}", r.subject, r.frame, r.x, r.y, r.t_ms);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn records(&self) -> &[FixationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Frame indices with at least one record, ascending.
    pub fn frames(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.records.iter().map(|r| r.frame).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Subject ids present, ascending.
    pub fn subjects(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.records.iter().map(|r| r.subject).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn points_for_frame(&self, frame: u32) -> Vec<(f32, f32)> {
        self.records
            .iter()
            .filter(|r| r.frame == frame)
            .map(|r| (r.x, r.y))
            .collect()
    }

    /// Records from every frame except `frame` — the shuffle pool used for
    /// center-bias-corrected scoring.
    pub fn points_excluding_frame(&self, frame: u32) -> Vec<(f32, f32)> {
        self.records
            .iter()
            .filter(|r| r.frame != frame)
            .map(|r| (r.x, r.y))
            .collect()
    }

    pub fn restricted_to_subject(&self, subject: u32) -> FixationSet {
        FixationSet {
            width: self.width,
            height: self.height,
            records: self
                .records
                .iter()
                .copied()
                .filter(|r| r.subject == subject)
                .collect(),
        }
    }

    pub fn without_subject(&self, subject: u32) -> FixationSet {
        FixationSet {
            width: self.width,
            height: self.height,
            records: self
                .records
                .iter()
                .copied()
                .filter(|r| r.subject != subject)
                .collect(),
        }
    }

    pub fn with_subjects(&self, keep: &[u32]) -> FixationSet {
        FixationSet {
            width: self.width,
            height: self.height,
            records: self
                .records
                .iter()
                .copied()
                .filter(|r| keep.contains(&r.subject))
                .collect(),
        }
    }
}

fn validate_record(r: &FixationRecord, width: usize, height: usize) -> std::result::Result<(), String> {
    if !(r.x.is_finite() && r.y.is_finite() && r.t_ms.is_finite()) {
        return Err(format!("non-finite fields ({}, {}, {})", r.x, r.y, r.t_ms));
    }
    if r.x < 0.0 || r.x >= width as f32 || r.y < 0.0 || r.y >= height as f32 {
        return Err(format!(
            "fixation ({}, {}) outside {}x{} frame",
            r.x, r.y, width, height
        ));
    }
    Ok(())
}

fn parse_csv_row(line: &str) -> std::result::Result<FixationRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    let subject: u32 = fields[0]
        .parse()
        .map_err(|_| format!("bad subject id {:?}", fields[0]))?;
    let frame: u32 = fields[1]
        .parse()
        .map_err(|_| format!("bad frame index {:?}", fields[1]))?;
    let x: f32 = fields[2].parse().map_err(|_| format!("bad x {:?}", fields[2]))?;
    let y: f32 = fields[3].parse().map_err(|_| format!("bad y {:?}", fields[3]))?;
    let t_ms: f64 = fields[4]
        .parse()
        .map_err(|_| format!("bad timestamp {:?}", fields[4]))?;
    Ok(FixationRecord {
        subject,
        frame,
        x,
        y,
        t_ms,
    })
}

/// Gaze-density map for one frame: unit impulses at the fixation points,
/// blurred with a Gaussian of one degree of visual angle, normalized to
/// total mass 1. Rescale with [`crate::raster::normalize01`] for display.
/// A frame with no fixations yields an all-zero map and a warning.
pub fn fixation_density(
    fx: &FixationSet,
    frame: u32,
    g: &ViewingGeometry,
) -> Result<RasterMap> {
    g.validate()?;
    let (w, h) = fx.dims();
    if (g.res_w, g.res_h) != (w, h) {
        return Err(Error::dims(format!(
            "geometry raster {}x{} does not match fixation frame {}x{}",
            g.res_w, g.res_h, w, h
        )));
    }
    let points = fx.points_for_frame(frame);
    if points.is_empty() {
        eprintln!("warning: no fixations for frame {frame}; density map is zero");
        return Ok(RasterMap::zeros(w, h));
    }
    let mut impulses = RasterMap::zeros(w, h);
    for (x, y) in points {
        let px = (x.round() as usize).min(w - 1);
        let py = (y.round() as usize).min(h - 1);
        impulses.set(px, py, impulses.get(px, py) + 1.0);
    }
    let blurred = gaussian_blur(&impulses, g.pixels_per_degree())?;
    let total = blurred.sum();
    if total <= 0.0 {
        return Err(Error::invalid("fixation density lost all mass in blurring"));
    }
    Ok(blurred.map(|v| (f64::from(v) / total) as f32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn record(subject: u32, frame: u32, x: f32, y: f32) -> FixationRecord {
        FixationRecord {
            subject,
            frame,
            x,
            y,
            t_ms: 0.0,
        }
    }

    // One physical cm per pixel, so a degree of visual angle spans only a
    // few pixels and blur radii stay small relative to the test frames.
    fn small_geometry(w: usize, h: usize) -> ViewingGeometry {
        ViewingGeometry {
            z_observer: 183.0,
            l_eyes: 6.3,
            screen_w: w as f64,
            screen_h: h as f64,
            res_w: w,
            res_h: h,
            alpha_deg: 1.0,
            frame_rate: 30.0,
        }
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fx.csv");
        let fx = FixationSet::new(
            64,
            48,
            vec![record(1, 0, 10.5, 20.25), record(2, 3, 63.0, 0.0)],
        )
        .unwrap();
        fx.write_csv(&path).unwrap();
        let back = FixationSet::from_csv(&path, 64, 48).unwrap();
        assert_eq!(back, fx);
    }

    #[test]
    fn missing_header_rejects_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fx.csv");
        std::fs::write(&path, "1,0,1,1,0\n").unwrap();
        let err = FixationSet::from_csv(&path, 8, 8).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fx.csv");
        std::fs::write(&path, "subject,frame,x,y,t_ms\n1,0,1,1,0\n1,zero,1,1,0\n").unwrap();
        let err = FixationSet::from_csv(&path, 8, 8).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn out_of_frame_fixation_rejects_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fx.csv");
        std::fs::write(&path, "subject,frame,x,y,t_ms\n1,0,8.0,1,0\n").unwrap();
        let err = FixationSet::from_csv(&path, 8, 8).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn density_is_a_distribution_peaked_at_a_single_fixation() {
        let (w, h) = (96, 54);
        let g = small_geometry(w, h);
        let fx = FixationSet::new(w, h, vec![record(1, 0, 48.0, 27.0)]).unwrap();
        let d = fixation_density(&fx, 0, &g).unwrap();
        assert!((d.sum() - 1.0).abs() < 1e-5, "mass {}", d.sum());
        let peak = d
            .argsort()
            .last()
            .map(|&i| (i % w, i / w))
            .unwrap();
        assert_eq!(peak, (48, 27));
    }

    #[test]
    fn frame_without_fixations_maps_to_zero() {
        let (w, h) = (32, 32);
        let g = small_geometry(w, h);
        let fx = FixationSet::new(w, h, vec![record(1, 7, 4.0, 4.0)]).unwrap();
        let d = fixation_density(&fx, 0, &g).unwrap();
        assert_eq!(d.min_max(), (0.0, 0.0));
    }

    #[test]
    fn two_distant_fixations_split_the_mass_evenly() {
        let (w, h) = (192, 108);
        let g = small_geometry(w, h);
        // Blur radius is about 3 * pixels_per_degree; both points sit far
        // from the borders and from the x = 96 midline.
        assert!(3.0 * g.pixels_per_degree() < 40.0);
        let fx = FixationSet::new(
            w,
            h,
            vec![record(1, 0, 48.0, 54.0), record(1, 0, 144.0, 54.0)],
        )
        .unwrap();
        let d = fixation_density(&fx, 0, &g).unwrap();
        let left: f64 = (0..h)
            .flat_map(|y| (0..w / 2).map(move |x| (x, y)))
            .map(|(x, y)| f64::from(d.get(x, y)))
            .sum();
        assert!((left - 0.5).abs() < 1e-6, "left mass {left}");
        assert!((d.sum() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn density_requires_matching_geometry() {
        let fx = FixationSet::new(32, 32, vec![record(1, 0, 4.0, 4.0)]).unwrap();
        let g = small_geometry(64, 64);
        assert!(fixation_density(&fx, 0, &g).is_err());
    }

    #[test]
    fn subject_filters_partition_the_records() {
        let fx = FixationSet::new(
            16,
            16,
            vec![record(1, 0, 1.0, 1.0), record(2, 0, 2.0, 2.0), record(1, 1, 3.0, 3.0)],
        )
        .unwrap();
        assert_eq!(fx.subjects(), vec![1, 2]);
        assert_eq!(fx.frames(), vec![0, 1]);
        assert_eq!(fx.restricted_to_subject(1).len(), 2);
        assert_eq!(fx.without_subject(1).len(), 1);
        assert_eq!(fx.with_subjects(&[1, 2]).len(), 3);
        assert_eq!(fx.points_excluding_frame(0), vec![(3.0, 3.0)]);
    }
}
