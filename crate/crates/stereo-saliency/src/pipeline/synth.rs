//! A self-contained two-clip demo dataset, generated rather than shipped
//! as binary media. Each clip is a textured warm object crossing a cool
//! static background, nearer than it in depth, with a tracking face box
//! and three synthetic observers — enough signal for every stage of the
//! pipeline to produce something measurably better than chance, small
//! enough to run end to end in seconds.

use std::path::{Path, PathBuf};

use crate::color::ColorFrame;
use crate::error::Result;
use crate::eval::{FixationRecord, FixationSet};
use crate::io::{write_color, write_raw};
use crate::raster::RasterMap;

pub const DEMO_WIDTH: usize = 96;
pub const DEMO_HEIGHT: usize = 54;
pub const DEMO_FRAME_COUNT: usize = 10;
pub const DEMO_SEED: u64 = 7;

/// Deterministic per-pixel noise in [0,1); integer mixing only, so the
/// dataset is byte-identical across platforms and runs.
fn hash01(x: usize, y: usize, salt: u64) -> f32 {
    let mut h = (x as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ salt.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h >> 40) as f32 / (1u64 << 24) as f32
}

/// Symmetric noise in [-a, a].
fn jitter(x: usize, y: usize, salt: u64, a: f32) -> f32 {
    (hash01(x, y, salt) * 2.0 - 1.0) * a
}

/// Axis-aligned object bounds for one frame, pixel units.
#[derive(Debug, Clone, Copy)]
struct ObjectBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl ObjectBox {
    fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

struct Clip {
    name: &'static str,
    /// Object bounds at frame t.
    object: fn(usize) -> ObjectBox,
    /// True when the pixel lies on the object at frame t.
    covers: fn(usize, usize, usize) -> bool,
    /// Object surface color at (x, y), 0..255 per channel.
    paint: fn(usize, usize) -> [f32; 3],
    /// Odd-frame gaze resting point for the wandering observer, chosen
    /// away from the object's whole trajectory.
    rest_point: (f32, f32),
    salt: u64,
}

fn box_bounds(t: usize) -> ObjectBox {
    let drift = 2.0 * (t as f64 * 0.7).sin();
    ObjectBox {
        x: 6.0 + 7.0 * t as f64,
        y: 18.0 + drift,
        w: 14.0,
        h: 14.0,
    }
}

fn box_covers(x: usize, y: usize, t: usize) -> bool {
    let b = box_bounds(t);
    let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
    xf >= b.x && xf < b.x + b.w && yf >= b.y && yf < b.y + b.h
}

fn box_paint(x: usize, y: usize) -> [f32; 3] {
    // Coarse checker so the texture bank has an oriented signal.
    let checker = if (x / 3 + y / 3) % 2 == 0 { 14.0 } else { -14.0 };
    let n = jitter(x, y, 11, 10.0);
    [214.0 + checker + n, 158.0 + checker + n, 64.0 + n]
}

fn disc_bounds(t: usize) -> ObjectBox {
    let cx = 14.0 + 6.0 * t as f64;
    let cy = 13.0 + 2.5 * t as f64;
    ObjectBox {
        x: cx - 8.0,
        y: cy - 8.0,
        w: 16.0,
        h: 16.0,
    }
}

fn disc_covers(x: usize, y: usize, t: usize) -> bool {
    let b = disc_bounds(t);
    let (cx, cy) = b.center();
    let dx = x as f64 + 0.5 - cx;
    let dy = y as f64 + 0.5 - cy;
    dx * dx + dy * dy <= 8.0 * 8.0
}

fn disc_paint(x: usize, y: usize) -> [f32; 3] {
    let rings = ((x as f32 * 0.9).sin() + (y as f32 * 0.9).cos()) * 9.0;
    let n = jitter(x, y, 13, 10.0);
    [226.0 + rings + n, 122.0 + rings + n, 96.0 + n]
}

const CLIPS: [Clip; 2] = [
    Clip {
        name: "amber_box",
        object: box_bounds,
        covers: box_covers,
        paint: box_paint,
        rest_point: (88.0, 46.0),
        salt: 101,
    },
    Clip {
        name: "coral_disc",
        object: disc_bounds,
        covers: disc_covers,
        paint: disc_paint,
        rest_point: (8.0, 8.0),
        salt: 202,
    },
];

fn background(x: usize, y: usize, salt: u64) -> [f32; 3] {
    let n = jitter(x, y, salt, 8.0);
    let grad = y as f32 * 0.25;
    [68.0 + n + grad, 78.0 + n + grad, 96.0 + n + grad]
}

fn frame_stem(t: usize) -> String {
    format!("fr_{t:03}")
}

fn write_clip(root: &Path, clip: &Clip) -> Result<()> {
    let dir = root.join(clip.name);
    let frames_dir = dir.join("frames");
    let disp_dir = dir.join("disparity");
    std::fs::create_dir_all(&frames_dir)?;
    std::fs::create_dir_all(&disp_dir)?;

    let mut detections = String::from("# frame class x y w h score\n");
    let mut records = Vec::new();
    for t in 0..DEMO_FRAME_COUNT {
        let covers = clip.covers;
        let frame = ColorFrame::rgb8_from_fn(DEMO_WIDTH, DEMO_HEIGHT, |x, y| {
            if covers(x, y, t) {
                (clip.paint)(x, y)
            } else {
                background(x, y, clip.salt)
            }
        });
        write_color(&frames_dir.join(format!("{}.png", frame_stem(t))), &frame)?;

        // The object floats nearer than the screen plane; its disparity
        // drifts so depth change over time is nonzero.
        let near = 2.0 + 0.05 * t as f32;
        let disp = RasterMap::from_fn(DEMO_WIDTH, DEMO_HEIGHT, |x, y| {
            if covers(x, y, t) { near } else { 0.2 }
        });
        write_raw(&disp_dir.join(format!("{}.raw", frame_stem(t))), &disp)?;

        let b = (clip.object)(t);
        detections.push_str(&format!(
            "{t} face {:.1} {:.1} {:.1} {:.1} 0.9\n",
            b.x, b.y, b.w, b.h
        ));

        let (cx, cy) = b.center();
        let clamp_x = |v: f32| v.clamp(1.0, DEMO_WIDTH as f32 - 2.0);
        let clamp_y = |v: f32| v.clamp(1.0, DEMO_HEIGHT as f32 - 2.0);
        for subject in 1..=3u32 {
            let salt = clip.salt + u64::from(subject) * 1000;
            let off_target = subject == 3 && t % 2 == 1;
            let (x, y) = if off_target {
                (
                    clip.rest_point.0 + jitter(t, 0, salt, 3.0),
                    clip.rest_point.1 + jitter(t, 1, salt, 3.0),
                )
            } else {
                (
                    cx as f32 + jitter(t, 2, salt, 2.5),
                    cy as f32 + jitter(t, 3, salt, 2.5),
                )
            };
            records.push(FixationRecord {
                subject,
                frame: t as u32,
                x: clamp_x(x),
                y: clamp_y(y),
                t_ms: t as f64 * 40.0,
            });
        }
    }
    std::fs::write(dir.join("detections.csv"), detections)?;
    FixationSet::new(DEMO_WIDTH, DEMO_HEIGHT, records)?.write_csv(&dir.join("fixations.csv"))?;
    Ok(())
}

/// One centimeter per pixel at HD viewing distance, and a block-matching
/// search just wider than the fastest object (7 px/frame).
const DEMO_CONFIG: &str = "\
[geometry]
z_observer = 183.0
screen_w = 96.0
screen_h = 54.0
res_w = 96
res_h = 54
alpha_deg = 1.0
frame_rate = 25.0

[motion]
block_size = 8
search_radius = 8
";

fn demo_manifest_json() -> String {
    let videos: Vec<serde_json::Value> = CLIPS
        .iter()
        .map(|c| {
            serde_json::json!({
                "name": c.name,
                "frames": format!("{}/frames", c.name),
                "disparity": format!("{}/disparity", c.name),
                "detections": format!("{}/detections.csv", c.name),
                "fixations": format!("{}/fixations.csv", c.name),
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "dataset_root": ".",
        "config": "config.toml",
        "output_dir": "out",
        "seed": DEMO_SEED,
        "videos": videos,
        "split": { "train": ["amber_box"], "validation": ["coral_disc"] },
    });
    serde_json::to_string_pretty(&manifest).expect("static manifest serializes")
}

/// Writes the whole dataset under `root` and returns the manifest path.
/// Regenerating over an existing copy rewrites the same bytes.
pub fn write_demo_dataset(root: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(root)?;
    for clip in &CLIPS {
        write_clip(root, clip)?;
    }
    std::fs::write(root.join("config.toml"), DEMO_CONFIG)?;
    let manifest_path = root.join("manifest.json");
    std::fs::write(&manifest_path, demo_manifest_json())?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_color;
    use crate::pipeline::manifest::RunManifest;

    #[test]
    fn demo_dataset_loads_and_validates() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest_path = write_demo_dataset(tmp.path()).unwrap();
        let manifest = RunManifest::load(&manifest_path).unwrap();
        assert_eq!(manifest.videos.len(), 2);
        assert_eq!(manifest.split.train, ["amber_box"]);
        assert_eq!(manifest.split.validation, ["coral_disc"]);
        for v in &manifest.videos {
            manifest.validate_paths(v).unwrap();
        }
        let frame = read_color(&tmp.path().join("amber_box/frames/fr_000.png")).unwrap();
        assert_eq!(frame.dims(), (DEMO_WIDTH, DEMO_HEIGHT));
        let cfg = crate::config::RunConfig::load(&tmp.path().join("config.toml")).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.geometry.res_w, DEMO_WIDTH);
    }

    #[test]
    fn demo_dataset_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_demo_dataset(a.path()).unwrap();
        write_demo_dataset(b.path()).unwrap();
        let mut paths: Vec<PathBuf> = walk(a.path());
        paths.sort();
        assert!(paths.len() > 40, "expected a full tree, got {}", paths.len());
        for pa in paths {
            let rel = pa.strip_prefix(a.path()).unwrap();
            let pb = b.path().join(rel);
            assert_eq!(
                std::fs::read(&pa).unwrap(),
                std::fs::read(&pb).unwrap(),
                "{rel:?} differs between two generations"
            );
        }
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn objects_stay_inside_the_frame() {
        for clip in &CLIPS {
            for t in 0..DEMO_FRAME_COUNT {
                let b = (clip.object)(t);
                assert!(b.x >= 0.0 && b.x + b.w <= DEMO_WIDTH as f64, "{} t={t}", clip.name);
                assert!(b.y >= 0.0 && b.y + b.h <= DEMO_HEIGHT as f64, "{} t={t}", clip.name);
            }
        }
    }
}
