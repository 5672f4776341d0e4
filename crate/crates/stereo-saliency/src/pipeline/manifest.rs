//! The run manifest: one JSON file naming every input of a run — where the
//! videos live, which files carry disparity / flow / detections / gaze, how
//! the corpus splits into training and validation, and where output goes.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where per-frame optical flow comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum FlowSpec {
    /// Estimate flow with the built-in block matcher.
    #[default]
    Builtin,
    /// Read precomputed `.flo` files from this directory.
    Dir(PathBuf),
}

impl From<String> for FlowSpec {
    fn from(s: String) -> Self {
        if s == "builtin" {
            FlowSpec::Builtin
        } else {
            FlowSpec::Dir(PathBuf::from(s))
        }
    }
}

impl From<FlowSpec> for String {
    fn from(f: FlowSpec) -> String {
        match f {
            FlowSpec::Builtin => "builtin".into(),
            FlowSpec::Dir(p) => p.to_string_lossy().into_owned(),
        }
    }
}

/// One video of the corpus. All paths are relative to the dataset root
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    /// Unique name; doubles as the output subdirectory.
    pub name: String,
    /// Directory of left-eye frames (PNG/PPM), ordered by file name.
    pub frames: PathBuf,
    /// Directory of per-frame disparity maps.
    pub disparity: PathBuf,
    /// `"builtin"` or a directory of `.flo` files.
    #[serde(default)]
    pub flow: FlowSpec,
    /// Detection sidecar file (one box per line).
    pub detections: PathBuf,
    /// Gaze recording CSV (`subject,frame,x,y,t_ms`).
    pub fixations: PathBuf,
}

/// Train/validation partition by video name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

/// Everything a run needs, resolved from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Base directory video paths resolve against.
    pub dataset_root: PathBuf,
    pub videos: Vec<VideoEntry>,
    pub split: Split,
    /// Optional TOML config; defaults apply when absent.
    #[serde(default)]
    pub config: Option<PathBuf>,
    /// Where stacks, models, predictions, and reports land.
    pub output_dir: PathBuf,
    /// Base seed for every stochastic stage.
    #[serde(default)]
    pub seed: u64,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
}

impl RunManifest {
    /// Parses a manifest document. `base` is the directory the manifest was
    /// read from; `dataset_root`, `output_dir`, and `config` resolve
    /// against it, and per-video paths against the resolved dataset root.
    pub fn parse(text: &str, base: &Path) -> Result<RunManifest> {
        let mut m: RunManifest = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("manifest: {e}")))?;
        m.dataset_root = resolve(base, &m.dataset_root);
        m.output_dir = resolve(base, &m.output_dir);
        m.config = m.config.take().map(|c| resolve(base, &c));
        for v in &mut m.videos {
            v.frames = resolve(&m.dataset_root, &v.frames);
            v.disparity = resolve(&m.dataset_root, &v.disparity);
            v.detections = resolve(&m.dataset_root, &v.detections);
            v.fixations = resolve(&m.dataset_root, &v.fixations);
            if let FlowSpec::Dir(d) = &v.flow {
                v.flow = FlowSpec::Dir(resolve(&m.dataset_root, d));
            }
        }
        m.validate()?;
        Ok(m)
    }

    /// Reads, parses, resolves, and validates a manifest file.
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunManifest::parse(&text, base).map_err(|e| match e {
            Error::InvalidInput(m) => Error::format(path, m),
            other => other,
        })
    }

    /// Serializes (without un-resolving paths) for provenance copies.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Structural checks: names unique, split names known, and the train
    /// and validation sets disjoint.
    pub fn validate(&self) -> Result<()> {
        if self.videos.is_empty() {
            return Err(Error::invalid("manifest lists no videos"));
        }
        let mut names = BTreeSet::new();
        for v in &self.videos {
            if !names.insert(v.name.as_str()) {
                return Err(Error::invalid(format!("duplicate video name {:?}", v.name)));
            }
            if v.name.is_empty() || v.name.contains(['/', '\\']) {
                return Err(Error::invalid(format!(
                    "video name {:?} must be a non-empty path-safe token",
                    v.name
                )));
            }
        }
        for side in [&self.split.train, &self.split.validation] {
            for n in side {
                if !names.contains(n.as_str()) {
                    return Err(Error::invalid(format!(
                        "split references unknown video {n:?}"
                    )));
                }
            }
        }
        let train: BTreeSet<_> = self.split.train.iter().collect();
        for n in &self.split.validation {
            if train.contains(n) {
                return Err(Error::invalid(format!(
                    "video {n:?} appears in both train and validation"
                )));
            }
        }
        Ok(())
    }

    /// Checks that every referenced file and directory of one video exists,
    /// so missing data surfaces as a per-video failure instead of a crash
    /// mid-extraction.
    pub fn validate_paths(&self, video: &VideoEntry) -> Result<()> {
        for (what, p, dir) in [
            ("frames directory", &video.frames, true),
            ("disparity directory", &video.disparity, true),
            ("detections file", &video.detections, false),
            ("fixations file", &video.fixations, false),
        ] {
            let ok = if dir { p.is_dir() } else { p.is_file() };
            if !ok {
                return Err(Error::MissingInput(format!(
                    "{}: {what} {} not found",
                    video.name,
                    p.display()
                )));
            }
        }
        if let FlowSpec::Dir(d) = &video.flow {
            if !d.is_dir() {
                return Err(Error::MissingInput(format!(
                    "{}: flow directory {} not found",
                    video.name,
                    d.display()
                )));
            }
        }
        Ok(())
    }

    pub fn video(&self, name: &str) -> Result<&VideoEntry> {
        self.videos
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::invalid(format!("unknown video {name:?}")))
    }
}
