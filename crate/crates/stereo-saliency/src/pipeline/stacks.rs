//! On-disk feature stacks: one directory per video holding a JSON index
//! plus, per frame, the 24 conspicuity maps as raw float containers and a
//! `_velocity.raw` sidecar (the pre-reduction velocity magnitude the next
//! frame's acceleration map differences against).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{FixationSet, fixation_density};
use crate::features::{FEATURE_COUNT, FEATURE_ORDER, FeatureKind};
use crate::fusion::{FeatureStack, FrameSource};
use crate::geometry::ViewingGeometry;
use crate::io::{read_raw, write_raw};
use crate::raster::{RasterMap, normalize01};

/// Bumped whenever the on-disk stack layout changes shape.
pub const STACK_FORMAT_VERSION: u32 = 1;

/// Name of the velocity-state sidecar inside each frame directory. The
/// leading underscore keeps it clear of feature names.
pub const VELOCITY_SIDECAR: &str = "_velocity.raw";

/// Catalog of one video's extracted stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackIndex {
    pub version: u32,
    pub video: String,
    pub width: usize,
    pub height: usize,
    /// Frame ids (source file stems) in temporal order. A frame's position
    /// here is the frame number fixation records refer to.
    pub frames: Vec<String>,
    /// Feature file stems in stack order, recorded so a reader can detect
    /// a layout drift without guessing.
    pub features: Vec<String>,
}

impl StackIndex {
    pub fn new(video: &str, width: usize, height: usize, frames: Vec<String>) -> Self {
        StackIndex {
            version: STACK_FORMAT_VERSION,
            video: video.to_string(),
            width,
            height,
            frames,
            features: FEATURE_ORDER.iter().map(|f| f.name().to_string()).collect(),
        }
    }

    /// Reads and checks `index.json` from a stack directory.
    pub fn load(dir: &Path) -> Result<StackIndex> {
        let path = dir.join("index.json");
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::MissingInput(format!("stack index {}: {e}", path.display()))
        })?;
        let idx: StackIndex = serde_json::from_str(&text)
            .map_err(|e| Error::format(&path, e.to_string()))?;
        if idx.version != STACK_FORMAT_VERSION {
            return Err(Error::VersionMismatch(format!(
                "stack {} was written as format v{}, this build reads v{}; re-run extraction",
                dir.display(),
                idx.version,
                STACK_FORMAT_VERSION
            )));
        }
        let expected: Vec<String> = FEATURE_ORDER.iter().map(|f| f.name().to_string()).collect();
        if idx.features != expected {
            return Err(Error::VersionMismatch(format!(
                "stack {} lists a different feature set; re-run extraction",
                dir.display()
            )));
        }
        Ok(idx)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).expect("index serializes");
        Ok(std::fs::write(dir.join("index.json"), text)?)
    }
}

/// `<output_dir>/stacks/<video>`.
pub fn stack_dir(output_dir: &Path, video: &str) -> PathBuf {
    output_dir.join("stacks").join(video)
}

fn frame_dir(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(frame_id)
}

/// Writes one frame's 24 maps plus the velocity sidecar.
pub fn write_frame_stack(
    dir: &Path,
    frame_id: &str,
    stack: &FeatureStack,
    velocity_state: &RasterMap,
) -> Result<()> {
    let fdir = frame_dir(dir, frame_id);
    std::fs::create_dir_all(&fdir)?;
    for (kind, map) in FEATURE_ORDER.iter().zip(stack.maps()) {
        write_raw(&fdir.join(format!("{}.raw", kind.name())), map)?;
    }
    write_raw(&fdir.join(VELOCITY_SIDECAR), velocity_state)
}

/// Reads one frame's stack back, validating dimensions.
pub fn read_frame_stack(dir: &Path, frame_id: &str, dims: (usize, usize)) -> Result<FeatureStack> {
    let fdir = frame_dir(dir, frame_id);
    let mut maps = Vec::with_capacity(FEATURE_COUNT);
    for kind in FEATURE_ORDER {
        let path = fdir.join(format!("{}.raw", kind.name()));
        let map = read_raw(&path)?;
        if map.dims() != dims {
            return Err(Error::dims(format!(
                "{}: {:?} but the index declares {:?}",
                path.display(),
                map.dims(),
                dims
            )));
        }
        maps.push(map);
    }
    FeatureStack::from_canonical(maps)
}

/// Reads the velocity-state sidecar of one frame.
pub fn read_velocity_state(dir: &Path, frame_id: &str) -> Result<RasterMap> {
    read_raw(&frame_dir(dir, frame_id).join(VELOCITY_SIDECAR))
}

/// True when every file of one frame is already on disk (the resume
/// check; a partially written frame is re-extracted).
pub fn frame_complete(dir: &Path, frame_id: &str) -> bool {
    let fdir = frame_dir(dir, frame_id);
    FEATURE_ORDER
        .iter()
        .all(|k| fdir.join(format!("{}.raw", k.name())).is_file())
        && fdir.join(VELOCITY_SIDECAR).is_file()
}

/// A stored stack exposed as a training [`FrameSource`]: features read
/// from disk, targets rendered from the gaze recording on demand. An
/// optional feature mask zeroes the unselected maps — a constant column
/// never wins a split, so masking at the source restricts both training
/// and importance to the selected features.
pub struct StackSource {
    dir: PathBuf,
    index: StackIndex,
    fixations: FixationSet,
    geometry: ViewingGeometry,
    mask: Option<[bool; FEATURE_COUNT]>,
}

impl StackSource {
    pub fn open(
        dir: &Path,
        fixations: FixationSet,
        geometry: &ViewingGeometry,
        mask: Option<[bool; FEATURE_COUNT]>,
    ) -> Result<StackSource> {
        let index = StackIndex::load(dir)?;
        if fixations.dims() != (index.width, index.height) {
            return Err(Error::dims(format!(
                "fixations are on a {}x{} raster but stack {} is {}x{}",
                fixations.dims().0,
                fixations.dims().1,
                index.video,
                index.width,
                index.height
            )));
        }
        if (geometry.res_w, geometry.res_h) != (index.width, index.height) {
            return Err(Error::dims(format!(
                "geometry raster {}x{} does not match stack {}x{}",
                geometry.res_w, geometry.res_h, index.width, index.height
            )));
        }
        Ok(StackSource {
            dir: dir.to_path_buf(),
            index,
            fixations,
            geometry: *geometry,
            mask,
        })
    }

    pub fn index(&self) -> &StackIndex {
        &self.index
    }

    /// The feature stack of one frame, masked if a selection is active.
    pub fn stack(&self, index: usize) -> Result<FeatureStack> {
        let id = &self.index.frames[index];
        let stack = read_frame_stack(&self.dir, id, (self.index.width, self.index.height))?;
        match &self.mask {
            None => Ok(stack),
            Some(mask) => apply_mask(stack, mask),
        }
    }
}

/// Zeroes the unselected maps of a stack. A zeroed feature is invisible
/// to training (a constant column never wins a split) and to every
/// classical fusion scheme that is handed the masked maps.
pub fn apply_mask(stack: FeatureStack, mask: &[bool; FEATURE_COUNT]) -> Result<FeatureStack> {
    let maps = stack
        .maps()
        .iter()
        .zip(mask)
        .map(|(m, &keep)| {
            if keep {
                m.clone()
            } else {
                RasterMap::zeros(m.width(), m.height())
            }
        })
        .collect();
    FeatureStack::from_canonical(maps)
}

impl FrameSource for StackSource {
    fn name(&self) -> &str {
        &self.index.video
    }

    fn frame_count(&self) -> usize {
        self.index.frames.len()
    }

    fn frame(&self, index: usize) -> Result<(FeatureStack, RasterMap)> {
        let stack = self.stack(index)?;
        // Rescaled (not mass-1) density, so leaf means span the same [0,1]
        // scale as the features and every map the pipeline emits.
        let density = fixation_density(&self.fixations, index as u32, &self.geometry)?;
        Ok((stack, normalize01(&density)?))
    }
}

/// Parses `--features` selections: comma-separated names, each either a
/// feature or one of the group aliases.
pub fn parse_feature_selection(spec: &str) -> Result<[bool; FEATURE_COUNT]> {
    let mut mask = [false; FEATURE_COUNT];
    for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let group: &[FeatureKind] = match token {
            "all" => &FEATURE_ORDER,
            "photometric" => &FEATURE_ORDER[0..10],
            "motion" => &FEATURE_ORDER[10..17],
            "depth" => &FEATURE_ORDER[17..18],
            "high_level" => &FEATURE_ORDER[18..24],
            name => match FeatureKind::from_name(name) {
                Some(k) => {
                    mask[k.index()] = true;
                    continue;
                }
                None => {
                    return Err(Error::invalid(format!(
                        "unknown feature {name:?}; expected a feature name or one of \
                         all, photometric, motion, depth, high_level"
                    )));
                }
            },
        };
        for k in group {
            mask[k.index()] = true;
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::invalid("feature selection is empty"));
    }
    Ok(mask)
}
