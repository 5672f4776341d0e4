//! Map fusion: assembling the per-frame feature stack, sampling training
//! data against fixation-density targets, the bagged regression forest,
//! and the classical fusion schemes it is compared against.

pub mod baselines;
pub mod forest;

pub use baselines::{FusionScheme, fuse_baseline};
pub use forest::{ForestModel, ForestParams, oob_error, oob_importance, train_forest};

use crate::error::{Error, Result};
use crate::features::{FEATURE_COUNT, FEATURE_ORDER, FeatureKind};
use crate::raster::RasterMap;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-splitting hash so every (tree, video, frame) consumer gets an
/// independent deterministic RNG from one master seed.
pub(crate) fn derive_seed(master: u64, stream: u64) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(master ^ splitmix64(stream))
}

/// The 24 conspicuity maps of one frame in canonical order, all on one
/// grid and all in [0,1]. The order is identical at training and
/// prediction time; models refuse stacks whose names disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    width: usize,
    height: usize,
    maps: Vec<RasterMap>,
}

impl FeatureStack {
    /// Build from maps in canonical order.
    pub fn from_canonical(maps: Vec<RasterMap>) -> Result<Self> {
        if maps.len() != FEATURE_COUNT {
            return Err(Error::invalid(format!(
                "expected {FEATURE_COUNT} feature maps, got {}",
                maps.len()
            )));
        }
        let (width, height) = maps[0].dims();
        for (i, m) in maps.iter().enumerate() {
            if m.dims() != (width, height) {
                return Err(Error::dims(format!(
                    "feature {} is {:?}, expected {:?}",
                    FEATURE_ORDER[i].name(),
                    m.dims(),
                    (width, height)
                )));
            }
            if !m.is_normalized() {
                return Err(Error::invalid(format!(
                    "feature {} is not normalized to [0,1]",
                    FEATURE_ORDER[i].name()
                )));
            }
        }
        Ok(FeatureStack { width, height, maps })
    }

    /// Build from labeled maps in any order. Absent detector-based maps
    /// (face, person, vehicle, animal, text, horizon) default to zero;
    /// absent bottom-up maps are an error.
    pub fn assemble(mut labeled: Vec<(FeatureKind, RasterMap)>) -> Result<Self> {
        let (width, height) = labeled
            .first()
            .map(|(_, m)| m.dims())
            .ok_or_else(|| Error::invalid("no feature maps supplied"))?;
        let mut slots: Vec<Option<RasterMap>> = (0..FEATURE_COUNT).map(|_| None).collect();
        for (kind, map) in labeled.drain(..) {
            let idx = kind.index();
            if slots[idx].is_some() {
                return Err(Error::invalid(format!("duplicate map for {}", kind.name())));
            }
            slots[idx] = Some(map);
        }
        let maps: Vec<RasterMap> = slots
            .into_iter()
            .zip(FEATURE_ORDER)
            .map(|(slot, kind)| match slot {
                Some(m) => Ok(m),
                None if kind.is_high_level() => Ok(RasterMap::zeros(width, height)),
                None => Err(Error::MissingInput(format!(
                    "feature map {} was not supplied",
                    kind.name()
                ))),
            })
            .collect::<Result<_>>()?;
        FeatureStack::from_canonical(maps)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn maps(&self) -> &[RasterMap] {
        &self.maps
    }

    pub fn map(&self, kind: FeatureKind) -> &RasterMap {
        &self.maps[kind.index()]
    }

    /// One pixel's feature vector in canonical order.
    pub fn pixel(&self, x: usize, y: usize) -> [f32; FEATURE_COUNT] {
        let mut row = [0f32; FEATURE_COUNT];
        for (v, m) in row.iter_mut().zip(&self.maps) {
            *v = m.get(x, y);
        }
        row
    }
}

/// Where one training row came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleProvenance {
    pub video: String,
    pub frame: usize,
    pub x: usize,
    pub y: usize,
}

/// Regression rows: feature vectors paired with fixation-density targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub features: Vec<[f32; FEATURE_COUNT]>,
    pub targets: Vec<f32>,
    pub provenance: Vec<SampleProvenance>,
}

impl TrainingSet {
    pub fn new() -> Self {
        TrainingSet::default()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn push(
        &mut self,
        features: [f32; FEATURE_COUNT],
        target: f32,
        provenance: SampleProvenance,
    ) -> Result<()> {
        if !features.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::invalid("feature values must lie in [0,1]"));
        }
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::invalid(format!("target {target} outside [0,1]")));
        }
        self.features.push(features);
        self.targets.push(target);
        self.provenance.push(provenance);
        Ok(())
    }
}

/// A video that can hand out (feature stack, fixation-density target)
/// pairs frame by frame.
pub trait FrameSource {
    fn name(&self) -> &str;
    fn frame_count(&self) -> usize;
    fn frame(&self, index: usize) -> Result<(FeatureStack, RasterMap)>;
}

/// In-memory [`FrameSource`].
pub struct MemorySource {
    pub name: String,
    pub frames: Vec<(FeatureStack, RasterMap)>,
}

impl FrameSource for MemorySource {
    fn name(&self) -> &str {
        &self.name
    }

    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<(FeatureStack, RasterMap)> {
        Ok(self.frames[index].clone())
    }
}

/// Draw the training set: the first `frames_per_video` frames of each
/// clip, and per frame a stratified pixel sample — half uniform over the
/// frame, half uniform over the top fixation-density decile, both with
/// replacement. Fully determined by `seed`.
pub fn sample_training(
    sources: &[&dyn FrameSource],
    frames_per_video: usize,
    pixels_per_frame: usize,
    seed: u64,
) -> Result<TrainingSet> {
    let mut ts = TrainingSet::new();
    for (vi, src) in sources.iter().enumerate() {
        let frames = frames_per_video.min(src.frame_count());
        for fi in 0..frames {
            let (stack, target) = src.frame(fi)?;
            if target.dims() != stack.dims() {
                return Err(Error::dims(format!(
                    "target {:?} vs stack {:?} in {} frame {fi}",
                    target.dims(),
                    stack.dims(),
                    src.name()
                )));
            }
            if !target.is_normalized() {
                return Err(Error::invalid(format!(
                    "fixation-density target of {} frame {fi} is not in [0,1]",
                    src.name()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                seed,
                ((vi as u64) << 32) | fi as u64,
            ));
            let (w, h) = stack.dims();
            let n = w * h;
            let order = target.argsort();
            let decile = &order[n - (n / 10).max(1)..];
            let dense_half = pixels_per_frame / 2;
            for k in 0..pixels_per_frame {
                let idx = if k < dense_half {
                    decile[rng.random_range(0..decile.len())]
                } else {
                    rng.random_range(0..n)
                };
                let (x, y) = (idx % w, idx / w);
                ts.push(
                    stack.pixel(x, y),
                    target.get(x, y),
                    SampleProvenance { video: src.name().to_string(), frame: fi, x, y },
                )?;
            }
        }
    }
    Ok(ts)
}
