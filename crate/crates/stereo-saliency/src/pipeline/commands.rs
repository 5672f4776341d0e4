//! The run commands: extract, train, predict, importance, evaluate, and
//! compare-fusion. Each is a plain library function over a [`RunContext`]
//! so the CLI, the examples, and tests all drive the same code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::baselines::default_center_sigma;
use crate::eval::{
    FixationSet, Metric, MetricReport, ModelScores, PerVideoScores, center_map, chance_map,
    infinite_humans, one_human, score_frame, stats,
};
use crate::features::{FEATURE_COUNT, FEATURE_ORDER, FeatureKind};
use crate::fusion::baselines::{FusionScheme, fuse_baseline, nnls};
use crate::fusion::forest::{ForestModel, ForestParams, oob_error, predict, train_forest};
use crate::fusion::{FeatureStack, FrameSource, TrainingSet, derive_seed, sample_training};
use crate::io::{BitDepth, write_map, write_raw};
use crate::pipeline::extract::{
    ExtractReport, FeatureTables, extract_video, video_geometry,
};
use crate::pipeline::manifest::{RunManifest, VideoEntry};
use crate::pipeline::stacks::{
    StackIndex, StackSource, apply_mask, parse_feature_selection, read_frame_stack, stack_dir,
};
use crate::raster::{RasterMap, normalize01};

use rayon::prelude::*;

/// Default number of leading frames sampled per training video.
pub const DEFAULT_FRAMES_PER_VIDEO: usize = 22;
/// Default number of pixels sampled per training frame.
pub const DEFAULT_PIXELS_PER_FRAME: usize = 200;

/// Overrides a caller may apply on top of the manifest.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the manifest's config path.
    pub config: Option<PathBuf>,
    /// Replaces the manifest's seed.
    pub seed: Option<u64>,
    /// Replaces the manifest's output directory (flag or environment).
    pub output_dir: Option<PathBuf>,
    /// Restricts the feature set (comma-separated names or groups).
    pub features: Option<String>,
}

/// Everything a command needs, resolved once.
pub struct RunContext {
    pub manifest: RunManifest,
    pub config: RunConfig,
    pub tables: FeatureTables,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub features_spec: Option<String>,
    pub mask: Option<[bool; FEATURE_COUNT]>,
}

impl RunContext {
    pub fn load(manifest_path: &Path, opts: &RunOptions) -> Result<RunContext> {
        let manifest = RunManifest::load(manifest_path)?;
        let config_path = opts.config.clone().or_else(|| manifest.config.clone());
        let config = match &config_path {
            Some(p) => {
                let c = RunConfig::load(p)?;
                c.validate()?;
                c
            }
            None => RunConfig::default(),
        };
        let table_base = config_path
            .as_deref()
            .and_then(Path::parent)
            .unwrap_or(Path::new("."))
            .to_path_buf();
        let tables = FeatureTables::load(&config.tables, &table_base)?;
        let mask = opts
            .features
            .as_deref()
            .map(parse_feature_selection)
            .transpose()?;
        Ok(RunContext {
            output_dir: opts
                .output_dir
                .clone()
                .unwrap_or_else(|| manifest.output_dir.clone()),
            seed: opts.seed.unwrap_or(manifest.seed),
            features_spec: opts.features.clone(),
            mask,
            manifest,
            config,
            tables,
        })
    }

    fn video(&self, name: &str) -> Result<&VideoEntry> {
        self.manifest.video(name)
    }

    /// The videos evaluation-style commands run over: the validation
    /// split, or every video when no split is declared.
    fn target_videos(&self) -> Vec<&VideoEntry> {
        if self.manifest.split.validation.is_empty() {
            self.manifest.videos.iter().collect()
        } else {
            self.manifest
                .split
                .validation
                .iter()
                .filter_map(|n| self.video(n).ok())
                .collect()
        }
    }

    fn open_source(&self, entry: &VideoEntry, mask: Option<[bool; FEATURE_COUNT]>) -> Result<StackSource> {
        let dir = stack_dir(&self.output_dir, &entry.name);
        let index = StackIndex::load(&dir)?;
        let fx = FixationSet::from_csv(&entry.fixations, index.width, index.height)?;
        let g = video_geometry(&self.config, index.width, index.height, &entry.name);
        StackSource::open(&dir, fx, &g, mask)
    }

    pub fn model_path(&self) -> PathBuf {
        self.output_dir.join("model.ssrf")
    }

    pub fn training_log_path(&self) -> PathBuf {
        self.output_dir.join("training_log.json")
    }
}

/// Stable per-video stream id for seed derivation.
fn name_stream(name: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------

/// Extracts every video of the manifest, isolating per-video failures so
/// one corrupt input cannot sink the run. The run as a whole failed iff
/// any entry's result is an error.
pub fn cmd_extract(ctx: &RunContext) -> Vec<(String, Result<ExtractReport>)> {
    ctx.manifest
        .videos
        .par_iter()
        .map(|entry| {
            let r = ctx
                .manifest
                .validate_paths(entry)
                .and_then(|()| extract_video(entry, &ctx.config, &ctx.tables, &ctx.output_dir));
            (entry.name.clone(), r)
        })
        .collect()
}

// ---------------------------------------------------------------------
// train
// ---------------------------------------------------------------------

/// Everything needed to reproduce a training run, written alongside the
/// model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub seed: u64,
    pub frames_per_video: usize,
    pub pixels_per_frame: usize,
    pub videos: Vec<String>,
    pub samples: usize,
    pub n_trees: usize,
    pub min_leaf: usize,
    pub oob_mse: f64,
    /// The `--features` selection, verbatim, when one was active.
    pub features: Option<String>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub log: TrainingLog,
}

fn resample(
    ctx: &RunContext,
    videos: &[String],
    mask: Option<[bool; FEATURE_COUNT]>,
    frames_per_video: usize,
    pixels_per_frame: usize,
    seed: u64,
) -> Result<TrainingSet> {
    if videos.is_empty() {
        return Err(Error::invalid("the manifest split lists no training videos"));
    }
    let sources: Vec<StackSource> = videos
        .iter()
        .map(|n| ctx.open_source(ctx.video(n)?, mask))
        .collect::<Result<_>>()?;
    let refs: Vec<&dyn FrameSource> = sources.iter().map(|s| s as &dyn FrameSource).collect();
    sample_training(&refs, frames_per_video, pixels_per_frame, seed)
}

/// Samples the training split and fits the forest; writes `model.ssrf`
/// and `training_log.json` into the output directory.
pub fn cmd_train(
    ctx: &RunContext,
    frames_per_video: usize,
    pixels_per_frame: usize,
) -> Result<TrainOutcome> {
    let videos = ctx.manifest.split.train.clone();
    let ts = resample(ctx, &videos, ctx.mask, frames_per_video, pixels_per_frame, ctx.seed)?;
    let params = ForestParams {
        seed: ctx.seed,
        ..ForestParams::default()
    };
    let model = train_forest(&ts, params)?;
    let oob_mse = oob_error(&model, &ts)?;

    std::fs::create_dir_all(&ctx.output_dir)?;
    let model_path = ctx.model_path();
    model.save(&model_path)?;
    let log = TrainingLog {
        seed: ctx.seed,
        frames_per_video,
        pixels_per_frame,
        videos,
        samples: ts.len(),
        n_trees: params.n_trees,
        min_leaf: params.min_leaf,
        oob_mse,
        features: ctx.features_spec.clone(),
    };
    let text = serde_json::to_string_pretty(&log).expect("log serializes");
    std::fs::write(ctx.training_log_path(), text)?;
    Ok(TrainOutcome { model_path, log })
}

fn read_training_log(ctx: &RunContext) -> Result<TrainingLog> {
    let path = ctx.training_log_path();
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::MissingInput(format!(
            "{}: {e}; run the train command first",
            path.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

fn load_model(ctx: &RunContext) -> Result<ForestModel> {
    let path = ctx.model_path();
    if !path.is_file() {
        return Err(Error::MissingInput(format!(
            "{}: not found; run the train command first",
            path.display()
        )));
    }
    ForestModel::load(&path)
}

// ---------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------

/// What the predict command fuses with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionChoice {
    Forest,
    Classical(FusionScheme),
}

impl FusionChoice {
    /// Parses a `--fusion` value. `spp` doubles for `sum_plus_product`.
    pub fn parse(s: &str) -> Result<FusionChoice> {
        match s {
            "forest" => Ok(FusionChoice::Forest),
            "spp" => Ok(FusionChoice::Classical(FusionScheme::SumPlusProduct)),
            other => {
                let scheme = FusionScheme::from_name(other)?;
                if scheme == FusionScheme::Svr {
                    // Surface the library's canonical unavailability error.
                    fuse_baseline(&[RasterMap::zeros(1, 1)], scheme, None)?;
                }
                Ok(FusionChoice::Classical(scheme))
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FusionChoice::Forest => "forest",
            FusionChoice::Classical(s) => s.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub video: String,
    pub frames: usize,
    pub out_dir: PathBuf,
}

/// Least-squares fusion weights over the selected features, fitted on the
/// same sampled rows the forest trains on.
fn fit_lmswa_weights(ctx: &RunContext, log: &TrainingLog) -> Result<Vec<f64>> {
    let mask = log
        .features
        .as_deref()
        .map(parse_feature_selection)
        .transpose()?;
    let ts = resample(
        ctx,
        &log.videos,
        mask,
        log.frames_per_video,
        log.pixels_per_frame,
        log.seed,
    )?;
    let indices = selected_indices(mask.as_ref());
    let columns: Vec<Vec<f64>> = indices
        .iter()
        .map(|&f| ts.features.iter().map(|row| f64::from(row[f])).collect())
        .collect();
    let b: Vec<f64> = ts.targets.iter().map(|&t| f64::from(t)).collect();
    let fitted = nnls(&columns, &b)?;
    // Expand back to one weight per stack position (zeros where masked).
    let mut weights = vec![0f64; FEATURE_COUNT];
    for (&f, &w) in indices.iter().zip(&fitted) {
        weights[f] = w;
    }
    Ok(weights)
}

fn selected_indices(mask: Option<&[bool; FEATURE_COUNT]>) -> Vec<usize> {
    match mask {
        None => (0..FEATURE_COUNT).collect(),
        Some(m) => (0..FEATURE_COUNT).filter(|&i| m[i]).collect(),
    }
}

fn weighted_sum(stack: &FeatureStack, weights: &[f64]) -> Result<RasterMap> {
    let (w, h) = stack.dims();
    let raw = RasterMap::from_fn(w, h, |x, y| {
        stack
            .maps()
            .iter()
            .zip(weights)
            .map(|(m, &wgt)| f64::from(m.get(x, y)) * wgt)
            .sum::<f64>() as f32
    });
    ensure_normalized(raw)
}

/// Rescales only when the map strays outside [0,1], so schemes whose
/// output is already a probability-like blend keep their values.
fn ensure_normalized(m: RasterMap) -> Result<RasterMap> {
    if m.is_normalized() { Ok(m) } else { normalize01(&m) }
}

/// One frame's fused saliency under the chosen scheme.
fn fuse_stack(
    stack: &FeatureStack,
    choice: FusionChoice,
    model: Option<&ForestModel>,
    lmswa: Option<&[f64]>,
    mask: Option<&[bool; FEATURE_COUNT]>,
) -> Result<RasterMap> {
    match choice {
        FusionChoice::Forest => {
            let model = model.ok_or_else(|| Error::MissingInput("forest model".into()))?;
            let masked;
            let stack = match mask {
                None => stack,
                Some(m) => {
                    masked = apply_mask(stack.clone(), m)?;
                    &masked
                }
            };
            predict(model, stack)
        }
        FusionChoice::Classical(FusionScheme::Lmswa) => {
            let w = lmswa.ok_or_else(|| Error::MissingInput("lmswa weights".into()))?;
            weighted_sum(stack, w)
        }
        FusionChoice::Classical(scheme) => {
            // Classical schemes see only the selected maps: a zeroed map
            // would annihilate multiplicative fusion instead of bowing out.
            let maps: Vec<RasterMap> = selected_indices(mask)
                .into_iter()
                .map(|i| stack.maps()[i].clone())
                .collect();
            ensure_normalized(fuse_baseline(&maps, scheme, None)?)
        }
    }
}

fn predict_video(
    ctx: &RunContext,
    entry: &VideoEntry,
    choice: FusionChoice,
    model: Option<&ForestModel>,
    lmswa: Option<&[f64]>,
) -> Result<PredictReport> {
    let dir = stack_dir(&ctx.output_dir, &entry.name);
    let index = StackIndex::load(&dir)?;
    let out = ctx.output_dir.join("predictions").join(&entry.name);
    std::fs::create_dir_all(&out)?;
    for id in &index.frames {
        let stack = read_frame_stack(&dir, id, (index.width, index.height))?;
        let sal = fuse_stack(&stack, choice, model, lmswa, ctx.mask.as_ref())?;
        write_raw(&out.join(format!("{id}.raw")), &sal)?;
        write_map(&out.join(format!("{id}.png")), &sal, BitDepth::Sixteen)?;
    }
    let tag = serde_json::json!({ "fusion": choice.label() });
    std::fs::write(out.join("scheme.json"), tag.to_string())?;
    Ok(PredictReport {
        video: entry.name.clone(),
        frames: index.frames.len(),
        out_dir: out,
    })
}

/// Fuses per-frame saliency maps for the target videos (validation split,
/// or all videos without one) and writes them as raw floats plus 16-bit
/// PNGs under `predictions/<video>/`.
pub fn cmd_predict(
    ctx: &RunContext,
    choice: FusionChoice,
) -> Result<Vec<(String, Result<PredictReport>)>> {
    let model = match choice {
        FusionChoice::Forest => Some(load_model(ctx)?),
        _ => None,
    };
    let lmswa = match choice {
        FusionChoice::Classical(FusionScheme::Lmswa) => {
            Some(fit_lmswa_weights(ctx, &read_training_log(ctx)?)?)
        }
        _ => None,
    };
    Ok(ctx
        .target_videos()
        .par_iter()
        .map(|entry| {
            let r = predict_video(ctx, entry, choice, model.as_ref(), lmswa.as_deref());
            (entry.name.clone(), r)
        })
        .collect())
}

// ---------------------------------------------------------------------
// importance
// ---------------------------------------------------------------------

/// Recomputes the out-of-bag permutation importance of the stored model
/// by replaying the logged sampling, and writes `importance.csv`
/// (feature, normalized score, strongest first — 24 rows, max 1).
pub fn cmd_importance(ctx: &RunContext) -> Result<Vec<(FeatureKind, f64)>> {
    let model = load_model(ctx)?;
    let log = read_training_log(ctx)?;
    if model.params.seed != log.seed {
        return Err(Error::VersionMismatch(format!(
            "model.ssrf carries seed {} but training_log.json says {}; retrain to realign them",
            model.params.seed, log.seed
        )));
    }
    // Replay with the log's own selection, not the current run's.
    let log_mask = log
        .features
        .as_deref()
        .map(parse_feature_selection)
        .transpose()?;
    let ts = resample(
        ctx,
        &log.videos,
        log_mask,
        log.frames_per_video,
        log.pixels_per_frame,
        log.seed,
    )?;
    let scores = crate::fusion::forest::oob_importance(&model, &ts)?;
    let mut rows: Vec<(FeatureKind, f64)> = FEATURE_ORDER.into_iter().zip(scores).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.index().cmp(&b.0.index())));

    let mut text = String::from("feature,importance\n");
    for (kind, score) in &rows {
        text.push_str(&format!("{},{score:.6}\n", kind.name()));
    }
    std::fs::create_dir_all(&ctx.output_dir)?;
    std::fs::write(ctx.output_dir.join("importance.csv"), text)?;
    Ok(rows)
}

// ---------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------

/// A finished comparison plus the videos that could not be scored.
#[derive(Debug)]
pub struct EvaluateOutcome {
    pub report: MetricReport,
    pub failures: Vec<(String, String)>,
}

fn prediction_frames(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| {
        Error::MissingInput(format!(
            "{}: {e}; run the predict command first",
            dir.display()
        ))
    })? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("raw") {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::format(&path, "non-UTF-8 file name"))?
                .to_string();
            out.push((stem, path));
        }
    }
    if out.is_empty() {
        return Err(Error::MissingInput(format!(
            "no prediction maps in {}; run the predict command first",
            dir.display()
        )));
    }
    out.sort();
    Ok(out)
}

fn means(acc: BTreeMap<Metric, Vec<f64>>) -> BTreeMap<Metric, f64> {
    acc.into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
        .collect()
}

/// Scores one video's stored predictions against its gaze recording,
/// alongside the four reference baselines. Returns one metric map per
/// model row.
fn score_video(
    ctx: &RunContext,
    entry: &VideoEntry,
    model_label: &str,
) -> Result<Vec<(String, BTreeMap<Metric, f64>)>> {
    let pred_dir = ctx.output_dir.join("predictions").join(&entry.name);
    let frames = prediction_frames(&pred_dir)?;
    let first = crate::io::read_raw(&frames[0].1)?;
    let (w, h) = first.dims();
    let fx = FixationSet::from_csv(&entry.fixations, w, h)?;
    let g = video_geometry(&ctx.config, w, h, &entry.name);
    let metrics = Metric::ALL;
    let video_seed = derive_seed(ctx.seed, name_stream(&entry.name));

    let center = center_map(w, h, default_center_sigma(w, h))?;
    // Frames are scored independently and merged in frame order, so the
    // parallel accumulators match a serial run exactly.
    let per_frame: Vec<[BTreeMap<Metric, Vec<f64>>; 3]> = frames
        .par_iter()
        .enumerate()
        .map(|(i, (_, path))| {
            let sal = crate::io::read_raw(path)?;
            if sal.dims() != (w, h) {
                return Err(Error::dims(format!(
                    "{}: prediction {:?} vs {:?}",
                    path.display(),
                    sal.dims(),
                    (w, h)
                )));
            }
            if !sal.is_normalized() {
                return Err(Error::invalid(format!(
                    "{}: prediction values stray outside [0,1]",
                    path.display()
                )));
            }
            let frame = i as u32;
            let frame_seed = derive_seed(video_seed, u64::from(frame));
            let mut accs: [BTreeMap<Metric, Vec<f64>>; 3] = Default::default();
            score_frame(&sal, &fx, frame, &g, &metrics, frame_seed, &mut accs[0])?;
            let chance = chance_map(w, h, derive_seed(frame_seed, 1));
            score_frame(&chance, &fx, frame, &g, &metrics, frame_seed, &mut accs[1])?;
            score_frame(&center, &fx, frame, &g, &metrics, frame_seed, &mut accs[2])?;
            Ok(accs)
        })
        .collect::<Result<_>>()?;
    let mut merged: [BTreeMap<Metric, Vec<f64>>; 3] = Default::default();
    for frame_accs in per_frame {
        for (dst, src) in merged.iter_mut().zip(frame_accs) {
            for (metric, values) in src {
                dst.entry(metric).or_default().extend(values);
            }
        }
    }
    let [acc_model, acc_chance, acc_center] = merged;

    let mut rows = vec![
        (model_label.to_string(), means(acc_model)),
        ("chance".to_string(), means(acc_chance)),
        ("center".to_string(), means(acc_center)),
    ];
    rows.push((
        "one_human".to_string(),
        one_human(&fx, &g, &metrics, video_seed)?,
    ));
    rows.push((
        "infinite_humans".to_string(),
        infinite_humans(&fx, &g, &metrics, video_seed)?,
    ));
    Ok(rows)
}

fn assemble_report(
    per_video: Vec<(String, Vec<(String, BTreeMap<Metric, f64>)>)>,
) -> Result<MetricReport> {
    let mut models: Vec<ModelScores> = Vec::new();
    for (video, rows) in per_video {
        for (label, metrics) in rows {
            let slot = match models.iter_mut().find(|m| m.model == label) {
                Some(s) => s,
                None => {
                    models.push(ModelScores {
                        model: label.clone(),
                        videos: Vec::new(),
                    });
                    models.last_mut().expect("just pushed")
                }
            };
            slot.videos.push(PerVideoScores {
                video: video.clone(),
                metrics,
            });
        }
    }
    stats(&models)
}

/// Scores stored predictions on the target videos against the chance,
/// center, one-human, and infinite-humans baselines; writes
/// `evaluation.json` and returns the report.
pub fn cmd_evaluate(ctx: &RunContext) -> Result<EvaluateOutcome> {
    let videos = ctx.target_videos();
    if videos.is_empty() {
        return Err(Error::invalid("the manifest lists no videos to evaluate"));
    }
    let first_dir = ctx.output_dir.join("predictions").join(&videos[0].name);
    let model_label = read_scheme_tag(&first_dir).unwrap_or_else(|| "model".to_string());

    let results: Vec<(String, Result<Vec<(String, BTreeMap<Metric, f64>)>>)> = videos
        .par_iter()
        .map(|entry| {
            let r = score_video(ctx, entry, &model_label);
            (entry.name.clone(), r)
        })
        .collect();

    let mut per_video = Vec::new();
    let mut failures = Vec::new();
    for (video, r) in results {
        match r {
            Ok(rows) => per_video.push((video, rows)),
            Err(e) => {
                eprintln!("warning: {video}: {e}");
                failures.push((video, e.to_string()));
            }
        }
    }
    if per_video.is_empty() {
        return Err(Error::invalid("no video could be evaluated"));
    }
    let report = assemble_report(per_video)?;
    std::fs::create_dir_all(&ctx.output_dir)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(ctx.output_dir.join("evaluation.json"), text)?;
    Ok(EvaluateOutcome { report, failures })
}

fn read_scheme_tag(pred_dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(pred_dir.join("scheme.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    Some(v.get("fusion")?.as_str()?.to_string())
}

// ---------------------------------------------------------------------
// compare-fusion
// ---------------------------------------------------------------------

/// The eight schemes the comparison report covers.
pub const COMPARED_SCHEMES: [FusionChoice; 8] = [
    FusionChoice::Forest,
    FusionChoice::Classical(FusionScheme::Average),
    FusionChoice::Classical(FusionScheme::Multiplication),
    FusionChoice::Classical(FusionScheme::Maximum),
    FusionChoice::Classical(FusionScheme::SumPlusProduct),
    FusionChoice::Classical(FusionScheme::Gnlns),
    FusionChoice::Classical(FusionScheme::Lmswa),
    FusionChoice::Classical(FusionScheme::Sdw),
];

fn compare_video(
    ctx: &RunContext,
    entry: &VideoEntry,
    model: &ForestModel,
    lmswa: &[f64],
) -> Result<Vec<(String, BTreeMap<Metric, f64>)>> {
    let dir = stack_dir(&ctx.output_dir, &entry.name);
    let index = StackIndex::load(&dir)?;
    let (w, h) = (index.width, index.height);
    let fx = FixationSet::from_csv(&entry.fixations, w, h)?;
    let g = video_geometry(&ctx.config, w, h, &entry.name);
    let metrics = Metric::ALL;
    let video_seed = derive_seed(ctx.seed, name_stream(&entry.name));

    // One frame is a unit of parallel work: fuse it under every scheme and
    // score each map; merging in frame order matches a serial run exactly.
    let per_frame: Vec<Vec<BTreeMap<Metric, Vec<f64>>>> = index
        .frames
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let stack = read_frame_stack(&dir, id, (w, h))?;
            let frame_seed = derive_seed(video_seed, i as u64);
            let mut accs: Vec<BTreeMap<Metric, Vec<f64>>> =
                vec![BTreeMap::new(); COMPARED_SCHEMES.len()];
            for (choice, acc) in COMPARED_SCHEMES.iter().zip(&mut accs) {
                let sal =
                    fuse_stack(&stack, *choice, Some(model), Some(lmswa), ctx.mask.as_ref())?;
                score_frame(&sal, &fx, i as u32, &g, &metrics, frame_seed, acc)?;
            }
            Ok(accs)
        })
        .collect::<Result<_>>()?;
    let mut merged: Vec<BTreeMap<Metric, Vec<f64>>> =
        vec![BTreeMap::new(); COMPARED_SCHEMES.len()];
    for frame_accs in per_frame {
        for (dst, src) in merged.iter_mut().zip(frame_accs) {
            for (metric, values) in src {
                dst.entry(metric).or_default().extend(values);
            }
        }
    }
    Ok(COMPARED_SCHEMES
        .iter()
        .zip(merged)
        .map(|(c, acc)| (c.label().to_string(), means(acc)))
        .collect())
}

/// Fuses every stored stack with all eight schemes and scores them
/// against the gaze recordings; writes `fusion_comparison.json`.
pub fn cmd_compare_fusion(ctx: &RunContext) -> Result<EvaluateOutcome> {
    let model = load_model(ctx)?;
    let log = read_training_log(ctx)?;
    let lmswa = fit_lmswa_weights(ctx, &log)?;
    let videos = ctx.target_videos();
    if videos.is_empty() {
        return Err(Error::invalid("the manifest lists no videos to compare on"));
    }

    let results: Vec<(String, Result<Vec<(String, BTreeMap<Metric, f64>)>>)> = videos
        .par_iter()
        .map(|entry| {
            let r = compare_video(ctx, entry, &model, &lmswa);
            (entry.name.clone(), r)
        })
        .collect();

    let mut per_video = Vec::new();
    let mut failures = Vec::new();
    for (video, r) in results {
        match r {
            Ok(rows) => per_video.push((video, rows)),
            Err(e) => {
                eprintln!("warning: {video}: {e}");
                failures.push((video, e.to_string()));
            }
        }
    }
    if per_video.is_empty() {
        return Err(Error::invalid("no video could be compared"));
    }
    let report = assemble_report(per_video)?;
    std::fs::create_dir_all(&ctx.output_dir)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(ctx.output_dir.join("fusion_comparison.json"), text)?;
    Ok(EvaluateOutcome { report, failures })
}

// ---------------------------------------------------------------------
// report rendering
// ---------------------------------------------------------------------

/// Fixed-width text table of a comparison report: one row per model, one
/// column per metric (mean over videos), the average rank last.
pub fn render_metric_table(report: &MetricReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<18}", "model"));
    for m in Metric::ALL {
        out.push_str(&format!("{:>9}", m.name()));
    }
    out.push_str(&format!("{:>10}\n", "avg_rank"));
    for (i, model) in report.models.iter().enumerate() {
        out.push_str(&format!("{model:<18}"));
        for m in Metric::ALL {
            match report.summaries[i].get(&m) {
                Some(s) => out.push_str(&format!("{:>9.4}", s.mean)),
                None => out.push_str(&format!("{:>9}", "n/a")),
            }
        }
        out.push_str(&format!("{:>10.2}\n", report.average_ranks[i]));
    }
    out
}
