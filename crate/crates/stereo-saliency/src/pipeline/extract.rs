//! Per-video feature extraction: decode, segment, compute the 24
//! conspicuity maps frame by frame, shape them, and persist the stack.
//! Extraction resumes: frames whose files are already complete on disk are
//! skipped, with the motion chain reconstructed from stored state.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::color::{ColorFrame, ColorSpace, convert_color};
use crate::config::{RunConfig, TableOverrides};
use crate::error::{Error, Result};
use crate::features::highlevel::{Detection, class_maps_for_frame, ingest_detections};
use crate::features::motion::{
    FlowField, acceleration_map, block_matching_flow, displacement_maps_with, dz_map_raw,
    surprise_map, velocity_magnitude_map_with, velocity_maps_with, z_emphasized_velocity,
};
use crate::features::photometric::{
    ColorRankTable, SpectralTable, brightness_maps_with, color_histogram_map,
    color_variance_contrast_with, empirical_color_map, hvs_sensitivity_map, saturation_map,
    texture_map_with_bank, warmth_map,
};
use crate::features::{FEATURE_COUNT, FEATURE_ORDER, depth::depth_feature};
use crate::fusion::FeatureStack;
use crate::gabor::GaborBank;
use crate::geometry::{
    DensityProfile, FoveaMask, ViewingGeometry, build_fovea_mask, discomfort_mask,
    disparity_to_depth,
};
use crate::io::{read_color, read_flo, read_gray_raw, read_raw};
use crate::pipeline::manifest::{FlowSpec, VideoEntry};
use crate::pipeline::stacks::{
    StackIndex, frame_complete, read_velocity_state, stack_dir, write_frame_stack,
};
use crate::raster::RasterMap;
use crate::segmentation::{
    Reducer, SegmentLabeling, compactness_map, segment, segment_reduce, size_filter,
};
use crate::shaping::shape_feature;

/// The three data tables the photometric and fovea stages consult, loaded
/// once per run.
pub struct FeatureTables {
    pub spectral: SpectralTable,
    pub colors: ColorRankTable,
    pub density: DensityProfile,
}

impl FeatureTables {
    /// Loads overrides (resolved against `base` when relative) and falls
    /// back to the shipped tables.
    pub fn load(overrides: &TableOverrides, base: &Path) -> Result<FeatureTables> {
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Ok(FeatureTables {
            spectral: match &overrides.spectral_sensitivity {
                Some(p) => SpectralTable::load(&resolve(p))?,
                None => SpectralTable::shipped_default(),
            },
            colors: match &overrides.empirical_colors {
                Some(p) => ColorRankTable::load(&resolve(p))?,
                None => ColorRankTable::shipped_default(),
            },
            density: match &overrides.photoreceptor_density {
                Some(p) => DensityProfile::load(&resolve(p))?,
                None => DensityProfile::shipped_default(),
            },
        })
    }

    pub fn shipped() -> FeatureTables {
        FeatureTables {
            spectral: SpectralTable::shipped_default(),
            colors: ColorRankTable::shipped_default(),
            density: DensityProfile::shipped_default(),
        }
    }
}

/// Wall-clock accumulator keyed by pipeline stage.
#[derive(Debug, Default)]
pub struct StageTimer {
    totals: BTreeMap<&'static str, (f64, usize)>,
}

impl StageTimer {
    pub fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let e = self.totals.entry(stage).or_insert((0.0, 0));
        e.0 += ms;
        e.1 += 1;
        out
    }

    /// One CSV row per stage: `video,stage,frames,total_ms,mean_ms`.
    pub fn write_csv(&self, path: &Path, video: &str) -> Result<()> {
        let mut text = String::from("video,stage,frames,total_ms,mean_ms\n");
        for (stage, &(total, n)) in &self.totals {
            let mean = if n > 0 { total / n as f64 } else { 0.0 };
            text.push_str(&format!("{video},{stage},{n},{total:.3},{mean:.3}\n"));
        }
        Ok(std::fs::write(path, text)?)
    }
}

/// What one video's extraction did.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractReport {
    pub video: String,
    pub frames: usize,
    pub extracted: usize,
    pub skipped: usize,
    pub elapsed_ms: f64,
}

/// The viewing geometry for frames of the given resolution: the
/// configured one when its raster matches, otherwise the same physical
/// setup rescaled (with a warning, since that should be a deliberate
/// choice, not an accident).
pub fn video_geometry(cfg: &RunConfig, w: usize, h: usize, video: &str) -> ViewingGeometry {
    if (cfg.geometry.res_w, cfg.geometry.res_h) == (w, h) {
        cfg.geometry
    } else {
        eprintln!(
            "warning: {video}: configured geometry raster is {}x{} but frames are {w}x{h}; \
             scaling the viewing geometry to match",
            cfg.geometry.res_w, cfg.geometry.res_h
        );
        cfg.geometry.scaled_to(w, h)
    }
}

/// Frame image files of one clip, sorted by file name. The sorted stems
/// double as frame ids: position in this list is the frame number every
/// other input (fixations, detections, flow) refers to.
pub fn list_frames(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    const EXTS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.as_deref().is_some_and(|e| EXTS.contains(&e)) {
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
            "no frame images (png/ppm/pgm) in {}",
            dir.display()
        )));
    }
    out.sort();
    Ok(out)
}

fn sibling(dir: &Path, stem: &str, exts: &[&str], what: &str) -> Result<PathBuf> {
    for ext in exts {
        let p = dir.join(format!("{stem}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::MissingInput(format!(
        "no {what} file for frame {stem:?} in {} (tried {})",
        dir.display(),
        exts.join(", ")
    )))
}

/// Reads one disparity map in pixel units. Integer images (16-bit PGM or
/// PNG) are multiplied by the configured scale; raw float containers are
/// taken as already scaled.
pub fn read_disparity(dir: &Path, stem: &str, scale: f64) -> Result<RasterMap> {
    let path = sibling(dir, stem, &["pgm", "png", "raw"], "disparity")?;
    if path.extension().and_then(|e| e.to_str()) == Some("raw") {
        read_raw(&path)
    } else {
        let (m, _) = read_gray_raw(&path)?;
        Ok(m.map(|v| (f64::from(v) * scale) as f32))
    }
}

/// Carry-over between consecutive frames of the motion chain.
struct MotionState {
    /// Luma of this frame (block matching runs on it next frame).
    luma: RasterMap,
    /// Real-world depth of this frame, cm.
    depth: RasterMap,
    /// Pixel-level velocity magnitude (None on frame 0, which has no
    /// inbound flow, so the next frame's acceleration stays zero).
    vmag: Option<RasterMap>,
}

struct VideoContext<'a> {
    cfg: &'a RunConfig,
    tables: &'a FeatureTables,
    geometry: ViewingGeometry,
    fovea: FoveaMask,
    bank: GaborBank,
    detections: Vec<Detection>,
    flow: &'a FlowSpec,
    dims: (usize, usize),
}

fn read_frame_color(path: &Path, dims: (usize, usize)) -> Result<ColorFrame> {
    let frame = read_color(path)?;
    if frame.dims() != dims {
        return Err(Error::dims(format!(
            "{}: frame is {:?} but the clip started as {:?}",
            path.display(),
            frame.dims(),
            dims
        )));
    }
    Ok(frame)
}

fn luma_of(frame: &ColorFrame) -> Result<RasterMap> {
    Ok(convert_color(frame, ColorSpace::Yuv)?.channel(0))
}

/// Rebuilds the motion carry-over of an already-extracted frame from its
/// source inputs and stored velocity sidecar.
fn load_state(
    ctx: &VideoContext,
    entry: &VideoEntry,
    dir: &Path,
    stem: &str,
    path: &Path,
    index: usize,
) -> Result<MotionState> {
    let frame = read_frame_color(path, ctx.dims)?;
    let disparity = read_disparity(&entry.disparity, stem, ctx.cfg.depth.disparity_scale)?;
    if disparity.dims() != ctx.dims {
        return Err(Error::dims(format!(
            "{stem}: disparity {:?} vs frames {:?}",
            disparity.dims(),
            ctx.dims
        )));
    }
    Ok(MotionState {
        luma: luma_of(&frame)?,
        depth: disparity_to_depth(&disparity, &ctx.geometry)?,
        vmag: if index == 0 {
            None
        } else {
            Some(read_velocity_state(dir, stem)?)
        },
    })
}

/// Computes the full 24-map stack of one frame plus the carry-over for
/// the next. `prev` is None exactly on frame 0.
fn extract_frame(
    ctx: &VideoContext,
    entry: &VideoEntry,
    stem: &str,
    path: &Path,
    index: usize,
    prev: Option<&MotionState>,
    timer: &mut StageTimer,
) -> Result<(FeatureStack, MotionState)> {
    let cfg = ctx.cfg;
    let g = &ctx.geometry;
    let (w, h) = ctx.dims;

    let frame = timer.time("decode_frame", || read_frame_color(path, ctx.dims))?;
    let disparity = timer.time("decode_disparity", || {
        let d = read_disparity(&entry.disparity, stem, cfg.depth.disparity_scale)?;
        if d.dims() != ctx.dims {
            return Err(Error::dims(format!(
                "{stem}: disparity {:?} vs frames {:?}",
                d.dims(),
                ctx.dims
            )));
        }
        Ok(d)
    })?;

    let labeling: SegmentLabeling =
        timer.time("segmentation", || segment(&frame, &cfg.segmentation))?;
    let (compactness, size_mask, discomfort) = timer.time("masks", || -> Result<_> {
        let c = compactness_map(&labeling);
        let s = size_filter(&labeling, g)?;
        let seg_disp = segment_reduce(&disparity, &labeling, Reducer::Mean)?;
        let d = discomfort_mask(&seg_disp, g)?;
        Ok((c, s, d))
    })?;

    // Photometric block.
    let (brightness_var, brightness) = timer.time("brightness", || {
        brightness_maps_with(&frame, &ctx.fovea, &labeling, cfg.photometric.variance)
    })?;
    let color_hist = timer.time("color_histogram", || {
        color_histogram_map(&frame, cfg.photometric.histogram_bins_per_channel)
    })?;
    let warmth = timer.time("color_warmth", || warmth_map(&frame))?;
    let saturation = timer.time("color_saturation", || saturation_map(&frame))?;
    let hvs = timer.time("color_hvs_sensitivity", || {
        hvs_sensitivity_map(&frame, &ctx.tables.spectral)
    })?;
    let empirical = timer.time("color_empirical", || {
        empirical_color_map(&frame, &ctx.tables.colors)
    })?;
    let (contrast_a, contrast_b) = timer.time("color_contrast_ab", || {
        color_variance_contrast_with(&frame, &ctx.fovea, &labeling, cfg.photometric.variance)
    })?;
    let texture = timer.time("texture", || {
        texture_map_with_bank(&frame, &ctx.fovea, &labeling, &ctx.bank)
    })?;

    // Depth block.
    let depth_cm = disparity_to_depth(&disparity, g)?;
    let depth_map = timer.time("depth", || {
        depth_feature(&depth_cm, &labeling, &discomfort, Reducer::Mean, cfg.depth.probe_sigma)
    })?;

    // Motion block: frame 0 has no inbound flow and emits zero maps.
    let luma = luma_of(&frame)?;
    let zeros = || RasterMap::zeros(w, h);
    let (motion_maps, vmag) = match prev {
        None => ([zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros()], None),
        Some(prev_state) => {
            let flow = timer.time("flow", || -> Result<FlowField> {
                match ctx.flow {
                    FlowSpec::Builtin => block_matching_flow(
                        &prev_state.luma,
                        &luma,
                        cfg.motion.block_size,
                        cfg.motion.search_radius,
                    ),
                    FlowSpec::Dir(dir) => {
                        let p = sibling(dir, stem, &["flo"], "flow")?;
                        let (dx, dy) = read_flo(&p)?;
                        if dx.dims() != ctx.dims {
                            return Err(Error::dims(format!(
                                "{}: flow {:?} vs frames {:?}",
                                p.display(),
                                dx.dims(),
                                ctx.dims
                            )));
                        }
                        FlowField::new(dx, dy, crate::features::motion::FlowSource::External)
                    }
                }
            })?;
            let dz = dz_map_raw(&prev_state.depth, &depth_cm, &flow)?;
            let scaling = cfg.motion.scaling;
            let reducer = cfg.motion.reducer;
            let (dx_m, dy_m, dz_m) = timer.time("motion_displacement", || {
                displacement_maps_with(&flow, &dz, &labeling, reducer, scaling)
            })?;
            let velocity = timer.time("motion_velocity", || {
                velocity_maps_with(&flow, &dz, g, &labeling, reducer, scaling)
            })?;
            let z_emph = timer.time("motion_z_emphasis", || {
                z_emphasized_velocity(&flow, &dz, g, &labeling, reducer)
            })?;
            let vmag = velocity_magnitude_map_with(&flow, &dz, g, scaling)?;
            let accel = timer.time("motion_acceleration", || {
                acceleration_map(&vmag, prev_state.vmag.as_ref(), g, &labeling, reducer)
            })?;
            let surprise = timer.time("motion_surprise", || {
                surprise_map(&flow, &dz, cfg.motion.surprise_bins_per_axis, &labeling, reducer)
            })?;
            (
                [dx_m, dy_m, dz_m, velocity.v, z_emph, accel, surprise],
                Some(vmag),
            )
        }
    };

    // Detector block.
    let high = timer.time("high_level", || {
        class_maps_for_frame(&ctx.detections, index, w, h)
    });

    // Assemble in canonical order, then shape every map.
    let [m_dx, m_dy, m_dz, m_v, m_ze, m_acc, m_sur] = motion_maps;
    let [face, person, vehicle, animal, text, horizon] = high;
    let raw_maps = vec![
        brightness_var,
        brightness,
        color_hist,
        warmth,
        saturation,
        hvs,
        empirical,
        contrast_a,
        contrast_b,
        texture,
        m_dx,
        m_dy,
        m_dz,
        m_v,
        m_ze,
        m_acc,
        m_sur,
        depth_map,
        face,
        person,
        vehicle,
        animal,
        text,
        horizon,
    ];
    debug_assert_eq!(raw_maps.len(), FEATURE_COUNT);
    let shaped = timer.time("shaping", || -> Result<Vec<RasterMap>> {
        FEATURE_ORDER
            .iter()
            .zip(raw_maps)
            .map(|(&kind, m)| {
                shape_feature(&m, &compactness, &size_mask, cfg.shaping.flags_for(kind))
            })
            .collect()
    })?;
    let stack = FeatureStack::from_canonical(shaped)?;
    let state = MotionState {
        luma,
        depth: depth_cm,
        vmag,
    };
    Ok((stack, state))
}

/// Extracts (or resumes) one video's stack into
/// `<output_dir>/stacks/<video>/`, writing the index, the per-frame maps,
/// the velocity sidecars, and a stage-timing CSV.
pub fn extract_video(
    entry: &VideoEntry,
    cfg: &RunConfig,
    tables: &FeatureTables,
    output_dir: &Path,
) -> Result<ExtractReport> {
    let started = Instant::now();
    let frames = list_frames(&entry.frames)?;
    let first = read_color(&frames[0].1)?;
    let dims = first.dims();
    let geometry = video_geometry(cfg, dims.0, dims.1, &entry.name);
    let ctx = VideoContext {
        cfg,
        tables,
        geometry,
        fovea: build_fovea_mask(&geometry, &tables.density)?,
        bank: GaborBank::new(&cfg.gabor)?,
        detections: ingest_detections(&entry.detections, dims.0, dims.1)?,
        flow: &entry.flow,
        dims,
    };

    let dir = stack_dir(output_dir, &entry.name);
    std::fs::create_dir_all(&dir)?;
    let mut timer = StageTimer::default();
    let mut state: Option<MotionState> = None;
    let mut extracted = 0usize;
    let mut skipped = 0usize;

    for (i, (stem, path)) in frames.iter().enumerate() {
        if frame_complete(&dir, stem) {
            skipped += 1;
            // Rebuild carry-over only if the next frame will need it.
            let next_needs = frames
                .get(i + 1)
                .is_some_and(|(next, _)| !frame_complete(&dir, next));
            state = if next_needs {
                Some(load_state(&ctx, entry, &dir, stem, path, i)?)
            } else {
                None
            };
            continue;
        }
        let (stack, new_state) =
            extract_frame(&ctx, entry, stem, path, i, state.as_ref(), &mut timer)?;
        let sidecar = new_state
            .vmag
            .clone()
            .unwrap_or_else(|| RasterMap::zeros(dims.0, dims.1));
        timer.time("write", || write_frame_stack(&dir, stem, &stack, &sidecar))?;
        state = Some(new_state);
        extracted += 1;
    }

    let ids = frames.iter().map(|(s, _)| s.clone()).collect();
    StackIndex::new(&entry.name, dims.0, dims.1, ids).save(&dir)?;
    timer.write_csv(&dir.join("timings.csv"), &entry.name)?;
    Ok(ExtractReport {
        video: entry.name.clone(),
        frames: frames.len(),
        extracted,
        skipped,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
