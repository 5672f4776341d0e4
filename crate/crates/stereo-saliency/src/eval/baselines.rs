//! Reference rows for the benchmark table: a random map, a centered
//! Gaussian prior, and the two human-agreement baselines.

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::metrics::{metric, FrameGroundTruth, Metric};
use crate::eval::{fixation_density, FixationSet};
use crate::fusion::derive_seed;
use crate::geometry::ViewingGeometry;
use crate::raster::{normalize01, RasterMap};

/// Default center-prior spread as a fraction of the short frame side.
pub const CENTER_SIGMA_FRACTION: f64 = 0.25;

pub fn default_center_sigma(width: usize, height: usize) -> f64 {
    CENTER_SIGMA_FRACTION * width.min(height) as f64
}

/// Uniform random values in [0, 1) — the no-information reference.
pub fn chance_map(width: usize, height: usize, seed: u64) -> RasterMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RasterMap::from_fn(width, height, |_, _| rng.random::<f32>())
}

/// Isotropic Gaussian prior at the frame center, rescaled to [0, 1].
pub fn center_map(width: usize, height: usize, sigma: f64) -> Result<RasterMap> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("center map needs a non-empty frame"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("center sigma must be positive, got {sigma}")));
    }
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let raw = RasterMap::from_fn(width, height, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp() as f32
    });
    normalize01(&raw)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Scores one saliency map against one frame of fixations, appending each
/// metric's value to the caller's accumulator (the natural shape for
/// per-video averaging). Frames without fixations contribute nothing;
/// metrics that cannot be computed for a frame are silently skipped.
pub fn score_frame(
    sal: &RasterMap,
    gt: &FixationSet,
    frame: u32,
    g: &ViewingGeometry,
    metrics: &[Metric],
    seed: u64,
    acc: &mut BTreeMap<Metric, Vec<f64>>,
) -> Result<()> {
    let points = gt.points_for_frame(frame);
    if points.is_empty() {
        return Ok(());
    }
    let density = fixation_density(gt, frame, g)?;
    let pool = gt.points_excluding_frame(frame);
    let truth = FrameGroundTruth {
        density: &density,
        fixations: &points,
        shuffle_pool: &pool,
        shuffle_seed: seed,
    };
    for &which in metrics {
        match metric(sal, &truth, which) {
            Ok(v) => acc.entry(which).or_default().push(v),
            Err(Error::MissingInput(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// How well a single observer predicts the rest: each subject's own
/// density map is scored against the pooled fixations of the others,
/// frame by frame; per-subject means are averaged across subjects.
pub fn one_human(
    fx: &FixationSet,
    g: &ViewingGeometry,
    metrics: &[Metric],
    seed: u64,
) -> Result<BTreeMap<Metric, f64>> {
    let subjects = fx.subjects();
    if subjects.len() < 2 {
        return Err(Error::invalid(
            "one-human baseline needs at least 2 subjects",
        ));
    }
    let mut per_subject: BTreeMap<Metric, Vec<f64>> = BTreeMap::new();
    for &s in &subjects {
        let own = fx.restricted_to_subject(s);
        let others = fx.without_subject(s);
        let mut acc: BTreeMap<Metric, Vec<f64>> = BTreeMap::new();
        for frame in own.frames() {
            let sal = fixation_density(&own, frame, g)?;
            let frame_seed = derive_seed(seed, (u64::from(s) << 32) | u64::from(frame));
            score_frame(&sal, &others, frame, g, metrics, frame_seed, &mut acc)?;
        }
        for (which, values) in acc {
            if let Some(m) = mean(&values) {
                per_subject.entry(which).or_default().push(m);
            }
        }
    }
    let mut out = BTreeMap::new();
    for &which in metrics {
        if let Some(m) = per_subject.get(&which).and_then(|v| mean(v)) {
            out.insert(which, m);
        }
    }
    if out.is_empty() {
        return Err(Error::MissingInput(
            "no frame had fixations from both the subject and the others".into(),
        ));
    }
    Ok(out)
}

/// Least-squares fit of `s(k) = a + c * k^(-1/2)`; returns `(a, c)`.
/// `a` is the k -> infinity limit.
fn fit_inverse_sqrt(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut su, mut suu, mut ss, mut sus) = (0f64, 0f64, 0f64, 0f64);
    for &(k, s) in points {
        let u = 1.0 / k.sqrt();
        su += u;
        suu += u * u;
        ss += s;
        sus += u * s;
    }
    let det = n * suu - su * su;
    if det.abs() < 1e-12 {
        return (ss / n, 0.0);
    }
    ((ss * suu - su * sus) / det, (n * sus - su * ss) / det)
}

/// Extrapolated agreement of unboundedly many observers: half the
/// subjects form the ground truth; growing subsets of the other half are
/// scored against it, and the score-vs-k curve is extrapolated with an
/// inverse-square-root law to its k -> infinity intercept.
pub fn infinite_humans(
    fx: &FixationSet,
    g: &ViewingGeometry,
    metrics: &[Metric],
    seed: u64,
) -> Result<BTreeMap<Metric, f64>> {
    let mut subjects = fx.subjects();
    if subjects.len() < 2 {
        return Err(Error::invalid(
            "infinite-humans baseline needs at least 2 subjects",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x1F));
    // Partial Fisher-Yates over the subject list.
    for i in 0..subjects.len() - 1 {
        let j = rng.random_range(i..subjects.len());
        subjects.swap(i, j);
    }
    let model_half = &subjects[..subjects.len() / 2];
    let gt_half = fx.with_subjects(&subjects[subjects.len() / 2..]);

    let mut curves: BTreeMap<Metric, Vec<(f64, f64)>> = BTreeMap::new();
    for k in 1..=model_half.len() {
        let model = fx.with_subjects(&model_half[..k]);
        let mut acc: BTreeMap<Metric, Vec<f64>> = BTreeMap::new();
        for frame in model.frames() {
            let sal = fixation_density(&model, frame, g)?;
            let frame_seed = derive_seed(seed, ((k as u64) << 32) | u64::from(frame));
            score_frame(&sal, &gt_half, frame, g, metrics, frame_seed, &mut acc)?;
        }
        for (which, values) in acc {
            if let Some(m) = mean(&values) {
                curves.entry(which).or_default().push((k as f64, m));
            }
        }
    }

    let mut out = BTreeMap::new();
    for &which in metrics {
        let Some(points) = curves.get(&which) else {
            continue;
        };
        let a = if points.len() < 2 {
            points.last().map(|&(_, s)| s).unwrap_or(f64::NAN)
        } else {
            fit_inverse_sqrt(points).0
        };
        if a.is_finite() {
            out.insert(which, which.clamp_value(a));
        }
    }
    if out.is_empty() {
        return Err(Error::MissingInput(
            "no frame had fixations in both subject halves".into(),
        ));
    }
    Ok(out)
}
