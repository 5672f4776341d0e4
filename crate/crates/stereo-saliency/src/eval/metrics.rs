//! The scoring suite: two ROC areas, three distribution comparisons, a
//! transport distance, and a z-scored fixation statistic.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterMap;

/// Floor applied to predicted probabilities inside the divergence so empty
/// cells stay finite.
pub const KLD_EPSILON: f64 = 1e-12;

/// The supported scores, in report column order. `Emd` and `Kld` are
/// distances (lower is better); everything else rewards larger values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auc,
    Sauc,
    Emd,
    Sim,
    Pcc,
    Kld,
    Nss,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Auc,
        Metric::Sauc,
        Metric::Emd,
        Metric::Sim,
        Metric::Pcc,
        Metric::Kld,
        Metric::Nss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::Sauc => "sauc",
            Metric::Emd => "emd",
            Metric::Sim => "sim",
            Metric::Pcc => "pcc",
            Metric::Kld => "kld",
            Metric::Nss => "nss",
        }
    }

    pub fn from_name(name: &str) -> Result<Metric> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown metric {name:?}")))
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Emd | Metric::Kld)
    }

    /// Whether the score is defined by fixation points rather than the
    /// density map alone.
    pub fn needs_fixations(self) -> bool {
        matches!(self, Metric::Auc | Metric::Sauc | Metric::Nss)
    }

    /// Clamp a (possibly extrapolated) score to the metric's valid range.
    pub fn clamp_value(self, v: f64) -> f64 {
        match self {
            Metric::Auc | Metric::Sauc | Metric::Sim => v.clamp(0.0, 1.0),
            Metric::Pcc => v.clamp(-1.0, 1.0),
            Metric::Emd | Metric::Kld => v.max(0.0),
            Metric::Nss => v,
        }
    }
}

/// Everything needed to score one frame: the gaze-density map, the frame's
/// fixation points, and a pool of fixations from *other* frames/videos used
/// as shuffled negatives (with a seed for the resampling draw).
#[derive(Debug, Clone, Copy)]
pub struct FrameGroundTruth<'a> {
    pub density: &'a RasterMap,
    pub fixations: &'a [(f32, f32)],
    pub shuffle_pool: &'a [(f32, f32)],
    pub shuffle_seed: u64,
}

/// Score one saliency map against one frame's ground truth.
/// Metrics that need fixations return [`Error::MissingInput`] when the
/// frame has none, so callers can report the entry as missing.
pub fn metric(sal: &RasterMap, gt: &FrameGroundTruth, which: Metric) -> Result<f64> {
    match which {
        Metric::Auc => auc_judd(sal, gt.fixations),
        Metric::Sauc => shuffled_auc(sal, gt.fixations, gt.shuffle_pool, gt.shuffle_seed),
        Metric::Emd => super::emd::emd(sal, gt.density),
        Metric::Sim => sim(sal, gt.density),
        Metric::Pcc => pcc(sal, gt.density),
        Metric::Kld => kld(gt.density, sal),
        Metric::Nss => nss(sal, gt.fixations),
    }
}

fn check_dims(a: &RasterMap, b: &RasterMap) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dims(format!(
            "map {}x{} vs ground truth {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn sample_at(sal: &RasterMap, (x, y): (f32, f32)) -> f32 {
    sal.get_clamped(x.round() as isize, y.round() as isize)
}

/// Probability that a random positive outranks a random negative, ties at
/// half credit — the trapezoidal area under the full ROC sweep.
fn rank_auc(positives: &[f32], negatives: &[f32]) -> f64 {
    let mut neg = negatives.to_vec();
    neg.sort_by(f32::total_cmp);
    let mut won = 0f64;
    for &p in positives {
        let below = neg.partition_point(|&v| v < p);
        let not_above = neg.partition_point(|&v| v <= p);
        won += below as f64 + 0.5 * (not_above - below) as f64;
    }
    won / (positives.len() as f64 * neg.len() as f64)
}

/// Fixation-level ROC area: positives are the saliency values at the
/// fixated pixels, negatives the values over the whole frame.
pub fn auc_judd(sal: &RasterMap, fixations: &[(f32, f32)]) -> Result<f64> {
    if fixations.is_empty() {
        return Err(Error::MissingInput("no fixations for this frame".into()));
    }
    let positives: Vec<f32> = fixations.iter().map(|&p| sample_at(sal, p)).collect();
    Ok(rank_auc(&positives, sal.as_slice()))
}

/// Center-bias-corrected ROC area: negatives are resampled from fixation
/// locations of other frames (one negative per positive), so any spatial
/// prior shared across frames stops counting as skill.
pub fn shuffled_auc(
    sal: &RasterMap,
    fixations: &[(f32, f32)],
    pool: &[(f32, f32)],
    seed: u64,
) -> Result<f64> {
    if fixations.is_empty() {
        return Err(Error::MissingInput("no fixations for this frame".into()));
    }
    if pool.is_empty() {
        return Err(Error::MissingInput(
            "empty shuffle pool: need fixations from other frames".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives: Vec<f32> = fixations.iter().map(|&p| sample_at(sal, p)).collect();
    let negatives: Vec<f32> = (0..positives.len())
        .map(|_| sample_at(sal, pool[rng.random_range(0..pool.len())]))
        .collect();
    Ok(rank_auc(&positives, &negatives))
}

/// Mean z-scored saliency at the fixated pixels. A zero-variance map
/// carries no ordering information and scores 0.
pub fn nss(sal: &RasterMap, fixations: &[(f32, f32)]) -> Result<f64> {
    if fixations.is_empty() {
        return Err(Error::MissingInput("no fixations for this frame".into()));
    }
    let n = sal.len() as f64;
    let mean = sal.mean();
    let var = sal
        .as_slice()
        .iter()
        .map(|&v| {
            let d = f64::from(v) - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    if var <= 1e-24 {
        return Ok(0.0);
    }
    let sd = var.sqrt();
    let total: f64 = fixations
        .iter()
        .map(|&p| (f64::from(sample_at(sal, p)) - mean) / sd)
        .sum();
    Ok(total / fixations.len() as f64)
}

/// Pearson correlation over pixels. Defined as 0 when either map is
/// constant (no ordering to correlate).
pub fn pcc(a: &RasterMap, b: &RasterMap) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.len() as f64;
    let ma = a.mean();
    let mb = b.mean();
    let (mut sab, mut saa, mut sbb) = (0f64, 0f64, 0f64);
    for (&va, &vb) in a.as_slice().iter().zip(b.as_slice()) {
        let da = f64::from(va) - ma;
        let db = f64::from(vb) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 1e-24 * n || sbb <= 1e-24 * n {
        return Ok(0.0);
    }
    Ok(sab / (saa.sqrt() * sbb.sqrt()))
}

fn as_distribution(m: &RasterMap, label: &str) -> Result<Vec<f64>> {
    if m.min_max().0 < 0.0 {
        return Err(Error::invalid(format!("{label} map has negative values")));
    }
    let total = m.sum();
    if total <= 0.0 {
        return Err(Error::MissingInput(format!("{label} map has no mass")));
    }
    Ok(m.as_slice().iter().map(|&v| f64::from(v) / total).collect())
}

/// Divergence of the predicted distribution from the gaze distribution:
/// `sum gt_i * ln(gt_i / max(sal_i, eps))` after normalizing both maps to
/// total mass 1. The floor keeps empty prediction cells finite; the result
/// is clamped at 0 so identical maps score exactly 0.
pub fn kld(gt: &RasterMap, sal: &RasterMap) -> Result<f64> {
    check_dims(sal, gt)?;
    let p = as_distribution(gt, "ground-truth density")?;
    let q = match as_distribution(sal, "saliency") {
        Ok(q) => q,
        Err(Error::MissingInput(_)) => vec![0.0; p.len()],
        Err(e) => return Err(e),
    };
    let mut total = 0f64;
    for (&pi, &qi) in p.iter().zip(&q) {
        if pi > 0.0 {
            total += pi * (pi / qi.max(KLD_EPSILON)).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Histogram intersection of the two maps as distributions:
/// `sum min(sal_i, gt_i)`, 1 for identical shapes, 0 for disjoint support.
pub fn sim(sal: &RasterMap, gt: &RasterMap) -> Result<f64> {
    check_dims(sal, gt)?;
    let p = as_distribution(gt, "ground-truth density")?;
    let q = match as_distribution(sal, "saliency") {
        Ok(q) => q,
        Err(Error::MissingInput(_)) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    Ok(p.iter().zip(&q).map(|(&pi, &qi)| pi.min(qi)).sum())
}
