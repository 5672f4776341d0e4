//! Cross-model comparison: per-video score tables reduced to means,
//! confidence intervals, pairwise significance, and an average rank.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::eval::metrics::Metric;

/// The three scores that decide the leaderboard ordering; the divergence
/// ranks ascending, the other two descending.
pub const RANK_METRICS: [Metric; 3] = [Metric::Sauc, Metric::Kld, Metric::Nss];

/// One video's mean scores for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerVideoScores {
    pub video: String,
    pub metrics: BTreeMap<Metric, f64>,
}

/// All per-video scores for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelScores {
    pub model: String,
    pub videos: Vec<PerVideoScores>,
}

impl ModelScores {
    fn values_for(&self, which: Metric) -> Vec<f64> {
        self.videos
            .iter()
            .filter_map(|v| v.metrics.get(&which).copied())
            .collect()
    }
}

/// Mean over videos with its 95% confidence interval; the interval is
/// missing when only one video contributed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub ci95: Option<(f64, f64)>,
    pub n: usize,
}

/// The full comparison: raw tables, per-model summaries, pairwise
/// p-values per metric, and average ranks over [`RANK_METRICS`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub models: Vec<String>,
    pub tables: Vec<ModelScores>,
    pub summaries: Vec<BTreeMap<Metric, MetricSummary>>,
    pub p_values: BTreeMap<Metric, Vec<Vec<Option<f64>>>>,
    pub average_ranks: Vec<f64>,
}

fn mean_and_sample_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn summarize(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let (mean, var) = mean_and_sample_var(values);
    let n = values.len();
    let ci95 = if n >= 2 {
        let df = (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, df)
            .expect("valid t distribution")
            .inverse_cdf(0.975);
        let half = t * (var / n as f64).sqrt();
        Some((mean - half, mean + half))
    } else {
        None
    };
    Some(MetricSummary { mean, ci95, n })
}

/// Two-sided pooled-variance two-sample t-test p-value. `None` when
/// either sample has fewer than two observations. Degenerate samples with
/// zero spread yield 1 for equal means and 0 otherwise.
pub fn t_test_p(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, va) = mean_and_sample_var(a);
    let (mb, vb) = mean_and_sample_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    if pooled <= 0.0 {
        return Some(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / (pooled.sqrt() * (1.0 / na + 1.0 / nb).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

/// 1-based ranks, best first; ties share the average of their positions.
fn average_rank_positions(values: &[f64], ascending: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let cmp = values[a].total_cmp(&values[b]);
        if ascending { cmp } else { cmp.reverse() }
    });
    let mut ranks = vec![0f64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Reduce per-video score tables to the comparison report. Every model
/// needs at least one video; the average rank additionally needs every
/// model to carry all three of [`RANK_METRICS`].
pub fn stats(models: &[ModelScores]) -> Result<MetricReport> {
    if models.is_empty() {
        return Err(Error::invalid("no models to compare"));
    }
    for m in models {
        if m.videos.is_empty() {
            return Err(Error::invalid(format!("model {:?} has no videos", m.model)));
        }
        for v in &m.videos {
            for (&which, &value) in &v.metrics {
                if !value.is_finite() {
                    return Err(Error::invalid(format!(
                        "model {:?} video {:?}: non-finite {} value",
                        m.model,
                        v.video,
                        which.name()
                    )));
                }
            }
        }
    }

    let summaries: Vec<BTreeMap<Metric, MetricSummary>> = models
        .iter()
        .map(|m| {
            Metric::ALL
                .into_iter()
                .filter_map(|which| summarize(&m.values_for(which)).map(|s| (which, s)))
                .collect()
        })
        .collect();

    let mut p_values = BTreeMap::new();
    for which in Metric::ALL {
        if !models.iter().any(|m| !m.values_for(which).is_empty()) {
            continue;
        }
        let columns: Vec<Vec<f64>> = models.iter().map(|m| m.values_for(which)).collect();
        let matrix: Vec<Vec<Option<f64>>> = (0..models.len())
            .map(|i| {
                (0..models.len())
                    .map(|j| {
                        if i == j {
                            Some(1.0)
                        } else {
                            t_test_p(&columns[i], &columns[j])
                        }
                    })
                    .collect()
            })
            .collect();
        p_values.insert(which, matrix);
    }

    let mut rank_sums = vec![0f64; models.len()];
    for which in RANK_METRICS {
        let means: Vec<f64> = models
            .iter()
            .enumerate()
            .map(|(i, _)| {
                summaries[i]
                    .get(&which)
                    .map(|s| s.mean)
                    .ok_or_else(|| {
                        Error::MissingInput(format!(
                            "model {:?} has no {} scores to rank",
                            models[i].model,
                            which.name()
                        ))
                    })
            })
            .collect::<Result<_>>()?;
        let ranks = average_rank_positions(&means, !which.higher_is_better());
        for (sum, r) in rank_sums.iter_mut().zip(&ranks) {
            *sum += r;
        }
    }
    let average_ranks: Vec<f64> = rank_sums
        .iter()
        .map(|s| s / RANK_METRICS.len() as f64)
        .collect();

    Ok(MetricReport {
        models: models.iter().map(|m| m.model.clone()).collect(),
        tables: models.to_vec(),
        summaries,
        p_values,
        average_ranks,
    })
}
