//! Classical map-fusion schemes the forest is benchmarked against:
//! averaging, multiplication, maximum, sum-plus-product, global
//! non-linear normalization followed by summation, least-mean-squares
//! weighted averaging, and standard-deviation weighting. Support vector
//! regression appears in the comparison tables but is external to this
//! library and always reports as unavailable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterMap, normalize01};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionScheme {
    Average,
    Multiplication,
    Maximum,
    SumPlusProduct,
    Gnlns,
    Lmswa,
    Sdw,
    Svr,
}

impl FusionScheme {
    pub const ALL: [FusionScheme; 8] = [
        FusionScheme::Average,
        FusionScheme::Multiplication,
        FusionScheme::Maximum,
        FusionScheme::SumPlusProduct,
        FusionScheme::Gnlns,
        FusionScheme::Lmswa,
        FusionScheme::Sdw,
        FusionScheme::Svr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionScheme::Average => "average",
            FusionScheme::Multiplication => "multiplication",
            FusionScheme::Maximum => "maximum",
            FusionScheme::SumPlusProduct => "sum_plus_product",
            FusionScheme::Gnlns => "gnlns",
            FusionScheme::Lmswa => "lmswa",
            FusionScheme::Sdw => "sdw",
            FusionScheme::Svr => "svr",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        FusionScheme::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown fusion scheme {name:?}")))
    }
}

fn check_inputs(maps: &[RasterMap]) -> Result<(usize, usize)> {
    let first = maps
        .first()
        .ok_or_else(|| Error::invalid("fusion requires at least one map"))?;
    let dims = first.dims();
    for (i, m) in maps.iter().enumerate() {
        if m.dims() != dims {
            return Err(Error::dims(format!(
                "map {i} is {:?}, expected {dims:?}",
                m.dims()
            )));
        }
        if !m.is_normalized() {
            return Err(Error::invalid(format!("map {i} is not normalized to [0,1]")));
        }
    }
    Ok(dims)
}

/// Mean of all strict-8-neighborhood local maxima except those equal to
/// the global maximum. Border pixels compare against their existing
/// neighbors only. Returns 0 when the global peak is the only maximum.
pub fn local_maxima_mean(m: &RasterMap) -> f64 {
    let (w, h) = m.dims();
    let global = m.min_max().1;
    let mut sum = 0f64;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            let v = m.get(x, y);
            let mut is_max = true;
            'scan: for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                        continue;
                    }
                    if m.get(nx as usize, ny as usize) >= v {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max && v < global {
                sum += f64::from(v);
                n += 1;
            }
        }
    }
    if n == 0 { 0.0 } else { sum / n as f64 }
}

/// The global non-linear normalization weight `(M - mbar)^2`: maps with
/// one dominant peak weigh more than maps with many comparable peaks.
pub fn gnlns_weight(m: &RasterMap) -> f64 {
    let global = f64::from(m.min_max().1);
    (global - local_maxima_mean(m)).powi(2)
}

/// Per-map standard deviations, the raw weights of the SDW scheme.
pub fn sdw_weights(maps: &[RasterMap]) -> Vec<f64> {
    maps.iter()
        .map(|m| {
            let mean = m.mean();
            let var = m
                .as_slice()
                .iter()
                .map(|&v| (f64::from(v) - mean).powi(2))
                .sum::<f64>()
                / m.len() as f64;
            var.sqrt()
        })
        .collect()
}

/// Solve `min ||A x - b||` subject to `x >= 0` by the Lawson-Hanson
/// active-set method on the normal equations. `columns` are the columns
/// of A; dimensions here are tiny (one column per feature map).
pub fn nnls(columns: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = columns.len();
    if n == 0 {
        return Err(Error::invalid("nnls requires at least one column"));
    }
    let m = b.len();
    for (i, c) in columns.iter().enumerate() {
        if c.len() != m {
            return Err(Error::dims(format!(
                "column {i} has {} rows, target has {m}",
                c.len()
            )));
        }
    }
    // Gram matrix and projected target.
    let mut ata = vec![vec![0f64; n]; n];
    let mut atb = vec![0f64; n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
            ata[i][j] = dot;
            ata[j][i] = dot;
        }
        atb[i] = columns[i].iter().zip(b).map(|(a, b)| a * b).sum();
    }

    let solve_subset = |active: &[usize]| -> Option<Vec<f64>> {
        // Gaussian elimination with partial pivoting on the active block.
        let k = active.len();
        let mut a: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| {
                let mut row: Vec<f64> = active.iter().map(|&j| ata[i][j]).collect();
                row.push(atb[i]);
                row
            })
            .collect();
        for col in 0..k {
            let pivot = (col..k).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
            if a[pivot][col].abs() < 1e-12 {
                return None;
            }
            a.swap(col, pivot);
            for row in 0..k {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    for c in col..=k {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
        }
        Some((0..k).map(|i| a[i][k] / a[i][i]).collect())
    };

    let tol = 1e-10 * atb.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let mut x = vec![0f64; n];
    let mut active: Vec<usize> = Vec::new();
    for _ in 0..(3 * n + 10) {
        // Most negative-gradient coordinate outside the active set.
        let w: Vec<f64> = (0..n)
            .map(|i| atb[i] - (0..n).map(|j| ata[i][j] * x[j]).sum::<f64>())
            .collect();
        let candidate = (0..n)
            .filter(|i| !active.contains(i))
            .max_by(|&p, &q| w[p].total_cmp(&w[q]));
        match candidate {
            Some(i) if w[i] > tol => active.push(i),
            _ => break,
        }
        loop {
            let Some(z) = solve_subset(&active) else {
                active.pop();
                break;
            };
            if z.iter().all(|&v| v > 0.0) {
                for (k, &i) in active.iter().enumerate() {
                    x[i] = z[k];
                }
                break;
            }
            // Step toward z until the first coordinate hits zero, then
            // drop it from the active set.
            let mut alpha = f64::INFINITY;
            for (k, &i) in active.iter().enumerate() {
                if z[k] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[k]));
                }
            }
            for (k, &i) in active.iter().enumerate() {
                x[i] += alpha * (z[k] - x[i]);
            }
            let dropped: Vec<usize> = active
                .iter()
                .cloned()
                .filter(|&i| x[i] <= tol.max(1e-12))
                .collect();
            for i in &dropped {
                x[*i] = 0.0;
            }
            active.retain(|i| !dropped.contains(i));
            if dropped.is_empty() {
                break;
            }
        }
    }
    Ok(x)
}

/// Non-negative least-squares weights matching the maps to target maps.
pub fn lmswa_weights(maps: &[RasterMap], targets: &[RasterMap]) -> Result<Vec<f64>> {
    let dims = check_inputs(maps)?;
    if targets.is_empty() {
        return Err(Error::MissingInput(
            "least-mean-squares fusion needs target maps to fit weights".into(),
        ));
    }
    for t in targets {
        if t.dims() != dims {
            return Err(Error::dims(format!(
                "target {:?} vs maps {dims:?}",
                t.dims()
            )));
        }
    }
    // With one frame each map contributes its own pixel column; with many
    // training frames the same weights must hold across all of them, so
    // the columns concatenate frame-wise (maps are per-frame identical
    // here — callers fitting across frames concatenate beforehand).
    let columns: Vec<Vec<f64>> = maps
        .iter()
        .map(|m| m.as_slice().iter().map(|&v| f64::from(v)).collect())
        .collect();
    let b: Vec<f64> = targets
        .iter()
        .flat_map(|t| t.as_slice().iter().map(|&v| f64::from(v)))
        .collect();
    if b.len() != columns[0].len() {
        return Err(Error::invalid(
            "lmswa fits one frame at a time; supply exactly one target per call",
        ));
    }
    nnls(&columns, &b)
}

/// Fuse conspicuity maps into one saliency map with a classical scheme.
/// `targets` is consulted only by the least-mean-squares scheme.
pub fn fuse_baseline(
    maps: &[RasterMap],
    scheme: FusionScheme,
    targets: Option<&[RasterMap]>,
) -> Result<RasterMap> {
    let (w, h) = check_inputs(maps)?;
    let n = maps.len() as f64;
    match scheme {
        FusionScheme::Average => Ok(RasterMap::from_fn(w, h, |x, y| {
            (maps.iter().map(|m| f64::from(m.get(x, y))).sum::<f64>() / n) as f32
        })),
        FusionScheme::Multiplication => Ok(RasterMap::from_fn(w, h, |x, y| {
            maps.iter().map(|m| f64::from(m.get(x, y))).product::<f64>() as f32
        })),
        FusionScheme::Maximum => Ok(RasterMap::from_fn(w, h, |x, y| {
            maps.iter().map(|m| m.get(x, y)).fold(0f32, f32::max)
        })),
        FusionScheme::SumPlusProduct => {
            let raw = RasterMap::from_fn(w, h, |x, y| {
                let s: f64 = maps.iter().map(|m| f64::from(m.get(x, y))).sum();
                let p: f64 = maps.iter().map(|m| f64::from(m.get(x, y))).product();
                (s + p) as f32
            });
            normalize01(&raw)
        }
        FusionScheme::Gnlns => {
            let weights: Vec<f64> = maps.iter().map(gnlns_weight).collect();
            let raw = RasterMap::from_fn(w, h, |x, y| {
                maps.iter()
                    .zip(&weights)
                    .map(|(m, &wgt)| f64::from(m.get(x, y)) * wgt)
                    .sum::<f64>() as f32
            });
            normalize01(&raw)
        }
        FusionScheme::Lmswa => {
            let targets = targets.ok_or_else(|| {
                Error::MissingInput(
                    "least-mean-squares fusion needs target maps to fit weights".into(),
                )
            })?;
            let weights = lmswa_weights(maps, targets)?;
            Ok(RasterMap::from_fn(w, h, |x, y| {
                maps.iter()
                    .zip(&weights)
                    .map(|(m, &wgt)| f64::from(m.get(x, y)) * wgt)
                    .sum::<f64>() as f32
            }))
        }
        FusionScheme::Sdw => {
            let weights = sdw_weights(maps);
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(Error::invalid(
                    "standard-deviation weighting needs at least one non-constant map",
                ));
            }
            Ok(RasterMap::from_fn(w, h, |x, y| {
                (maps
                    .iter()
                    .zip(&weights)
                    .map(|(m, &wgt)| f64::from(m.get(x, y)) * wgt)
                    .sum::<f64>()
                    / total) as f32
            }))
        }
        FusionScheme::Svr => Err(Error::invalid(
            "support vector regression fusion is not provided by this library; \
             it appears in comparisons as unavailable",
        )),
    }
}
