//! Bagged regression forest: axis-aligned variance-reduction trees grown
//! on with-replacement bootstraps, mean-aggregated at prediction time,
//! with out-of-bag permutation importance and a versioned binary model
//! format.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{FEATURE_COUNT, FEATURE_ORDER};
use crate::fusion::{FeatureStack, TrainingSet, derive_seed};
use crate::raster::{RasterMap, normalize01};

/// Forest hyperparameters. Defaults: 40 trees, leaves of at least 10
/// samples, bootstraps of N/3 drawn with replacement, and
/// ceil(sqrt(24)) = 5 candidate features per split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub bootstrap_ratio: f64,
    pub features_per_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 40,
            min_leaf: 10,
            bootstrap_ratio: 1.0 / 3.0,
            features_per_split: (FEATURE_COUNT as f64).sqrt().ceil() as usize,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_leaf == 0 {
            return Err(Error::invalid("n_trees and min_leaf must be positive"));
        }
        if !(self.bootstrap_ratio > 0.0 && self.bootstrap_ratio <= 1.0) {
            return Err(Error::invalid(format!(
                "bootstrap_ratio must lie in (0,1], got {}",
                self.bootstrap_ratio
            )));
        }
        if !(1..=FEATURE_COUNT).contains(&self.features_per_split) {
            return Err(Error::invalid(format!(
                "features_per_split must lie in 1..={FEATURE_COUNT}"
            )));
        }
        Ok(())
    }
}

const LEAF: u16 = u16::MAX;

/// Flat node record. Interior nodes route `x[feature] <= threshold` left;
/// leaves store the mean target in `threshold` and set `feature = LEAF`.
/// The threshold is the largest left-side training value, so routing is
/// exact in f32.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    feature: u16,
    threshold: f32,
    left: u32,
    right: u32,
    count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    /// Training-row indices never drawn into this tree's bootstrap.
    oob: Vec<u32>,
}

impl Tree {
    pub fn predict(&self, x: &[f32; FEATURE_COUNT]) -> f32 {
        let mut i = 0usize;
        loop {
            let n = self.nodes[i];
            if n.feature == LEAF {
                return n.threshold;
            }
            i = if x[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn oob_indices(&self) -> &[u32] {
        &self.oob
    }

    /// (leaf sample counts, node count) for structural audits.
    pub fn leaf_counts(&self) -> Vec<u32> {
        self.nodes
            .iter()
            .filter(|n| n.feature == LEAF)
            .map(|n| n.count)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Raw (unnormalized) ensemble prediction for one feature vector.
    pub fn predict_row(&self, x: &[f32; FEATURE_COUNT]) -> f32 {
        let sum: f64 = self.trees.iter().map(|t| f64::from(t.predict(x))).sum();
        (sum / self.trees.len() as f64) as f32
    }

    fn check_canonical_names(&self) -> Result<()> {
        let canonical: Vec<&str> = FEATURE_ORDER.iter().map(|k| k.name()).collect();
        if self.feature_names.len() != canonical.len()
            || self.feature_names.iter().zip(&canonical).any(|(a, &b)| a != b)
        {
            return Err(Error::invalid(
                "model feature names do not match the canonical feature order",
            ));
        }
        Ok(())
    }
}

fn grow_tree(ts: &TrainingSet, params: &ForestParams, seed: u64) -> Tree {
    let n = ts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boot = ((params.bootstrap_ratio * n as f64).round() as usize).max(1);
    let mut in_bag = vec![false; n];
    let mut samples: Vec<u32> = (0..boot)
        .map(|_| {
            let i = rng.random_range(0..n);
            in_bag[i] = true;
            i as u32
        })
        .collect();
    let oob: Vec<u32> = (0..n as u32).filter(|&i| !in_bag[i as usize]).collect();
    let mut nodes = Vec::new();
    let all = 0..samples.len();
    build_node(ts, params, &mut rng, &mut nodes, &mut samples, all);
    Tree { nodes, oob }
}

/// Grow the subtree over `samples[range]` in place; returns its node id.
fn build_node(
    ts: &TrainingSet,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
    samples: &mut Vec<u32>,
    range: std::ops::Range<usize>,
) -> u32 {
    let count = range.len();
    let (sum, sum2) = samples[range.clone()].iter().fold((0f64, 0f64), |(s, s2), &i| {
        let y = f64::from(ts.targets[i as usize]);
        (s + y, s2 + y * y)
    });
    let mean = sum / count as f64;
    let sse = sum2 - sum * sum / count as f64;
    let leaf = |nodes: &mut Vec<Node>| {
        nodes.push(Node {
            feature: LEAF,
            threshold: mean as f32,
            left: 0,
            right: 0,
            count: count as u32,
        });
        (nodes.len() - 1) as u32
    };
    if count < 2 * params.min_leaf || sse <= 1e-12 {
        return leaf(nodes);
    }

    // Candidate features: walk a fresh random order, evaluating until
    // `features_per_split` non-constant features have been considered.
    // Features that are constant within this node admit no split and do
    // not consume the budget — otherwise nodes stall whenever the draw
    // lands entirely on degenerate columns (all-zero detector maps make
    // that the common case, not a corner case).
    let mut pool: [usize; FEATURE_COUNT] = std::array::from_fn(|i| i);
    for i in 0..FEATURE_COUNT - 1 {
        let j = rng.random_range(i..FEATURE_COUNT);
        pool.swap(i, j);
    }

    let mut best: Option<(f64, usize, f32)> = None; // (gain, feature, threshold)
    let mut pairs: Vec<(f32, f32)> = Vec::with_capacity(count);
    let mut evaluated = 0usize;
    for &f in &pool {
        if evaluated == params.features_per_split {
            break;
        }
        pairs.clear();
        pairs.extend(samples[range.clone()].iter().map(|&i| {
            (ts.features[i as usize][f], ts.targets[i as usize])
        }));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 >= pairs[count - 1].0 {
            continue;
        }
        evaluated += 1;
        let mut lsum = 0f64;
        let mut lsum2 = 0f64;
        for i in 1..count {
            let y = f64::from(pairs[i - 1].1);
            lsum += y;
            lsum2 += y * y;
            if i < params.min_leaf || count - i < params.min_leaf {
                continue;
            }
            if pairs[i - 1].0 >= pairs[i].0 {
                continue; // no boundary between equal values
            }
            let rsum = sum - lsum;
            let rsum2 = sum2 - lsum2;
            let child_sse = (lsum2 - lsum * lsum / i as f64)
                + (rsum2 - rsum * rsum / (count - i) as f64);
            let gain = sse - child_sse;
            if best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, f, pairs[i - 1].0));
            }
        }
    }

    let Some((gain, feature, threshold)) = best else {
        return leaf(nodes);
    };
    if gain <= 0.0 {
        return leaf(nodes);
    }

    // Partition this node's slice around the split.
    let slice = &mut samples[range.clone()];
    slice.sort_by(|&a, &b| {
        ts.features[a as usize][feature].total_cmp(&ts.features[b as usize][feature])
    });
    let n_left = slice
        .iter()
        .take_while(|&&i| ts.features[i as usize][feature] <= threshold)
        .count();
    let id = nodes.len() as u32;
    nodes.push(Node {
        feature: feature as u16,
        threshold,
        left: 0,
        right: 0,
        count: count as u32,
    });
    let mid = range.start + n_left;
    let left = build_node(ts, params, rng, nodes, samples, range.start..mid);
    let right = build_node(ts, params, rng, nodes, samples, mid..range.end);
    nodes[id as usize].left = left;
    nodes[id as usize].right = right;
    id
}

/// Train the forest. Trees grow independently from per-tree seeds derived
/// off `params.seed`, so results are identical for a fixed seed
/// regardless of thread count.
pub fn train_forest(ts: &TrainingSet, params: ForestParams) -> Result<ForestModel> {
    params.validate()?;
    if ts.len() < params.min_leaf {
        return Err(Error::invalid(format!(
            "{} training samples cannot fill a leaf of {}",
            ts.len(),
            params.min_leaf
        )));
    }
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(ts, &params, derive_seed(params.seed, t as u64)))
        .collect();
    Ok(ForestModel {
        params,
        feature_names: FEATURE_ORDER.iter().map(|k| k.name().to_string()).collect(),
        trees,
    })
}

/// Per-pixel ensemble prediction over a feature stack, rescaled to [0,1].
pub fn predict(model: &ForestModel, stack: &FeatureStack) -> Result<RasterMap> {
    model.check_canonical_names()?;
    let (w, h) = stack.dims();
    let rows: Vec<f32> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w).map(move |x| model.predict_row(&stack.pixel(x, y)))
        })
        .collect();
    normalize01(&RasterMap::from_vec(w, h, rows)?)
}

/// Classical out-of-bag generalization error: each sample is predicted by
/// the trees that never saw it, and the squared errors are averaged.
pub fn oob_error(model: &ForestModel, ts: &TrainingSet) -> Result<f64> {
    let mut sums = vec![0f64; ts.len()];
    let mut counts = vec![0u32; ts.len()];
    for tree in &model.trees {
        for &i in &tree.oob {
            sums[i as usize] += f64::from(tree.predict(&ts.features[i as usize]));
            counts[i as usize] += 1;
        }
    }
    let mut se = 0f64;
    let mut n = 0usize;
    for i in 0..ts.len() {
        if counts[i] > 0 {
            let pred = sums[i] / f64::from(counts[i]);
            se += (pred - f64::from(ts.targets[i])).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("no out-of-bag samples recorded"));
    }
    Ok(se / n as f64)
}

/// Permutation importance: per tree, the OOB error increase when one
/// feature column is shuffled among the tree's OOB samples, averaged over
/// trees, floored at zero, and scaled so the strongest feature reads 1.
pub fn oob_importance(model: &ForestModel, ts: &TrainingSet) -> Result<Vec<f64>> {
    if model.trees.iter().all(|t| t.oob.is_empty()) {
        return Err(Error::invalid("no out-of-bag samples recorded"));
    }
    let per_tree: Vec<[f64; FEATURE_COUNT]> = model
        .trees
        .par_iter()
        .enumerate()
        .filter(|(_, tree)| !tree.oob.is_empty())
        .map(|(t, tree)| {
            let m = tree.oob.len();
            let base: f64 = tree
                .oob
                .iter()
                .map(|&i| {
                    let p = f64::from(tree.predict(&ts.features[i as usize]));
                    (p - f64::from(ts.targets[i as usize])).powi(2)
                })
                .sum::<f64>()
                / m as f64;
            let mut deltas = [0f64; FEATURE_COUNT];
            for f in 0..FEATURE_COUNT {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    model.params.seed ^ 0x00B_1A5ED,
                    ((t as u64) << 16) | f as u64,
                ));
                let mut perm: Vec<u32> = tree.oob.clone();
                for i in (1..m).rev() {
                    perm.swap(i, rng.random_range(0..=i));
                }
                let permuted: f64 = tree
                    .oob
                    .iter()
                    .zip(&perm)
                    .map(|(&i, &j)| {
                        let mut x = ts.features[i as usize];
                        x[f] = ts.features[j as usize][f];
                        let p = f64::from(tree.predict(&x));
                        (p - f64::from(ts.targets[i as usize])).powi(2)
                    })
                    .sum::<f64>()
                    / m as f64;
                deltas[f] = permuted - base;
            }
            deltas
        })
        .collect();
    let mut scores = [0f64; FEATURE_COUNT];
    for deltas in &per_tree {
        for f in 0..FEATURE_COUNT {
            scores[f] += deltas[f];
        }
    }
    let mut scores: Vec<f64> = scores
        .iter()
        .map(|s| (s / per_tree.len() as f64).max(0.0))
        .collect();
    let max = scores.iter().cloned().fold(0f64, f64::max);
    if max > 0.0 {
        for s in &mut scores {
            *s /= max;
        }
    }
    Ok(scores)
}

// ---------------------------------------------------------------------
// Model file format (little-endian throughout):
//   magic "SSRF", u32 version
//   u32 n_trees, u32 min_leaf, f64 bootstrap_ratio,
//   u32 features_per_split, u64 seed
//   u32 name count, then per name: u32 byte length, utf-8 bytes
//   u32 tree count, then per tree:
//     u32 node count, per node: u16 feature, f32 threshold,
//                               u32 left, u32 right, u32 count
//     u32 oob count, u32 indices
// ---------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 4] = b"SSRF";
const MODEL_VERSION: u32 = 1;

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.pos + N > self.buf.len() {
            return Err(Error::invalid("model data is truncated"));
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::invalid("model data is truncated"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

impl ForestModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.params.n_trees as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.min_leaf as u32).to_le_bytes());
        out.extend_from_slice(&self.params.bootstrap_ratio.to_le_bytes());
        out.extend_from_slice(&(self.params.features_per_split as u32).to_le_bytes());
        out.extend_from_slice(&self.params.seed.to_le_bytes());
        out.extend_from_slice(&(self.feature_names.len() as u32).to_le_bytes());
        for name in &self.feature_names {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        out.extend_from_slice(&(self.trees.len() as u32).to_le_bytes());
        for tree in &self.trees {
            out.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
            for n in &tree.nodes {
                out.extend_from_slice(&n.feature.to_le_bytes());
                out.extend_from_slice(&n.threshold.to_le_bytes());
                out.extend_from_slice(&n.left.to_le_bytes());
                out.extend_from_slice(&n.right.to_le_bytes());
                out.extend_from_slice(&n.count.to_le_bytes());
            }
            out.extend_from_slice(&(tree.oob.len() as u32).to_le_bytes());
            for &i in &tree.oob {
                out.extend_from_slice(&i.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = ByteReader { buf, pos: 0 };
        if &r.take::<4>()? != MODEL_MAGIC {
            return Err(Error::invalid("not a forest model file (bad magic)"));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::VersionMismatch(format!(
                "model format version {version}, this build reads {MODEL_VERSION}"
            )));
        }
        let params = ForestParams {
            n_trees: r.u32()? as usize,
            min_leaf: r.u32()? as usize,
            bootstrap_ratio: r.f64()?,
            features_per_split: r.u32()? as usize,
            seed: r.u64()?,
        };
        let n_names = r.u32()? as usize;
        let mut feature_names = Vec::with_capacity(n_names);
        for _ in 0..n_names {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.bytes(len)?)
                .map_err(|_| Error::invalid("model feature name is not utf-8"))?;
            feature_names.push(s.to_string());
        }
        let n_trees = r.u32()? as usize;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = r.u32()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                nodes.push(Node {
                    feature: r.u16()?,
                    threshold: r.f32()?,
                    left: r.u32()?,
                    right: r.u32()?,
                    count: r.u32()?,
                });
            }
            let n_oob = r.u32()? as usize;
            let mut oob = Vec::with_capacity(n_oob);
            for _ in 0..n_oob {
                oob.push(r.u32()?);
            }
            trees.push(Tree { nodes, oob });
        }
        if r.pos != buf.len() {
            return Err(Error::invalid(format!(
                "{} trailing bytes after model data",
                buf.len() - r.pos
            )));
        }
        Ok(ForestModel { params, feature_names, trees })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        ForestModel::from_bytes(&bytes).map_err(|e| match e {
            Error::VersionMismatch(m) => Error::VersionMismatch(m),
            other => Error::format(path, other.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{MemorySource, SampleProvenance, sample_training};

    fn synthetic_rows(
        n: usize,
        seed: u64,
        target: impl Fn(&[f32; FEATURE_COUNT], &mut ChaCha8Rng) -> f32,
    ) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ts = TrainingSet::new();
        for k in 0..n {
            let x: [f32; FEATURE_COUNT] = std::array::from_fn(|_| rng.random_range(0.0..=1.0));
            let y = target(&x, &mut rng).clamp(0.0, 1.0);
            ts.push(x, y, SampleProvenance { video: "synth".into(), frame: 0, x: k, y: 0 })
                .unwrap();
        }
        ts
    }

    #[test]
    fn constant_target_predicts_that_constant() {
        let ts = synthetic_rows(200, 1, |_, _| 0.42);
        let model = train_forest(&ts, ForestParams::default()).unwrap();
        for x in &ts.features[..20] {
            assert_eq!(model.predict_row(x), 0.42);
        }
    }

    #[test]
    fn single_signal_feature_is_learned_and_top_ranked() {
        let mut noise_top = Vec::new();
        for seed in 0..20u64 {
            let ts = synthetic_rows(9600, 100 + seed, |x, _| x[3]);
            let params = ForestParams { seed, ..ForestParams::default() };
            let model = train_forest(&ts, params).unwrap();
            let mse: f64 = ts
                .features
                .iter()
                .zip(&ts.targets)
                .map(|(x, &y)| (f64::from(model.predict_row(x)) - f64::from(y)).powi(2))
                .sum::<f64>()
                / ts.len() as f64;
            assert!(mse < 0.01, "seed {seed}: training mse {mse}");
            let imp = oob_importance(&model, &ts).unwrap();
            assert_eq!(imp[3], 1.0, "seed {seed}: signal not top-ranked: {imp:?}");
            noise_top.push(
                imp.iter()
                    .enumerate()
                    .filter(|&(f, _)| f != 3)
                    .map(|(_, &v)| v)
                    .fold(0f64, f64::max),
            );
        }
        noise_top.sort_by(f64::total_cmp);
        let median = noise_top[noise_top.len() / 2];
        assert!(median < 0.1, "median max-noise importance {median}");
    }

    #[test]
    fn every_leaf_holds_at_least_min_leaf_samples() {
        let ts = synthetic_rows(500, 3, |x, _| x[0] * 0.5 + x[7] * 0.5);
        let model = train_forest(&ts, ForestParams::default()).unwrap();
        for tree in model.trees() {
            for c in tree.leaf_counts() {
                assert!(c >= 10, "leaf with {c} samples");
            }
        }
    }

    #[test]
    fn training_is_bit_deterministic_per_seed() {
        let ts = synthetic_rows(300, 9, |x, _| x[5]);
        let params = ForestParams { seed: 77, ..ForestParams::default() };
        let a = train_forest(&ts, params).unwrap();
        let b = train_forest(&ts, params).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = train_forest(&ts, ForestParams { seed: 78, ..params }).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn prediction_invariant_under_tree_duplication_and_order() {
        let ts = synthetic_rows(300, 4, |x, _| x[2]);
        let model = train_forest(&ts, ForestParams::default()).unwrap();
        let mut doubled = model.clone();
        doubled.trees.extend(model.trees.iter().cloned());
        let mut reversed = model.clone();
        reversed.trees.reverse();
        for x in &ts.features[..30] {
            let base = f64::from(model.predict_row(x));
            assert!((f64::from(doubled.predict_row(x)) - base).abs() < 1e-6);
            assert!((f64::from(reversed.predict_row(x)) - base).abs() < 1e-6);
        }
    }

    #[test]
    fn single_tree_model_predicts_like_its_tree() {
        let ts = synthetic_rows(200, 6, |x, _| x[1]);
        let params = ForestParams { n_trees: 1, ..ForestParams::default() };
        let model = train_forest(&ts, params).unwrap();
        for x in &ts.features[..20] {
            assert_eq!(model.predict_row(x), model.trees()[0].predict(x));
        }
    }

    #[test]
    fn oob_error_tracks_held_out_error() {
        let noisy_line = |x: &[f32; FEATURE_COUNT], rng: &mut ChaCha8Rng| {
            0.1 + 0.8 * x[3] + rng.random_range(-0.15..0.15)
        };
        let train = synthetic_rows(1500, 21, noisy_line);
        let test = synthetic_rows(500, 22, noisy_line);
        let model = train_forest(&train, ForestParams::default()).unwrap();
        let oob = oob_error(&model, &train).unwrap();
        let held_out: f64 = test
            .features
            .iter()
            .zip(&test.targets)
            .map(|(x, &y)| (f64::from(model.predict_row(x)) - f64::from(y)).powi(2))
            .sum::<f64>()
            / test.len() as f64;
        let rel = (oob - held_out).abs() / held_out;
        assert!(rel < 0.2, "oob {oob} vs held-out {held_out} ({rel:.3} relative)");
    }

    fn pcc(a: &[f32], b: &[f32]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let mb = b.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let (mut num, mut da, mut db) = (0f64, 0f64, 0f64);
        for (&x, &y) in a.iter().zip(b) {
            let (dx, dy) = (f64::from(x) - ma, f64::from(y) - mb);
            num += dx * dy;
            da += dx * dx;
            db += dy * dy;
        }
        num / (da * db).sqrt()
    }

    #[test]
    fn forest_beats_average_fusion_on_a_nonlinear_target() {
        // Two informative maps; the target is their product, which no
        // fixed linear combination can represent.
        let (w, h) = (60, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let a = RasterMap::from_fn(w, h, |_, _| rng.random_range(0.0..=1.0f32));
        let b = RasterMap::from_fn(w, h, |_, _| rng.random_range(0.0..=1.0f32));
        let target = a.zip_map(&b, |x, y| x * y).unwrap();
        let mut maps = vec![a.clone(), b.clone()];
        maps.extend((2..FEATURE_COUNT).map(|_| RasterMap::zeros(w, h)));
        let stack = FeatureStack::from_canonical(maps).unwrap();
        let src = MemorySource {
            name: "nl".into(),
            frames: vec![(stack.clone(), target.clone())],
        };
        let ts = sample_training(&[&src], 1, 3000, 5).unwrap();
        let model = train_forest(&ts, ForestParams::default()).unwrap();
        let forest_map = predict(&model, &stack).unwrap();
        let average =
            crate::fusion::fuse_baseline(stack.maps(), crate::fusion::FusionScheme::Average, None)
                .unwrap();
        let p_forest = pcc(forest_map.as_slice(), target.as_slice());
        let p_avg = pcc(average.as_slice(), target.as_slice());
        assert!(
            p_forest > p_avg,
            "forest pcc {p_forest:.3} vs average pcc {p_avg:.3}"
        );
        assert!(p_forest > 0.5, "forest pcc {p_forest:.3}");
    }

    #[test]
    fn model_serialization_round_trips_byte_identically() {
        let ts = synthetic_rows(300, 13, |x, _| x[4]);
        let model = train_forest(&ts, ForestParams { seed: 5, ..ForestParams::default() })
            .unwrap();
        let bytes = model.to_bytes();
        let loaded = ForestModel::from_bytes(&bytes).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded.to_bytes(), bytes);
    }

    #[test]
    fn model_file_round_trip_and_version_check() {
        let ts = synthetic_rows(200, 14, |x, _| x[0]);
        let model = train_forest(&ts, ForestParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ssrf");
        model.save(&path).unwrap();
        assert_eq!(ForestModel::load(&path).unwrap(), model);

        let mut bytes = model.to_bytes();
        bytes[4] = 99; // bump version field
        assert!(matches!(
            ForestModel::from_bytes(&bytes),
            Err(Error::VersionMismatch(_))
        ));
        let truncated = &model.to_bytes()[..40];
        assert!(ForestModel::from_bytes(truncated).is_err());
        let mut garbage = model.to_bytes();
        garbage[0] = b'X';
        assert!(ForestModel::from_bytes(&garbage).is_err());
    }

    #[test]
    fn undersized_training_set_is_rejected() {
        let ts = synthetic_rows(5, 2, |x, _| x[0]);
        assert!(train_forest(&ts, ForestParams::default()).is_err());
        assert!(train_forest(&TrainingSet::new(), ForestParams::default()).is_err());
    }

    #[test]
    fn predict_rejects_renamed_features() {
        let ts = synthetic_rows(200, 8, |x, _| x[0]);
        let mut model = train_forest(&ts, ForestParams::default()).unwrap();
        model.feature_names[0] = "bogus".into();
        let maps = (0..FEATURE_COUNT).map(|_| RasterMap::zeros(4, 4)).collect();
        let stack = FeatureStack::from_canonical(maps).unwrap();
        assert!(predict(&model, &stack).is_err());
    }
}
