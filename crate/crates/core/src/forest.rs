//! Random-forest binary classifiers with Gini splits, the class-balancing
//! under-sampler, ranking metrics, and the gate that decides whether the
//! sampled data supports training a full ladder of classifiers.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutml::{CpiKind, LabeledDataset, ThresholdLadder};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("dataset has a single class; choose another threshold or sample more")]
    SingleClass,
    #[error("dataset too small to train ({0} rows)")]
    TooSmall(usize),
    #[error("feature width mismatch: classifier expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("model file schema {0} unsupported")]
    Schema(u32),
}

pub type Row = (Vec<f64>, bool);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; sqrt of the width when absent.
    pub feature_subset: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 8,
            feature_subset: None,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        p1: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn score(&self, features: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { p1 } => return p1,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryClassifier {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
}

impl BinaryClassifier {
    /// Mean of the tree leaf probabilities.
    pub fn score(&self, features: &[f64]) -> Result<f64, ForestError> {
        if features.len() != self.n_features {
            return Err(ForestError::WidthMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.score(features)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Binary label (score >= 1/2) plus the score.
    pub fn classify(&self, features: &[f64]) -> Result<(bool, f64), ForestError> {
        let s = self.score(features)?;
        Ok((s >= 0.5, s))
    }
}

/// Balance classes by removing uniformly random majority rows; surviving
/// rows keep their original order.
pub fn undersample(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset, ForestError> {
    let pos = dataset.n_positive();
    let neg = dataset.n_negative();
    if pos == 0 || neg == 0 {
        return Err(ForestError::SingleClass);
    }
    if pos == neg {
        return Ok(dataset.clone());
    }
    let (majority_label, keep_count) = if pos > neg { (true, neg) } else { (false, pos) };
    let majority_idx: Vec<usize> = dataset
        .rows
        .iter()
        .enumerate()
        .filter(|(_, (_, l))| *l == majority_label)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = majority_idx.clone();
    shuffled.shuffle(&mut rng);
    let mut keep = vec![true; dataset.rows.len()];
    for &i in &shuffled[keep_count..] {
        keep[i] = false;
    }
    let rows = dataset
        .rows
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, r)| r.clone())
        .collect();
    Ok(LabeledDataset {
        cpi: dataset.cpi,
        threshold_index: dataset.threshold_index,
        threshold: dataset.threshold,
        rows,
    })
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Best (threshold, gain) for one feature over the given rows, scanning the
/// midpoints between consecutive distinct values.
fn best_split_on_feature(
    rows: &[Row],
    indices: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<(f64, f64)> {
    let mut order: Vec<usize> = indices.to_vec();
    order.sort_by(|&a, &b| rows[a].0[feature].total_cmp(&rows[b].0[feature]));
    let n = order.len();
    let total_pos = order.iter().filter(|&&i| rows[i].1).count();
    let parent = gini(total_pos, n);
    let mut best: Option<(f64, f64)> = None;
    let mut left_pos = 0usize;
    for cut in 1..n {
        if rows[order[cut - 1]].1 {
            left_pos += 1;
        }
        let a = rows[order[cut - 1]].0[feature];
        let b = rows[order[cut]].0[feature];
        if a == b {
            continue;
        }
        if cut < min_leaf || n - cut < min_leaf {
            continue;
        }
        let gain = parent
            - (cut as f64 * gini(left_pos, cut)
                + (n - cut) as f64 * gini(total_pos - left_pos, n - cut))
                / n as f64;
        let threshold = a + (b - a) / 2.0;
        match best {
            Some((_, g)) if g >= gain => {}
            _ => best = Some((threshold, gain)),
        }
    }
    best
}

struct TreeBuilder<'a> {
    rows: &'a [Row],
    params: ForestParams,
    width: usize,
    nodes: Vec<TreeNode>,
}

impl<'a> TreeBuilder<'a> {
    fn grow(&mut self, indices: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = indices.len();
        let pos = indices.iter().filter(|&&i| self.rows[i].1).count();
        let make_leaf = |nodes: &mut Vec<TreeNode>| {
            nodes.push(TreeNode::Leaf {
                p1: pos as f64 / n as f64,
            });
            nodes.len() - 1
        };
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf || pos == 0 || pos == n {
            return make_leaf(&mut self.nodes);
        }

        // Random feature subset, examined in ascending order.
        let k = self
            .params
            .feature_subset
            .unwrap_or_else(|| (self.width as f64).sqrt().ceil() as usize)
            .clamp(1, self.width);
        let mut all: Vec<usize> = (0..self.width).collect();
        all.shuffle(rng);
        let mut subset: Vec<usize> = all.into_iter().take(k).collect();
        subset.sort_unstable();

        let mut best: Option<(usize, f64, f64)> = None;
        for &feature in &subset {
            if let Some((threshold, gain)) =
                best_split_on_feature(self.rows, &indices, feature, self.params.min_leaf)
            {
                match best {
                    Some((_, _, g)) if g >= gain => {}
                    _ => best = Some((feature, threshold, gain)),
                }
            }
        }
        let Some((feature, threshold, gain)) = best else {
            return make_leaf(&mut self.nodes);
        };
        if gain <= 1e-12 {
            return make_leaf(&mut self.nodes);
        }

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.rows[i].0[feature] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { p1: 0.0 }); // placeholder
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

/// Train a forest of bootstrap trees with Gini-impurity splits.
/// Deterministic for a given (dataset, params, seed).
pub fn train_forest(
    dataset: &LabeledDataset,
    params: &ForestParams,
    seed: u64,
) -> Result<BinaryClassifier, ForestError> {
    let rows = &dataset.rows;
    if rows.len() < 2 * params.min_leaf {
        return Err(ForestError::TooSmall(rows.len()));
    }
    let width = rows[0].0.len();
    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64 + 1);
        let bootstrap: Vec<usize> =
            (0..rows.len()).map(|_| rng.random_range(0..rows.len())).collect();
        let mut builder = TreeBuilder {
            rows,
            params: *params,
            width,
            nodes: Vec::new(),
        };
        let root = builder.grow(bootstrap, 0, &mut rng);
        debug_assert_eq!(root, 0);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }
    Ok(BinaryClassifier {
        trees,
        params: *params,
        seed,
        n_features: width,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, ForestError> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ForestError::Metric("single-class labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; a tie group shares the average rank
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let auc =
        (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64);
    Ok(auc)
}

/// Area under the precision-recall staircase by trapezoid, anchored at
/// recall zero with precision one.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64, ForestError> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(ForestError::Metric("single-class labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut auc = 0.0f64;
    let mut prev_recall = 0.0f64;
    let mut prev_precision = 1.0f64;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - prev_recall) * (precision + prev_precision) / 2.0;
        prev_recall = recall;
        prev_precision = precision;
        i = j + 1;
    }
    Ok(auc)
}

/// Deterministic stratified split; returns (train, test) row indices in
/// ascending order.
pub fn stratified_split(rows: &[Row], test_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [false, true] {
        let mut idx: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, (_, l))| *l == class)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64) * test_frac).ceil() as usize;
        let n_test = n_test.min(idx.len().saturating_sub(1));
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Held-out metrics of one gate probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateProbe {
    pub threshold_index: usize,
    pub roc: f64,
    pub pr: f64,
}

/// Ladder of classifiers for one indicator, strictest first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierEnsemble {
    pub cpi: CpiKind,
    pub ladder: ThresholdLadder,
    pub feature_names: Vec<String>,
    pub classifiers: Vec<BinaryClassifier>,
    /// Held-out (roc, pr) per classifier.
    pub metrics: Vec<(f64, f64)>,
}

impl ClassifierEnsemble {
    pub fn n(&self) -> usize {
        self.classifiers.len()
    }
}

/// Result of the gated training step.
#[derive(Debug)]
pub enum TrainOutcome {
    Passed(ClassifierEnsemble),
    /// At least one probe missed the gate; the caller resumes sampling.
    GateFailed { probes: Vec<GateProbe>, reason: String },
}

fn train_and_evaluate(
    dataset: &LabeledDataset,
    params: &ForestParams,
    seed: u64,
) -> Result<(BinaryClassifier, f64, f64), ForestError> {
    let (train_idx, test_idx) = stratified_split(&dataset.rows, 0.2, seed);
    let train_rows: Vec<Row> = train_idx.iter().map(|&i| dataset.rows[i].clone()).collect();
    let test_rows: Vec<Row> = test_idx.iter().map(|&i| dataset.rows[i].clone()).collect();
    let train_ds = LabeledDataset {
        cpi: dataset.cpi,
        threshold_index: dataset.threshold_index,
        threshold: dataset.threshold,
        rows: train_rows,
    };
    let model = train_forest(&train_ds, params, seed)?;
    let scores: Vec<f64> = test_rows
        .iter()
        .map(|(f, _)| model.score(f))
        .collect::<Result<_, _>>()?;
    let labels: Vec<bool> = test_rows.iter().map(|(_, l)| *l).collect();
    let roc = roc_auc(&scores, &labels)?;
    let pr = pr_auc(&scores, &labels)?;
    Ok((model, roc, pr))
}

/// Train the ladder of classifiers with the quality gate: the strictest,
/// median, and loosest datasets are probed first, and only if all of their
/// held-out areas clear the minimums are the remaining models trained.
///
/// Datasets must be labeled, under-sampled, and ordered strictest first.
pub fn train_ensemble(
    datasets: &[LabeledDataset],
    ladder: &ThresholdLadder,
    roc_min: f64,
    pr_min: f64,
    params: &ForestParams,
    seed: u64,
) -> Result<TrainOutcome, ForestError> {
    assert_eq!(datasets.len(), ladder.n(), "one dataset per threshold");
    let n = datasets.len();
    let median = n.div_ceil(2) - 1;
    let probes_idx = if n >= 3 {
        vec![0, median, n - 1]
    } else {
        (0..n).collect()
    };

    let mut probes = Vec::new();
    let mut trained: Vec<Option<(BinaryClassifier, f64, f64)>> = vec![None; n];
    for &i in &probes_idx {
        match train_and_evaluate(&datasets[i], params, seed) {
            Ok((model, roc, pr)) => {
                probes.push(GateProbe {
                    threshold_index: i + 1,
                    roc,
                    pr,
                });
                trained[i] = Some((model, roc, pr));
            }
            Err(ForestError::SingleClass) | Err(ForestError::TooSmall(_)) | Err(ForestError::Metric(_)) => {
                // Not enough usable data at this threshold: same remedy as a
                // failed gate, resume sampling.
                return Ok(TrainOutcome::GateFailed {
                    probes,
                    reason: format!("threshold {} lacks evaluable data", i + 1),
                });
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(bad) = probes.iter().find(|p| p.roc < roc_min || p.pr < pr_min) {
        return Ok(TrainOutcome::GateFailed {
            reason: format!(
                "threshold {} held-out roc {:.4} / pr {:.4} below gate ({roc_min}, {pr_min})",
                bad.threshold_index, bad.roc, bad.pr
            ),
            probes,
        });
    }

    let mut classifiers = Vec::with_capacity(n);
    let mut metrics = Vec::with_capacity(n);
    for i in 0..n {
        let (model, roc, pr) = match trained[i].take() {
            Some(done) => done,
            None => train_and_evaluate(&datasets[i], params, seed)?,
        };
        classifiers.push(model);
        metrics.push((roc, pr));
    }
    // Canonical column names when the data has the canonical width,
    // positional names otherwise.
    let width = classifiers[0].n_features;
    let canonical = ladder.cpi.feature_names();
    let feature_names: Vec<String> = if width == canonical.len() {
        canonical.iter().map(|s| s.to_string()).collect()
    } else {
        (0..width).map(|i| format!("f{i}")).collect()
    };
    Ok(TrainOutcome::Passed(ClassifierEnsemble {
        cpi: ladder.cpi,
        ladder: ladder.clone(),
        feature_names,
        classifiers,
        metrics,
    }))
}

/// Self-describing model file.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: u32,
    pub produced_by: String,
    pub ensemble: ClassifierEnsemble,
}

pub const MODEL_SCHEMA: u32 = 1;

pub fn save_ensemble(
    ensemble: &ClassifierEnsemble,
    produced_by: &str,
    path: impl AsRef<Path>,
) -> Result<(), ForestError> {
    let file = ModelFile {
        schema: MODEL_SCHEMA,
        produced_by: produced_by.to_string(),
        ensemble: ensemble.clone(),
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(&file).expect("model serializes").as_bytes())?;
    Ok(())
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<ClassifierEnsemble, ForestError> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.schema != MODEL_SCHEMA {
        return Err(ForestError::Schema(file.schema));
    }
    let ensemble = file.ensemble;
    let width = ensemble.feature_names.len();
    for c in &ensemble.classifiers {
        if c.n_features != width {
            return Err(ForestError::WidthMismatch {
                expected: width,
                got: c.n_features,
            });
        }
    }
    Ok(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: Vec<Row>) -> LabeledDataset {
        LabeledDataset {
            cpi: CpiKind::Lb,
            threshold_index: 1,
            threshold: 0.0,
            rows,
        }
    }

    /// Two well-separated Gaussian-ish blobs on two features.
    fn separable_rows(n_per_class: usize, seed: u64) -> Vec<Row> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for i in 0..(2 * n_per_class) {
            let positive = i % 2 == 0;
            let center = if positive { 2.0 } else { -2.0 };
            let f0 = center + rng.random_range(-0.8..0.8);
            let f1 = -center + rng.random_range(-0.8..0.8);
            rows.push((vec![f0, f1], positive));
        }
        rows
    }

    fn noise_rows(n: usize, seed: u64) -> Vec<Row> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (
                    vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                    rng.random_bool(0.5),
                )
            })
            .collect()
    }

    #[test]
    fn undersample_balances_majority() {
        let mut rows = Vec::new();
        for i in 0..40 {
            rows.push((vec![i as f64], i < 10));
        }
        let ds = dataset(rows);
        let balanced = undersample(&ds, 7).unwrap();
        assert_eq!(balanced.n_positive(), 10);
        assert_eq!(balanced.n_negative(), 10);
    }

    #[test]
    fn undersample_balanced_input_unchanged() {
        let rows: Vec<Row> = (0..10).map(|i| (vec![i as f64], i % 2 == 0)).collect();
        let ds = dataset(rows);
        let out = undersample(&ds, 3).unwrap();
        assert_eq!(out.rows, ds.rows);
    }

    #[test]
    fn undersample_is_seed_deterministic() {
        let rows: Vec<Row> = (0..50).map(|i| (vec![i as f64], i < 8)).collect();
        let ds = dataset(rows);
        let a = undersample(&ds, 42).unwrap();
        let b = undersample(&ds, 42).unwrap();
        assert_eq!(a.rows, b.rows);
        let c = undersample(&ds, 43).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn undersample_rejects_single_class() {
        let rows: Vec<Row> = (0..5).map(|i| (vec![i as f64], true)).collect();
        assert!(matches!(
            undersample(&dataset(rows), 1),
            Err(ForestError::SingleClass)
        ));
    }

    #[test]
    fn separable_fixture_trains_to_perfect_accuracy() {
        let rows = separable_rows(40, 11);
        let ds = dataset(rows.clone());
        let model = train_forest(&ds, &ForestParams::default(), 5).unwrap();
        let correct = rows
            .iter()
            .filter(|(f, l)| model.classify(f).unwrap().0 == *l)
            .count();
        assert_eq!(correct, rows.len());
    }

    #[test]
    fn noise_labels_score_near_half_over_seeds() {
        // Monte Carlo over seeds: mean held-out area must hover around 1/2.
        let mut aucs = Vec::new();
        for seed in 0..20u64 {
            let rows = noise_rows(300, 1000 + seed);
            let ds = dataset(rows);
            let (_, roc, _) = train_and_evaluate(&ds, &ForestParams::default(), seed).unwrap();
            aucs.push(roc);
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        assert!((mean - 0.5).abs() < 0.1, "mean held-out area {mean}");
    }

    #[test]
    fn depth_one_stump_picks_the_informative_feature() {
        // Feature 1 is binary and equals the label; feature 0 is noise.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Row> = (0..60)
            .map(|i| {
                let label = i % 2 == 0;
                (
                    vec![rng.random_range(-1.0..1.0), f64::from(label as u8)],
                    label,
                )
            })
            .collect();
        // Exhaustive oracle: the best Gini gain over all features/thresholds.
        let indices: Vec<usize> = (0..rows.len()).collect();
        let g0 = best_split_on_feature(&rows, &indices, 0, 1).map(|(_, g)| g).unwrap_or(0.0);
        let g1 = best_split_on_feature(&rows, &indices, 1, 1).map(|(_, g)| g).unwrap();
        assert!(g1 > g0, "oracle gain ordering ({g1} vs {g0})");

        let params = ForestParams {
            n_trees: 1,
            max_depth: 1,
            feature_subset: Some(2),
            min_leaf: 1,
        };
        let model = train_forest(&dataset(rows), &params, 9).unwrap();
        match model.trees[0].nodes[0] {
            TreeNode::Split { feature, .. } => assert_eq!(feature, 1),
            ref other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn roc_fixtures() {
        // perfectly ordered
        let auc = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!(auc, 1.0);
        // all ties
        let auc = roc_auc(&[0.5; 6], &[true, false, true, false, true, false]).unwrap();
        assert_eq!(auc, 0.5);
        // single class rejected
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn roc_six_point_fixture_matches_pair_counting() {
        let scores = [0.9, 0.8, 0.7, 0.7, 0.4, 0.2];
        let labels = [true, false, true, false, true, false];
        // Oracle: exhaustive pair enumeration with half-credit ties.
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        let expect = wins / pairs;
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!((auc - expect).abs() < 1e-12, "{auc} vs {expect}");
    }

    #[test]
    fn roc_is_invariant_under_monotone_score_transforms() {
        let scores = [0.1, 0.5, 0.3, 0.9, 0.2, 0.7];
        let labels = [false, true, false, true, false, true];
        let base = roc_auc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
        let transformed = roc_auc(&squashed, &labels).unwrap();
        assert_eq!(base.to_bits(), transformed.to_bits());
    }

    #[test]
    fn pr_fixture_matches_hand_computation() {
        // scores descending: (0.9,P) (0.8,N) (0.7,P) (0.4,N)
        // recall/precision points: (0.5, 1), (0.5, 0.5), (1, 2/3), (1, 0.5)
        // trapezoid from (0,1): 0.5*(1+1)/2 + 0 + 0.5*(0.5+2/3)/2 + 0
        let scores = [0.9, 0.8, 0.7, 0.4];
        let labels = [true, false, true, false];
        let expect = 0.5 * (1.0 + 1.0) / 2.0 + 0.5 * (0.5 + 2.0 / 3.0) / 2.0;
        let auc = pr_auc(&scores, &labels).unwrap();
        assert!((auc - expect).abs() < 1e-12, "{auc} vs {expect}");
        // perfect ranking gives area one
        let perfect = pr_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(perfect, 1.0);
    }

    #[test]
    fn classify_mean_rule() {
        let single = BinaryClassifier {
            trees: vec![Tree {
                nodes: vec![TreeNode::Leaf { p1: 1.0 }],
            }],
            params: ForestParams::default(),
            seed: 0,
            n_features: 3,
        };
        assert_eq!(single.classify(&[0.0, 0.0, 0.0]).unwrap(), (true, 1.0));

        let two = BinaryClassifier {
            trees: vec![
                Tree {
                    nodes: vec![TreeNode::Leaf { p1: 0.2 }],
                },
                Tree {
                    nodes: vec![TreeNode::Leaf { p1: 0.9 }],
                },
            ],
            params: ForestParams::default(),
            seed: 0,
            n_features: 1,
        };
        let (label, score) = two.classify(&[0.0]).unwrap();
        assert!(label);
        assert!((score - 0.55).abs() < 1e-15);
        assert!(matches!(
            two.classify(&[0.0, 1.0]),
            Err(ForestError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn unlimited_depth_tree_memorizes_training_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Row> = (0..50)
            .map(|_| {
                (
                    vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                    rng.random_bool(0.5),
                )
            })
            .collect();
        // Grow one deep tree on the full dataset (no bootstrap): it must
        // reproduce every training label exactly.
        let params = ForestParams {
            n_trees: 1,
            max_depth: 64,
            feature_subset: Some(2),
            min_leaf: 1,
        };
        let mut rng2 = ChaCha8Rng::seed_from_u64(21);
        let mut builder = TreeBuilder {
            rows: &rows,
            params,
            width: 2,
            nodes: Vec::new(),
        };
        builder.grow((0..rows.len()).collect(), 0, &mut rng2);
        let tree = Tree { nodes: builder.nodes };
        for (f, l) in &rows {
            assert_eq!(tree.score(f) >= 0.5, *l);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let rows = separable_rows(30, 2);
        let ds = dataset(rows);
        let a = train_forest(&ds, &ForestParams::default(), 77).unwrap();
        let b = train_forest(&ds, &ForestParams::default(), 77).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn predictions_refit_on_monotone_transformed_feature_are_identical() {
        let rows = separable_rows(40, 5);
        // strictly monotone transform of feature 0
        let transformed: Vec<Row> = rows
            .iter()
            .map(|(f, l)| (vec![(f[0] * 0.5).exp(), f[1]], *l))
            .collect();
        let params = ForestParams::default();
        let base = train_forest(&dataset(rows.clone()), &params, 13).unwrap();
        let refit = train_forest(&dataset(transformed.clone()), &params, 13).unwrap();
        for ((f, _), (g, _)) in rows.iter().zip(&transformed) {
            let a = base.score(f).unwrap();
            let b = refit.score(g).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    fn ladder_of(n: usize) -> ThresholdLadder {
        ThresholdLadder {
            cpi: CpiKind::Lb,
            thresholds: (0..n).map(|i| 0.9 - 0.05 * i as f64).collect(),
        }
    }

    #[test]
    fn gate_passes_on_separable_data_with_ten_classifiers() {
        let n = 10;
        let datasets: Vec<LabeledDataset> = (0..n)
            .map(|i| {
                let mut ds = dataset(separable_rows(60, 100 + i as u64));
                ds.threshold_index = i + 1;
                ds
            })
            .collect();
        let outcome =
            train_ensemble(&datasets, &ladder_of(n), 0.92, 0.92, &ForestParams::default(), 1)
                .unwrap();
        match outcome {
            TrainOutcome::Passed(ens) => {
                assert_eq!(ens.n(), 10);
                assert!(ens.metrics.iter().all(|&(r, p)| r >= 0.92 && p >= 0.92));
            }
            TrainOutcome::GateFailed { reason, .. } => panic!("gate failed: {reason}"),
        }
    }

    #[test]
    fn gate_fails_on_noise_labels() {
        let n = 4;
        let datasets: Vec<LabeledDataset> = (0..n)
            .map(|i| {
                let mut ds = dataset(noise_rows(200, 40 + i as u64));
                ds.threshold_index = i + 1;
                ds
            })
            .collect();
        let outcome =
            train_ensemble(&datasets, &ladder_of(n), 0.92, 0.92, &ForestParams::default(), 2)
                .unwrap();
        assert!(matches!(outcome, TrainOutcome::GateFailed { .. }));
    }

    #[test]
    fn zero_gate_always_passes_with_both_classes() {
        let n = 3;
        let datasets: Vec<LabeledDataset> = (0..n)
            .map(|i| {
                let mut ds = dataset(noise_rows(80, 60 + i as u64));
                ds.threshold_index = i + 1;
                ds
            })
            .collect();
        let outcome =
            train_ensemble(&datasets, &ladder_of(n), 0.0, 0.0, &ForestParams::default(), 3)
                .unwrap();
        assert!(matches!(outcome, TrainOutcome::Passed(_)));
    }

    #[test]
    fn ensemble_round_trips_through_file() {
        let n = 3;
        let datasets: Vec<LabeledDataset> = (0..n)
            .map(|i| {
                let mut ds = dataset(separable_rows(50, 200 + i as u64));
                ds.threshold_index = i + 1;
                ds
            })
            .collect();
        let TrainOutcome::Passed(ens) =
            train_ensemble(&datasets, &ladder_of(n), 0.5, 0.5, &ForestParams::default(), 4)
                .unwrap()
        else {
            panic!("expected pass");
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_ensemble(&ens, "test", &path).unwrap();
        let loaded = load_ensemble(&path).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let f = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            for (a, b) in ens.classifiers.iter().zip(&loaded.classifiers) {
                assert_eq!(
                    a.score(&f).unwrap().to_bits(),
                    b.score(&f).unwrap().to_bits()
                );
            }
        }
    }

    #[test]
    fn truncated_model_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, "{\"schema\": 1, \"produced_by\": \"x\", \"ense").unwrap();
        assert!(load_ensemble(&path).is_err());
    }
}
