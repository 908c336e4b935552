use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means ⌈√k⌉.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: None,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn features_per_split(&self, k: usize) -> usize {
        self.max_features.unwrap_or_else(|| (k as f64).sqrt().ceil() as usize).clamp(1, k.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Axis-aligned binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// `x[feature] <= threshold` goes to `left_class`.
    pub fn stump(feature: usize, threshold: f64, left_class: usize, right_class: usize) -> Self {
        DecisionTree {
            nodes: vec![
                Node::Split { feature, threshold, left: 1, right: 2 },
                Node::Leaf { class: left_class },
                Node::Leaf { class: right_class },
            ],
        }
    }

    pub fn constant(class: usize) -> Self {
        DecisionTree { nodes: vec![Node::Leaf { class }] }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub feature_names: Vec<String>,
    pub n_classes: usize,
    pub config: ForestConfig,
    /// Normalized mean decrease in impurity, in feature order.
    pub importance: Vec<f64>,
}

impl ForestModel {
    /// Assembles a model from hand-built trees; importance is left at zero.
    pub fn from_trees(trees: Vec<DecisionTree>, feature_names: Vec<String>, n_classes: usize) -> Self {
        let k = feature_names.len();
        ForestModel { trees, feature_names, n_classes, config: ForestConfig::default(), importance: vec![0.0; k] }
    }

    pub fn votes(&self, row: &[f64]) -> Vec<usize> {
        let mut v = vec![0; self.n_classes];
        for t in &self.trees {
            v[t.predict(row)] += 1;
        }
        v
    }

    /// Majority vote; ties go to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let v = self.votes(row);
        let mut best = 0;
        for (c, &n) in v.iter().enumerate() {
            if n > v[best] {
                best = c;
            }
        }
        best
    }

    pub fn vote_fraction(&self, row: &[f64], class: usize) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.votes(row).get(class).copied().unwrap_or(0) as f64 / self.trees.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub per_class: BTreeMap<usize, ClassMetrics>,
    pub weighted: ClassMetrics,
    pub accuracy: f64,
    pub feature_importance: BTreeMap<String, f64>,
    pub train_size: usize,
    pub test_size: usize,
    pub config: ForestConfig,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn tree_seed(seed: u64, t: usize) -> u64 {
    mix(mix(seed) ^ mix(t as u64 ^ 0x5eed))
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn class_counts(labels: &[usize], idx: &[usize], n_classes: usize) -> Vec<usize> {
    let mut c = vec![0; n_classes];
    for &i in idx {
        c[labels[i]] += 1;
    }
    c
}

fn argmax(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    name_hashes: &'a [u64],
    names: &'a [String],
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    seed: u64,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Builder<'_> {
    /// Features in the order they are tried at a node: keyed by
    /// (tree seed, node key, feature name) so column order is irrelevant.
    fn feature_order(&self, node_key: u64) -> Vec<usize> {
        let mut f: Vec<usize> = (0..self.names.len()).collect();
        f.sort_by_key(|&j| (mix(self.seed ^ mix(node_key ^ self.name_hashes[j])), &self.names[j]));
        f
    }

    fn best_on(&self, idx: &[usize], j: usize, parent_counts: &[usize]) -> Option<(f64, f64)> {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| self.x[a][j].total_cmp(&self.x[b][j]));
        let n = order.len();
        let mut left = vec![0usize; self.n_classes];
        let mut best: Option<(f64, f64)> = None;
        for p in 0..n - 1 {
            left[self.y[order[p]]] += 1;
            let (lv, rv) = (self.x[order[p]][j], self.x[order[p + 1]][j]);
            if lv == rv {
                continue;
            }
            let nl = p + 1;
            let nr = n - nl;
            if nl < self.min_leaf || nr < self.min_leaf {
                continue;
            }
            let right: Vec<usize> = parent_counts.iter().zip(&left).map(|(a, b)| a - b).collect();
            let weighted = nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr);
            let mut threshold = lv + (rv - lv) / 2.0;
            if threshold >= rv {
                threshold = lv;
            }
            if best.is_none_or(|(w, _)| weighted < w) {
                best = Some((weighted, threshold));
            }
        }
        best
    }

    fn find_split(&self, idx: &[usize], counts: &[usize], node_key: u64) -> Option<BestSplit> {
        let n = idx.len();
        let parent = n as f64 * gini(counts, n);
        let mut best: Option<BestSplit> = None;
        for (tried, j) in self.feature_order(node_key).into_iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            let Some((weighted, threshold)) = self.best_on(idx, j, counts) else {
                continue;
            };
            let decrease = parent - weighted;
            let better = match &best {
                None => true,
                Some(b) => decrease > b.decrease,
            };
            if better {
                let (left, right) = idx.iter().partition(|&&i| self.x[i][j] <= threshold);
                best = Some(BestSplit { feature: j, threshold, decrease, left, right });
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, node_key: u64) -> usize {
        let id = self.nodes.len();
        let counts = class_counts(self.y, &idx, self.n_classes);
        self.nodes.push(Node::Leaf { class: argmax(&counts) });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || idx.len() < 2 * self.min_leaf || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(split) = self.find_split(&idx, &counts, node_key) else {
            return id;
        };
        self.importance[split.feature] += split.decrease;
        let left = self.grow(split.left, depth + 1, mix(node_key.wrapping_mul(2)));
        let right = self.grow(split.right, depth + 1, mix(node_key.wrapping_mul(2).wrapping_add(1)));
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

fn validate(x: &[Vec<f64>], y: &[usize], names: &[String]) -> Result<usize, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if names.is_empty() {
        return Err(StatsError::NoFeatures);
    }
    if x.iter().any(|r| r.len() != names.len()) {
        return Err(StatsError::RaggedFeatures);
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n_classes = y.iter().max().copied().unwrap_or(0) + 1;
    let present = class_counts(y, &(0..y.len()).collect::<Vec<_>>(), n_classes).iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(StatsError::SingleClass);
    }
    Ok(n_classes)
}

/// Fits a forest on all given rows.
pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[usize],
    feature_names: &[String],
    config: &ForestConfig,
) -> Result<ForestModel, StatsError> {
    let n_classes = validate(x, y, feature_names)?;
    let k = feature_names.len();
    let name_hashes: Vec<u64> = feature_names.iter().map(|n| name_hash(n)).collect();
    let mtry = config.features_per_split(k);
    let grown: Vec<(DecisionTree, Vec<f64>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let seed = tree_seed(config.seed, t);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx: Vec<usize> = if config.bootstrap {
                (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
            } else {
                (0..x.len()).collect()
            };
            let mut b = Builder {
                x,
                y,
                n_classes,
                name_hashes: &name_hashes,
                names: feature_names,
                mtry,
                min_leaf: config.min_samples_leaf.max(1),
                max_depth: config.max_depth,
                seed,
                nodes: Vec::new(),
                importance: vec![0.0; k],
            };
            b.grow(idx, 0, 1);
            (DecisionTree { nodes: b.nodes }, b.importance)
        })
        .collect();
    let mut importance = vec![0.0; k];
    for (_, imp) in &grown {
        let s: f64 = imp.iter().sum();
        if s > 0.0 {
            importance.iter_mut().zip(imp).for_each(|(a, b)| *a += b / s);
        }
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|a| *a /= total);
    }
    Ok(ForestModel {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        feature_names: feature_names.to_vec(),
        n_classes,
        config: config.clone(),
        importance,
    })
}

/// Stratified split: each class contributes `1 - train_fraction` of its rows
/// to the test set (at least one when it has two or more rows).
pub fn stratified_split(y: &[usize], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut rows) in by_class {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(c as u64 + 1)));
        rows.shuffle(&mut rng);
        let mut k = (rows.len() as f64 * (1.0 - train_fraction)).round() as usize;
        if rows.len() >= 2 {
            k = k.clamp(1, rows.len() - 1);
        } else {
            k = 0;
        }
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn classification_metrics(truth: &[usize], pred: &[usize], n_classes: usize) -> (BTreeMap<usize, ClassMetrics>, ClassMetrics, f64) {
    let mut per = BTreeMap::new();
    let mut weighted = ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: truth.len() };
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    for c in 0..n_classes {
        let tp = truth.iter().zip(pred).filter(|(&t, &p)| t == c && p == c).count();
        let predicted = pred.iter().filter(|&&p| p == c).count();
        let support = truth.iter().filter(|&&t| t == c).count();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        let w = ratio(support, truth.len());
        weighted.precision += w * precision;
        weighted.recall += w * recall;
        weighted.f1 += w * f1;
        per.insert(c, ClassMetrics { precision, recall, f1, support });
    }
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    (per, weighted, ratio(correct, truth.len()))
}

/// Stratified split, fit on the training part, score on the held-out part.
pub fn train_random_forest(
    x: &[Vec<f64>],
    y: &[usize],
    feature_names: &[String],
    config: &ForestConfig,
) -> Result<(ForestModel, ClassifierReport), StatsError> {
    let n_classes = validate(x, y, feature_names)?;
    let (train, test) = stratified_split(y, config.train_fraction, config.seed);
    let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
    let ty: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let mut model = fit_forest(&tx, &ty, feature_names, config)?;
    model.n_classes = model.n_classes.max(n_classes);
    let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let pred: Vec<usize> = test.iter().map(|&i| model.predict(&x[i])).collect();
    let (per_class, weighted, accuracy) = classification_metrics(&truth, &pred, n_classes);
    let report = ClassifierReport {
        per_class,
        weighted,
        accuracy,
        feature_importance: feature_importance(&model)?,
        train_size: train.len(),
        test_size: test.len(),
        config: config.clone(),
    };
    Ok((model, report))
}

pub fn feature_importance(model: &ForestModel) -> Result<BTreeMap<String, f64>, StatsError> {
    if model.trees.is_empty() {
        return Err(StatsError::Untrained);
    }
    Ok(model.feature_names.iter().cloned().zip(model.importance.iter().copied()).collect())
}

/// Mean vote fraction for `class` with feature `feature` set to each grid value
/// in every background row.
pub fn partial_dependence(
    model: &ForestModel,
    feature: usize,
    grid: &[f64],
    background: &[Vec<f64>],
    class: usize,
) -> Result<Vec<(f64, f64)>, StatsError> {
    if feature >= model.feature_names.len() {
        return Err(StatsError::FeatureOutOfRange { index: feature, count: model.feature_names.len() });
    }
    if grid.is_empty() || background.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut row = vec![0.0; model.feature_names.len()];
    Ok(grid
        .iter()
        .map(|&v| {
            let mean = background
                .iter()
                .map(|b| {
                    row.copy_from_slice(b);
                    row[feature] = v;
                    model.vote_fraction(&row, class)
                })
                .sum::<f64>()
                / background.len() as f64;
            (v, mean)
        })
        .collect())
}
