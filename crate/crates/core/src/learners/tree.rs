//! Decision trees over binary features.
//!
//! Classification trees split on the feature with the highest C4.5 gain
//! ratio and are then pruned bottom-up with C4.5's pessimistic
//! (confidence-bound) error estimate. Regression trees split on the largest
//! reduction of squared error. Each split sends rows with feature value 0 to
//! the `zero` branch and 1 to the `one` branch.

use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;

use super::{AlgorithmSpec, FeatureMatrix, LearnError, Target, TrainingSet};
use crate::dataset::argmax4;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub min_samples_leaf: usize,
    pub max_depth: usize,
    /// Confidence level of the pruning error bound.
    pub confidence: f64,
    pub prune: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { min_samples_leaf: 2, max_depth: 16, confidence: 0.25, prune: true }
    }
}

impl TreeParams {
    pub const NAMES: &'static [&'static str] = &["min_samples_leaf", "max_depth", "confidence", "prune"];

    pub fn from_spec(spec: &AlgorithmSpec) -> Result<Self, LearnError> {
        let d = TreeParams::default();
        Ok(TreeParams {
            min_samples_leaf: spec.count("min_samples_leaf", d.min_samples_leaf, 1)?,
            max_depth: spec.count("max_depth", d.max_depth, 0)?,
            confidence: spec.real("confidence", d.confidence, |v| v > 0.0 && v < 1.0)?,
            prune: spec.real("prune", 1.0, |v| v == 0.0 || v == 1.0)? == 1.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    /// Mean target (regression) or 0 (classification).
    pub value: f64,
    /// Class counts (classification) or zeros (regression).
    pub counts: [f64; 4],
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf(Leaf),
    Split { feature: usize, zero: Box<Node>, one: Box<Node> },
}

impl Node {
    fn leaf_for(&self, row: &[f64]) -> &Leaf {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(l) => return l,
                Node::Split { feature, zero, one } => {
                    node = if row[*feature] != 0.0 { one } else { zero };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split { zero, one, .. } => 1 + zero.depth().max(one.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split { zero, one, .. } => zero.n_leaves() + one.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

fn entropy(counts: &[f64; 4], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

/// C4.5 gain ratio of splitting `parent` class counts into `zero`/`one`.
/// Returns None when either side is empty.
pub fn gain_ratio(zero: &[f64; 4], one: &[f64; 4]) -> Option<f64> {
    let n0: f64 = zero.iter().sum();
    let n1: f64 = one.iter().sum();
    if n0 == 0.0 || n1 == 0.0 {
        return None;
    }
    let n = n0 + n1;
    let mut parent = [0.0; 4];
    for k in 0..4 {
        parent[k] = zero[k] + one[k];
    }
    let gain = entropy(&parent, n) - (n0 / n) * entropy(zero, n0) - (n1 / n) * entropy(one, n1);
    let split_info = -(n0 / n) * (n0 / n).log2() - (n1 / n) * (n1 / n).log2();
    Some(gain / split_info)
}

/// Coefficient z² for a confidence level, interpolated from C4.5's table of
/// normal deviates.
fn pruning_coefficient(cf: f64) -> f64 {
    const VAL: [f64; 9] = [0.0, 0.001, 0.005, 0.01, 0.05, 0.10, 0.20, 0.40, 1.00];
    const DEV: [f64; 9] = [4.0, 3.09, 2.58, 2.33, 1.65, 1.28, 0.84, 0.25, 0.00];
    let mut i = 1;
    while i < VAL.len() - 1 && cf > VAL[i] {
        i += 1;
    }
    let z = DEV[i - 1] + (DEV[i] - DEV[i - 1]) * (cf - VAL[i - 1]) / (VAL[i] - VAL[i - 1]);
    z * z
}

/// Extra errors predicted for a leaf holding `n` cases with `e` errors
/// (C4.5's upper confidence bound minus observed errors).
pub fn added_errors(n: f64, e: f64, cf: f64) -> f64 {
    let coeff = pruning_coefficient(cf);
    if e < 1e-6 {
        n * (1.0 - (cf.ln() / n).exp())
    } else if e < 0.9999 {
        let v0 = n * (1.0 - (cf.ln() / n).exp());
        v0 + e * (added_errors(n, 1.0, cf) - v0)
    } else if e + 0.5 >= n {
        0.67 * (n - e)
    } else {
        let pr = (e + 0.5 + coeff / 2.0 + (coeff * ((e + 0.5) * (1.0 - (e + 0.5) / n) + coeff / 4.0)).sqrt())
            / (n + coeff);
        n * pr - e
    }
}

/// Random feature subsets per node, for forests.
pub struct FeatureSampler<'a> {
    pub rng: &'a mut Rng,
    pub max_features: usize,
}

pub(crate) struct Builder<'a> {
    features: &'a FeatureMatrix,
    target: &'a Target,
    params: TreeParams,
    sampler: Option<FeatureSampler<'a>>,
}

enum Score {
    Better(f64),
    Invalid,
}

impl<'a> Builder<'a> {
    pub(crate) fn new(data: &'a TrainingSet, params: TreeParams, sampler: Option<FeatureSampler<'a>>) -> Self {
        Builder { features: &data.features, target: &data.target, params, sampler }
    }

    fn make_leaf(&self, idx: &[usize]) -> Leaf {
        match self.target {
            Target::Regression(t) => {
                // idx is kept in ascending target order, so the sum does
                // not depend on the training-row order.
                let sum: f64 = idx.iter().map(|&i| t[i]).sum();
                Leaf { value: sum / idx.len() as f64, counts: [0.0; 4], n: idx.len() }
            }
            Target::Classification(l) => {
                let mut counts = [0.0; 4];
                for &i in idx {
                    counts[l[i].index()] += 1.0;
                }
                Leaf { value: 0.0, counts, n: idx.len() }
            }
        }
    }

    fn sse(&self, idx: &[usize], t: &[f64]) -> f64 {
        let mean = idx.iter().map(|&i| t[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (t[i] - mean).powi(2)).sum()
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        match self.target {
            Target::Regression(t) => idx.iter().all(|&i| t[i] == t[idx[0]]),
            Target::Classification(l) => idx.iter().all(|&i| l[i] == l[idx[0]]),
        }
    }

    fn score(&self, idx: &[usize], feature: usize, parent_sse: f64) -> Score {
        let (zero, one): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.features.row(i)[feature] == 0.0);
        let min = self.params.min_samples_leaf;
        if zero.len() < min || one.len() < min {
            return Score::Invalid;
        }
        match self.target {
            Target::Classification(l) => {
                let mut c0 = [0.0; 4];
                let mut c1 = [0.0; 4];
                for &i in &zero {
                    c0[l[i].index()] += 1.0;
                }
                for &i in &one {
                    c1[l[i].index()] += 1.0;
                }
                let n = idx.len() as f64;
                let mut parent = [0.0; 4];
                for k in 0..4 {
                    parent[k] = c0[k] + c1[k];
                }
                let gain = entropy(&parent, n)
                    - (zero.len() as f64 / n) * entropy(&c0, zero.len() as f64)
                    - (one.len() as f64 / n) * entropy(&c1, one.len() as f64);
                if gain <= 1e-12 {
                    return Score::Invalid;
                }
                gain_ratio(&c0, &c1).map_or(Score::Invalid, Score::Better)
            }
            Target::Regression(t) => {
                let reduction = parent_sse - self.sse(&zero, t) - self.sse(&one, t);
                if reduction <= 1e-12 * parent_sse.max(1e-300) {
                    Score::Invalid
                } else {
                    Score::Better(reduction)
                }
            }
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<usize> {
        let n_features = self.features.n_cols();
        let parent_sse = match self.target {
            Target::Regression(t) => self.sse(idx, t),
            Target::Classification(_) => 0.0,
        };
        let mut order: Vec<usize> = (0..n_features).collect();
        let mut budget = n_features;
        if let Some(s) = self.sampler.as_mut() {
            order.shuffle(s.rng);
            budget = s.max_features.min(n_features);
        }
        let mut best: Option<(f64, usize)> = None;
        for (k, &f) in order.iter().enumerate() {
            // A forest node looks at `budget` features, and keeps drawing
            // only while none of them gives a valid split.
            if k >= budget && best.is_some() {
                break;
            }
            if let Score::Better(s) = self.score(idx, f, parent_sse) {
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, f));
                }
            }
        }
        best.map(|(_, f)| f)
    }

    pub(crate) fn build(&mut self, idx: &[usize], depth: usize) -> Node {
        let leaf = self.make_leaf(idx);
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_samples_leaf || self.is_pure(idx) {
            return Node::Leaf(leaf);
        }
        match self.best_split(idx) {
            None => Node::Leaf(leaf),
            Some(feature) => {
                let (zero, one): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.features.row(i)[feature] == 0.0);
                Node::Split {
                    feature,
                    zero: Box::new(self.build(&zero, depth + 1)),
                    one: Box::new(self.build(&one, depth + 1)),
                }
            }
        }
    }

    /// Root index list; regression rows are ordered by target value.
    pub(crate) fn root_indices(&self, idx: Vec<usize>) -> Vec<usize> {
        let mut idx = idx;
        if let Target::Regression(t) = self.target {
            idx.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
        }
        idx
    }
}

fn leaf_errors(leaf: &Leaf) -> f64 {
    let n = leaf.n as f64;
    n - leaf.counts.iter().cloned().fold(0.0, f64::max)
}

/// Estimated errors of a subtree under the pessimistic bound.
fn estimated_errors(node: &Node, cf: f64) -> f64 {
    match node {
        Node::Leaf(l) => {
            let e = leaf_errors(l);
            e + added_errors(l.n as f64, e, cf)
        }
        Node::Split { zero, one, .. } => estimated_errors(zero, cf) + estimated_errors(one, cf),
    }
}

fn collapse(node: &Node) -> Leaf {
    match node {
        Node::Leaf(l) => l.clone(),
        Node::Split { zero, one, .. } => {
            let (a, b) = (collapse(zero), collapse(one));
            let mut counts = a.counts;
            for k in 0..4 {
                counts[k] += b.counts[k];
            }
            Leaf { value: 0.0, counts, n: a.n + b.n }
        }
    }
}

/// Bottom-up subtree replacement: a subtree becomes a leaf when the leaf's
/// pessimistic error is no worse than the subtree's (plus C4.5's 0.1 slack).
pub fn prune(node: Node, cf: f64) -> Node {
    match node {
        Node::Leaf(_) => node,
        Node::Split { feature, zero, one } => {
            let node = Node::Split { feature, zero: Box::new(prune(*zero, cf)), one: Box::new(prune(*one, cf)) };
            let leaf = collapse(&node);
            let as_leaf = leaf_errors(&leaf) + added_errors(leaf.n as f64, leaf_errors(&leaf), cf);
            if as_leaf <= estimated_errors(&node, cf) + 0.1 {
                Node::Leaf(leaf)
            } else {
                node
            }
        }
    }
}

impl DecisionTree {
    pub fn fit_spec(spec: &AlgorithmSpec, data: &TrainingSet) -> Result<Self, LearnError> {
        Ok(Self::fit(data, TreeParams::from_spec(spec)?, None, None))
    }

    /// Grows a tree on `rows` (all rows when None). Pruning applies to
    /// classification trees only.
    pub fn fit(data: &TrainingSet, params: TreeParams, rows: Option<Vec<usize>>, sampler: Option<FeatureSampler<'_>>) -> Self {
        let mut builder = Builder::new(data, params, sampler);
        let idx = builder.root_indices(rows.unwrap_or_else(|| (0..data.n_rows()).collect()));
        let mut root = builder.build(&idx, 0);
        if params.prune && matches!(data.target, Target::Classification(_)) {
            root = prune(root, params.confidence);
        }
        DecisionTree { root }
    }

    pub fn predict_value(&self, row: &[f64]) -> f64 {
        self.root.leaf_for(row).value
    }

    /// Class frequencies at the leaf reached by `row`.
    pub fn predict_scores(&self, row: &[f64]) -> [f64; 4] {
        let l = self.root.leaf_for(row);
        l.counts.map(|c| c / l.n as f64)
    }

    pub fn predict_label(&self, row: &[f64]) -> crate::dataset::Style {
        argmax4(&self.predict_scores(row))
    }
}
