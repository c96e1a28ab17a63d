//! Random forest of unpruned trees.
//!
//! Tree `b` is grown on a bootstrap sample of size n drawn from the
//! substream `(seed, b)`, and looks at a random subset of `max_features`
//! features at each node. Because every tree owns its stream, the parallel
//! build equals the sequential one.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, FeatureSampler, TreeParams};
use super::{AlgorithmSpec, LearnError, TrainingSet};
use crate::par::{map_indexed, Execution};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub max_depth: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        // ceil(√16) features per node
        ForestParams { n_trees: 100, max_features: 4, min_samples_leaf: 2, max_depth: 16 }
    }
}

impl ForestParams {
    pub const NAMES: &'static [&'static str] = &["n_trees", "max_features", "min_samples_leaf", "max_depth"];

    pub fn from_spec(spec: &AlgorithmSpec) -> Result<Self, LearnError> {
        let d = ForestParams::default();
        Ok(ForestParams {
            n_trees: spec.count("n_trees", d.n_trees, 1)?,
            max_features: spec.count("max_features", d.max_features, 1)?,
            min_samples_leaf: spec.count("min_samples_leaf", d.min_samples_leaf, 1)?,
            max_depth: spec.count("max_depth", d.max_depth, 0)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Sequential build, as used inside cross-validation jobs.
    pub fn fit_spec(spec: &AlgorithmSpec, data: &TrainingSet) -> Result<Self, LearnError> {
        Self::fit_with(spec, data, Execution::Sequential)
    }

    pub fn fit_with(spec: &AlgorithmSpec, data: &TrainingSet, exec: Execution) -> Result<Self, LearnError> {
        let p = ForestParams::from_spec(spec)?;
        let tree_params =
            TreeParams { min_samples_leaf: p.min_samples_leaf, max_depth: p.max_depth, prune: false, ..TreeParams::default() };
        let n = data.n_rows();
        let trees = map_indexed(exec, p.n_trees, |b| {
            let mut rng = substream(spec.seed, &[b as u64]);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sampler = FeatureSampler { rng: &mut rng, max_features: p.max_features };
            DecisionTree::fit(data, tree_params, Some(rows), Some(sampler))
        });
        Ok(RandomForest { trees })
    }

    /// Per-tree regression outputs, in tree order.
    pub fn tree_values(&self, row: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_value(row)).collect()
    }

    pub fn predict_value(&self, row: &[f64]) -> f64 {
        self.tree_values(row).iter().sum::<f64>() / self.trees.len() as f64
    }

    /// Fraction of trees voting for each class.
    pub fn predict_scores(&self, row: &[f64]) -> [f64; 4] {
        let mut votes = [0.0; 4];
        for t in &self.trees {
            votes[t.predict_label(row).index()] += 1.0;
        }
        votes.map(|v| v / self.trees.len() as f64)
    }
}
