//! k-nearest neighbours with Euclidean distance.
//!
//! `k` defaults to round(√n) (at least 1, at most n). Neighbours at equal
//! distance are ordered by training index, so the k-th place tie goes to the
//! earlier row.

use serde::{Deserialize, Serialize};

use super::{AlgorithmSpec, FeatureMatrix, LearnError, Target, TrainingSet};
use crate::dataset::Style;

pub struct KnnParams {
    pub k: Option<usize>,
}

impl KnnParams {
    pub const NAMES: &'static [&'static str] = &["k"];

    pub fn from_spec(spec: &AlgorithmSpec) -> Result<Self, LearnError> {
        Ok(KnnParams { k: spec.get("k").map(|_| spec.count("k", 1, 1)).transpose()? })
    }
}

/// round(√n), at least 1.
pub fn default_k(n_train: usize) -> usize {
    ((n_train as f64).sqrt().round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub features: FeatureMatrix,
    pub target: Target,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl KnnModel {
    pub fn fit(spec: &AlgorithmSpec, data: &TrainingSet) -> Result<Self, LearnError> {
        let n = data.n_rows();
        let k = KnnParams::from_spec(spec)?.k.unwrap_or_else(|| default_k(n)).min(n);
        Ok(KnnModel { k, features: data.features.clone(), target: data.target.clone() })
    }

    /// Indices of the k nearest training rows, nearest first.
    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        // Bounded insertion list ordered by (distance, index).
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, train) in self.features.rows().enumerate() {
            let d = euclidean(train, row);
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(self.k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_value(&self, row: &[f64]) -> f64 {
        let Target::Regression(t) = &self.target else { return f64::NAN };
        let nn = self.neighbors(row);
        nn.iter().map(|&i| t[i]).sum::<f64>() / nn.len() as f64
    }

    /// Vote fractions per class.
    pub fn predict_scores(&self, row: &[f64]) -> [f64; 4] {
        let Target::Classification(labels) = &self.target else { return [f64::NAN; 4] };
        let nn = self.neighbors(row);
        let mut votes = [0usize; 4];
        for &i in &nn {
            votes[labels[i].index()] += 1;
        }
        votes.map(|v| v as f64 / nn.len() as f64)
    }

    pub fn vote_label(&self, row: &[f64]) -> Style {
        crate::dataset::argmax4(&self.predict_scores(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, AlgorithmKind, Mode};

    #[test]
    fn k_rule() {
        assert_eq!(default_k(72), 8);
        assert_eq!(default_k(71), 8);
        assert_eq!(default_k(1), 1);
        assert_eq!(default_k(2), 1);
        assert_eq!(default_k(3), 2);
    }

    #[test]
    fn stored_k_for_72_rows() {
        let rows = crate::learners::tests::random_rows(1, 72, 16);
        let data = TrainingSet::regression(&rows, vec![0.5; 72]).unwrap();
        let m = KnnModel::fit(&AlgorithmSpec::new(AlgorithmKind::Knn), &data).unwrap();
        assert_eq!(m.k, 8);
    }

    #[test]
    fn one_nearest_returns_its_target() {
        let rows = vec![vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]];
        let data = TrainingSet::regression(&rows, vec![0.36, 0.1, 0.9]).unwrap();
        let spec = AlgorithmSpec::new(AlgorithmKind::Knn).with("k", 1.0);
        let m = fit(&spec, &data, Mode::Regression).unwrap();
        assert_eq!(m.predict_regression(&[1.0, 0.0, 1.0]).unwrap(), 0.36);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let data = TrainingSet::regression(&rows, vec![0.2, 0.8, 0.5]).unwrap();
        let m = KnnModel::fit(&AlgorithmSpec::new(AlgorithmKind::Knn).with("k", 1.0), &data).unwrap();
        // rows 0 and 1 are both at distance 1 from the origin
        assert_eq!(m.neighbors(&[0.0, 0.0]), vec![0]);
    }

    #[test]
    fn unanimous_vote() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]];
        let data = TrainingSet::classification(&rows, vec![Style::V, Style::V, Style::V, Style::A]).unwrap();
        let spec = AlgorithmSpec::new(AlgorithmKind::Knn).with("k", 3.0);
        let m = fit(&spec, &data, Mode::Classification).unwrap();
        let (label, scores) = m.predict_classification(&[0.0, 1.0]).unwrap();
        assert_eq!(label, Style::V);
        assert_eq!(scores, [0.0, 1.0, 0.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn matches_brute_force_scan(seed in 0u64..500, n in 2usize..40, k in 1usize..10) {
            let rows = crate::learners::tests::random_rows(seed, n, 6);
            let t: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
            let data = TrainingSet::regression(&rows, t).unwrap();
            let m = KnnModel::fit(&AlgorithmSpec::new(AlgorithmKind::Knn).with("k", k as f64), &data).unwrap();
            for q in crate::learners::tests::random_rows(seed + 1000, 5, 6) {
                let mut all: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (euclidean(r, &q), i)).collect();
                all.sort_by(|a, b| a.0.total_cmp(&b.0));
                let expected: Vec<usize> = all.iter().take(k.min(n)).map(|&(_, i)| i).collect();
                proptest::prop_assert_eq!(m.neighbors(&q), expected);
            }
        }
    }
}
