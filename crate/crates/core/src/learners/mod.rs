//! The five learners, each usable as a regressor (one real target) or as a
//! four-class classifier over [`Style`] labels.
//!
//! [`fit`] dispatches on [`AlgorithmSpec::kind`]; the returned
//! [`TrainedModel`] is immutable, `Send + Sync`, and serializes to a
//! versioned JSON document whose round trip preserves predictions exactly.

pub mod forest;
pub mod knn;
pub mod mlp;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{argmax4, Style};

/// Current version of the serialized model document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("feature row has width {got}, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("model was trained for {trained:?}, not {requested:?}")]
    ModeMismatch { trained: Mode, requested: Mode },
    #[error("feature values must be 0 or 1 (row {row}, column {col})")]
    NonBinaryFeature { row: usize, col: usize },
    #[error("regression target {value} at row {row} is outside [0, 1]")]
    TargetOutOfRange { row: usize, value: f64 },
    #[error("targets have {targets} rows but features have {rows}")]
    TargetLength { rows: usize, targets: usize },
    #[error("unknown hyperparameter {name:?} for {kind}")]
    UnknownHyperparameter { kind: AlgorithmKind, name: String },
    #[error("invalid value {value} for hyperparameter {name:?}")]
    InvalidHyperparameter { name: String, value: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("model document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmKind {
    #[serde(rename = "knn")]
    Knn,
    #[serde(rename = "svm_rbf")]
    SvmRbf,
    #[serde(rename = "decision_tree")]
    DecisionTree,
    #[serde(rename = "random_forest")]
    RandomForest,
    #[serde(rename = "mlp")]
    Mlp,
}

impl AlgorithmKind {
    /// Report order: NN, SVM, DT, RF, kNN.
    pub const ALL: [AlgorithmKind; 5] = [
        AlgorithmKind::Mlp,
        AlgorithmKind::SvmRbf,
        AlgorithmKind::DecisionTree,
        AlgorithmKind::RandomForest,
        AlgorithmKind::Knn,
    ];

    /// Short display name used in report tables.
    pub fn short_name(self) -> &'static str {
        match self {
            AlgorithmKind::Knn => "kNN",
            AlgorithmKind::SvmRbf => "SVM",
            AlgorithmKind::DecisionTree => "DT",
            AlgorithmKind::RandomForest => "RF",
            AlgorithmKind::Mlp => "NN",
        }
    }

    /// Hyperparameter names accepted by this algorithm.
    pub fn hyperparameter_names(self) -> &'static [&'static str] {
        match self {
            AlgorithmKind::Knn => knn::KnnParams::NAMES,
            AlgorithmKind::SvmRbf => svm::SvmParams::NAMES,
            AlgorithmKind::DecisionTree => tree::TreeParams::NAMES,
            AlgorithmKind::RandomForest => forest::ForestParams::NAMES,
            AlgorithmKind::Mlp => mlp::MlpParams::NAMES,
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(AlgorithmKind::Knn),
            "svm" | "svm_rbf" => Ok(AlgorithmKind::SvmRbf),
            "dt" | "tree" | "decision_tree" | "c45" => Ok(AlgorithmKind::DecisionTree),
            "rf" | "forest" | "random_forest" => Ok(AlgorithmKind::RandomForest),
            "nn" | "mlp" => Ok(AlgorithmKind::Mlp),
            other => Err(format!("unknown algorithm {other:?} (expected knn, svm, dt, rf or nn)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    /// Overrides of the per-algorithm defaults, by name.
    pub hyperparameters: BTreeMap<String, f64>,
    /// Used by the random forest and the MLP.
    pub seed: u64,
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind) -> Self {
        AlgorithmSpec { kind, hyperparameters: BTreeMap::new(), seed: 0 }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.hyperparameters.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let names = self.kind.hyperparameter_names();
        for (name, &value) in &self.hyperparameters {
            if !names.contains(&name.as_str()) {
                return Err(LearnError::UnknownHyperparameter { kind: self.kind, name: name.clone() });
            }
            if !value.is_finite() {
                return Err(LearnError::InvalidHyperparameter { name: name.clone(), value });
            }
        }
        Ok(())
    }

    pub(crate) fn get(&self, name: &str) -> Option<f64> {
        self.hyperparameters.get(name).copied()
    }

    pub(crate) fn real(&self, name: &str, default: f64, valid: impl Fn(f64) -> bool) -> Result<f64, LearnError> {
        let v = self.get(name).unwrap_or(default);
        if valid(v) {
            Ok(v)
        } else {
            Err(LearnError::InvalidHyperparameter { name: name.into(), value: v })
        }
    }

    pub(crate) fn count(&self, name: &str, default: usize, min: usize) -> Result<usize, LearnError> {
        match self.get(name) {
            None => Ok(default),
            Some(v) if v.fract() == 0.0 && v >= min as f64 && v <= u32::MAX as f64 => Ok(v as usize),
            Some(v) => Err(LearnError::InvalidHyperparameter { name: name.into(), value: v }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Regression,
    Classification,
}

/// Dense row-major matrix of binary features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LearnError> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(LearnError::WidthMismatch { expected: n_cols, got: r.len() });
            }
            for (j, &x) in r.iter().enumerate() {
                if x != 0.0 && x != 1.0 {
                    return Err(LearnError::NonBinaryFeature { row: i, col: j });
                }
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix { n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        if self.n_cols == 0 {
            0
        } else {
            self.data.len() / self.n_cols
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1))
    }

    /// New matrix holding `indices` rows (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix { n_cols: self.n_cols, data }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Regression(Vec<f64>),
    Classification(Vec<Style>),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Regression(v) => v.len(),
            Target::Classification(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> Mode {
        match self {
            Target::Regression(_) => Mode::Regression,
            Target::Classification(_) => Mode::Classification,
        }
    }

    pub fn select(&self, indices: &[usize]) -> Target {
        match self {
            Target::Regression(v) => Target::Regression(indices.iter().map(|&i| v[i]).collect()),
            Target::Classification(v) => Target::Classification(indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub features: FeatureMatrix,
    pub target: Target,
}

impl TrainingSet {
    pub fn new(features: FeatureMatrix, target: Target) -> Result<Self, LearnError> {
        let n = features.n_rows();
        if target.len() != n {
            return Err(LearnError::TargetLength { rows: n, targets: target.len() });
        }
        if n < 2 {
            return Err(LearnError::TooFewRows(n));
        }
        if let Target::Regression(t) = &target {
            if let Some((row, &value)) = t.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(LearnError::TargetOutOfRange { row, value });
            }
        }
        Ok(TrainingSet { features, target })
    }

    pub fn regression<R: AsRef<[f64]>>(rows: &[R], targets: Vec<f64>) -> Result<Self, LearnError> {
        Self::new(FeatureMatrix::from_rows(rows)?, Target::Regression(targets))
    }

    pub fn classification<R: AsRef<[f64]>>(rows: &[R], labels: Vec<Style>) -> Result<Self, LearnError> {
        Self::new(FeatureMatrix::from_rows(rows)?, Target::Classification(labels))
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn select(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet { features: self.features.select(indices), target: self.target.select(indices) }
    }
}

/// Output of a learner that ignores its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstantModel {
    Value(f64),
    Label(Style),
}

/// Fitted state, one variant per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedParams {
    Knn(knn::KnnModel),
    Svm(svm::SvmModel),
    Tree(tree::DecisionTree),
    Forest(forest::RandomForest),
    Mlp(mlp::MlpModel),
    Constant(ConstantModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: AlgorithmSpec,
    pub mode: Mode,
    pub n_features: usize,
    /// False when an iterative solver hit its iteration cap.
    pub converged: bool,
    pub params: FittedParams,
}

pub(crate) fn one_hot(label: Style) -> [f64; 4] {
    let mut s = [0.0; 4];
    s[label.index()] = 1.0;
    s
}

/// The label shared by every row, if any.
pub(crate) fn constant_label(labels: &[Style]) -> Option<Style> {
    let first = *labels.first()?;
    labels.iter().all(|&l| l == first).then_some(first)
}

pub(crate) fn constant_value(values: &[f64]) -> Option<f64> {
    let first = *values.first()?;
    values.iter().all(|&v| v == first).then_some(first)
}

/// Trains `spec` on `data`. Deterministic in (spec, data, mode).
pub fn fit(spec: &AlgorithmSpec, data: &TrainingSet, mode: Mode) -> Result<TrainedModel, LearnError> {
    spec.validate()?;
    if data.target.mode() != mode {
        return Err(LearnError::ModeMismatch { trained: data.target.mode(), requested: mode });
    }
    if data.n_rows() < 2 {
        return Err(LearnError::TooFewRows(data.n_rows()));
    }
    let (params, converged) = match spec.kind {
        AlgorithmKind::Knn => (FittedParams::Knn(knn::KnnModel::fit(spec, data)?), true),
        AlgorithmKind::SvmRbf => {
            let (m, ok) = svm::SvmModel::fit(spec, data)?;
            (m.map_or_else(|c| FittedParams::Constant(c), FittedParams::Svm), ok)
        }
        AlgorithmKind::DecisionTree => (FittedParams::Tree(tree::DecisionTree::fit_spec(spec, data)?), true),
        AlgorithmKind::RandomForest => (FittedParams::Forest(forest::RandomForest::fit_spec(spec, data)?), true),
        AlgorithmKind::Mlp => {
            let (m, ok) = mlp::MlpModel::fit(spec, data)?;
            (m.map_or_else(|c| FittedParams::Constant(c), FittedParams::Mlp), ok)
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        mode,
        n_features: data.features.n_cols(),
        converged,
        params,
    })
}

impl TrainedModel {
    fn check(&self, row: &[f64], mode: Mode) -> Result<(), LearnError> {
        if self.mode != mode {
            return Err(LearnError::ModeMismatch { trained: self.mode, requested: mode });
        }
        if row.len() != self.n_features {
            return Err(LearnError::WidthMismatch { expected: self.n_features, got: row.len() });
        }
        Ok(())
    }

    /// Raw regression output (not clamped).
    pub fn predict_regression(&self, row: &[f64]) -> Result<f64, LearnError> {
        self.check(row, Mode::Regression)?;
        Ok(match &self.params {
            FittedParams::Knn(m) => m.predict_value(row),
            FittedParams::Svm(m) => m.predict_value(row),
            FittedParams::Tree(m) => m.predict_value(row),
            FittedParams::Forest(m) => m.predict_value(row),
            FittedParams::Mlp(m) => m.predict_value(row),
            FittedParams::Constant(ConstantModel::Value(v)) => *v,
            FittedParams::Constant(ConstantModel::Label(_)) => {
                return Err(LearnError::Format("constant label model used for regression".into()))
            }
        })
    }

    /// Predicted label and per-class scores (⟨A, V, K, R⟩ order). The label
    /// is the first maximal score.
    pub fn predict_classification(&self, row: &[f64]) -> Result<(Style, [f64; 4]), LearnError> {
        self.check(row, Mode::Classification)?;
        let scores = match &self.params {
            FittedParams::Knn(m) => m.predict_scores(row),
            FittedParams::Svm(m) => m.predict_scores(row),
            FittedParams::Tree(m) => m.predict_scores(row),
            FittedParams::Forest(m) => m.predict_scores(row),
            FittedParams::Mlp(m) => m.predict_scores(row),
            FittedParams::Constant(ConstantModel::Label(l)) => one_hot(*l),
            FittedParams::Constant(ConstantModel::Value(_)) => {
                return Err(LearnError::Format("constant value model used for classification".into()))
            }
        };
        Ok((argmax4(&scores), scores))
    }

    pub fn to_json(&self) -> Result<String, LearnError> {
        serde_json::to_string(self).map_err(|e| LearnError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let model: TrainedModel = serde_json::from_str(text).map_err(|e| LearnError::Format(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::Format(format!("unsupported format version {}", model.format_version)));
        }
        Ok(model)
    }
}
