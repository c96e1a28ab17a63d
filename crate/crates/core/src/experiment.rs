//! Cross-validated regression and classification runs over the four style
//! matrices, the pairwise Wilcoxon table and descriptive statistics.
//!
//! Every training job (fold × model × matrix × target) is independent and
//! seeded from its own path, so results do not depend on scheduling. Jobs
//! run through [`crate::par`] and are reassembled in canonical order.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{build_style_matrices, DatasetError, StudentRecord, Style, StyleMatrix, QUESTIONS};
use crate::learners::{fit, AlgorithmKind, AlgorithmSpec, FeatureMatrix, LearnError, Mode, Target, TrainingSet};
use crate::metrics::{
    classification_metrics, confusion, error_summary, roc_auc, ClassificationMetrics, ConfusionCounts, ErrorSample,
    ErrorSummary, MetricError, RocCurve,
};
use crate::par::{try_map_indexed, Execution};
use crate::rng::{derive_seed, substream};
use crate::stats::{boxplot_stats, interval_summary, wilcoxon_signed_rank, BoxplotStats, IntervalSummary, PMethod, StatsError};

/// Smallest cohort accepted by the cross-validation runs.
pub const MIN_RECORDS: usize = 10;

/// Column labels of the regression and comparison tables.
pub const COLUMNS: [&str; 5] = ["A", "V", "K", "R", "All"];

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("need at least {min} records, got {got}")]
    TooFewRecords { got: usize, min: usize },
    #[error("invalid cross-validation setup: {0}")]
    InvalidCv(String),
    #[error("no algorithms selected")]
    NoModels,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{model} on matrix {matrix}{}, fold {fold}: {source}", target.map(|t| format!(" target {t}")).unwrap_or_default())]
    Learn { model: AlgorithmKind, matrix: Style, target: Option<Style>, fold: usize, source: LearnError },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvScheme {
    Loocv,
    KFold(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub scheme: CvScheme,
    /// Balance labels across folds (classification runs only).
    pub stratified: bool,
    pub seed: u64,
}

impl CvConfig {
    pub fn loocv(seed: u64) -> Self {
        CvConfig { scheme: CvScheme::Loocv, stratified: false, seed }
    }

    pub fn kfold(k: usize, stratified: bool, seed: u64) -> Self {
        CvConfig { scheme: CvScheme::KFold(k), stratified, seed }
    }

    /// Human-readable protocol name, e.g. `LOOCV` or `10-fold stratified`.
    pub fn describe(&self) -> String {
        match self.scheme {
            CvScheme::Loocv => "LOOCV".into(),
            CvScheme::KFold(k) if self.stratified => format!("{k}-fold stratified"),
            CvScheme::KFold(k) => format!("{k}-fold"),
        }
    }

    /// Held-out indices of each fold, ascending within a fold. `labels`
    /// drives stratification when requested.
    pub fn folds(&self, n: usize, labels: Option<&[Style]>) -> Result<Vec<Vec<usize>>, ExperimentError> {
        let k = match self.scheme {
            CvScheme::Loocv => return Ok((0..n).map(|i| vec![i]).collect()),
            CvScheme::KFold(k) => k,
        };
        if k < 2 || k > n {
            return Err(ExperimentError::InvalidCv(format!("k = {k} must lie in [2, {n}]")));
        }
        let mut rng = substream(self.seed, &[u64::MAX]);
        let mut folds = vec![Vec::new(); k];
        match labels.filter(|_| self.stratified) {
            Some(labels) => {
                // deal each class round-robin, continuing the count across classes
                let mut next = 0;
                for s in Style::ALL {
                    let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == s).collect();
                    members.shuffle(&mut rng);
                    for i in members {
                        folds[next % k].push(i);
                        next += 1;
                    }
                }
            }
            None => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                for (j, i) in order.into_iter().enumerate() {
                    folds[j * k / n].push(i);
                }
            }
        }
        for f in &mut folds {
            f.sort_unstable();
        }
        Ok(folds)
    }
}

fn complement(n: usize, held_out: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in held_out {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

fn feature_matrix(m: &StyleMatrix) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = (0..m.n_rows()).map(|i| m.row_f64(i)).collect();
    FeatureMatrix::from_rows(&rows).expect("style matrices are binary")
}

fn check_inputs(records: &[StudentRecord], specs: &[AlgorithmSpec]) -> Result<(), ExperimentError> {
    if records.len() < MIN_RECORDS {
        return Err(ExperimentError::TooFewRecords { got: records.len(), min: MIN_RECORDS });
    }
    if specs.is_empty() {
        return Err(ExperimentError::NoModels);
    }
    for spec in specs {
        spec.validate().map_err(|source| ExperimentError::Learn {
            model: spec.kind,
            matrix: Style::A,
            target: None,
            fold: 0,
            source,
        })?;
    }
    Ok(())
}

/// Seed of one training job.
pub fn job_seed(cv_seed: u64, spec_seed: u64, fold: usize, model: usize, matrix: usize, target: usize) -> u64 {
    derive_seed(cv_seed, &[spec_seed, fold as u64, model as u64, matrix as u64, target as u64])
}

/// Error summaries for the four styles and the pooled "All" column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleErrors {
    pub per_style: [ErrorSummary; 4],
    pub all: ErrorSummary,
}

impl StyleErrors {
    fn from_predictions(actual: &[Vec<f64>; 4], predicted: &[Vec<f64>; 4]) -> Result<Self, ExperimentError> {
        let samples: Vec<Vec<ErrorSample>> = (0..4)
            .map(|s| actual[s].iter().zip(&predicted[s]).map(|(&a, &p)| ErrorSample::new(a, p)).collect())
            .collect();
        let per_style = [
            error_summary(&samples[0])?,
            error_summary(&samples[1])?,
            error_summary(&samples[2])?,
            error_summary(&samples[3])?,
        ];
        let pooled: Vec<ErrorSample> = samples.concat();
        Ok(StyleErrors { per_style, all: error_summary(&pooled)? })
    }

    /// Cell for column `c` of [`COLUMNS`].
    pub fn column(&self, c: usize) -> &ErrorSummary {
        if c < 4 {
            &self.per_style[c]
        } else {
            &self.all
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRegression {
    pub kind: AlgorithmKind,
    pub spec: AlgorithmSpec,
    pub errors: StyleErrors,
    /// |actual − aggregated prediction| per style, indexed by student.
    pub residuals: [Vec<f64>; 4],
    /// 95% intervals of the absolute residuals, per style then "All".
    pub intervals: [IntervalSummary; 5],
    /// Held-out predictions, `[matrix][target][student]`.
    pub per_matrix: [[Vec<f64>; 4]; 4],
    /// Mean of the four matrices' predictions, `[target][student]`.
    pub aggregated: [Vec<f64>; 4],
    /// Fits that stopped at their iteration cap.
    pub non_converged: usize,
}

impl ModelRegression {
    /// Residuals of the "All" column: the four styles concatenated.
    pub fn all_residuals(&self) -> Vec<f64> {
        self.residuals.concat()
    }

    /// Residual vector for column `c` of [`COLUMNS`].
    pub fn column_residuals(&self, c: usize) -> Vec<f64> {
        if c < 4 {
            self.residuals[c].clone()
        } else {
            self.all_residuals()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub protocol: String,
    pub cv: CvConfig,
    pub n_students: usize,
    pub student_ids: Vec<String>,
    /// Actual probabilities, `[style][student]`.
    pub actual: [Vec<f64>; 4],
    pub models: Vec<ModelRegression>,
    /// Predicts the training-fold mean of each style.
    pub baseline: StyleErrors,
}

fn arr4<T>(mut f: impl FnMut(usize) -> T) -> [T; 4] {
    [f(0), f(1), f(2), f(3)]
}

/// Cross-validated regression: one model per (matrix, target style), the
/// per-style prediction being the mean over the four matrices.
pub fn run_regression(
    records: &[StudentRecord],
    specs: &[AlgorithmSpec],
    cv: &CvConfig,
    exec: Execution,
) -> Result<RegressionReport, ExperimentError> {
    check_inputs(records, specs)?;
    let n = records.len();
    let matrices = build_style_matrices(records)?;
    let features: Vec<FeatureMatrix> = matrices.iter().map(feature_matrix).collect();
    let actual: [Vec<f64>; 4] = arr4(|t| matrices[0].targets_for(Style::ALL[t]));
    let folds = cv.folds(n, Some(&matrices[0].labels))?;
    let trains: Vec<Vec<usize>> = folds.iter().map(|f| complement(n, f)).collect();

    let per_fold = specs.len() * 16;
    let jobs = try_map_indexed(exec, folds.len() * per_fold, |j| {
        let (fold, rest) = (j / per_fold, j % per_fold);
        let (m, x, t) = (rest / 16, rest / 4 % 4, rest % 4);
        let spec = specs[m].clone().with_seed(job_seed(cv.seed, specs[m].seed, fold, m, x, t));
        let train = &trains[fold];
        let annotate = |source| ExperimentError::Learn {
            model: spec.kind,
            matrix: Style::ALL[x],
            target: Some(Style::ALL[t]),
            fold,
            source,
        };
        let data = TrainingSet::new(
            features[x].select(train),
            Target::Regression(train.iter().map(|&i| actual[t][i]).collect()),
        )
        .map_err(annotate)?;
        let model = fit(&spec, &data, Mode::Regression).map_err(annotate)?;
        let preds = folds[fold]
            .iter()
            .map(|&i| model.predict_regression(features[x].row(i)))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(annotate)?;
        if let Some(p) = preds.iter().find(|p| !p.is_finite()) {
            return Err(annotate(LearnError::NumericalFailure(format!("prediction {p}"))));
        }
        Ok((preds, model.converged))
    })?;

    let mut models = Vec::with_capacity(specs.len());
    for (m, spec) in specs.iter().enumerate() {
        let mut per_matrix: [[Vec<f64>; 4]; 4] = arr4(|_| arr4(|_| vec![0.0; n]));
        let mut non_converged = 0;
        for (fold, held) in folds.iter().enumerate() {
            for x in 0..4 {
                for t in 0..4 {
                    let (preds, converged) = &jobs[fold * per_fold + m * 16 + x * 4 + t];
                    non_converged += usize::from(!converged);
                    for (&i, &p) in held.iter().zip(preds) {
                        per_matrix[x][t][i] = p;
                    }
                }
            }
        }
        let aggregated: [Vec<f64>; 4] =
            arr4(|t| (0..n).map(|i| (0..4).map(|x| per_matrix[x][t][i]).sum::<f64>() / 4.0).collect());
        let residuals: [Vec<f64>; 4] =
            arr4(|t| actual[t].iter().zip(&aggregated[t]).map(|(a, p)| (a - p).abs()).collect());
        let all: Vec<f64> = residuals.concat();
        let intervals = [
            interval_summary(&residuals[0])?,
            interval_summary(&residuals[1])?,
            interval_summary(&residuals[2])?,
            interval_summary(&residuals[3])?,
            interval_summary(&all)?,
        ];
        models.push(ModelRegression {
            kind: spec.kind,
            spec: spec.clone(),
            errors: StyleErrors::from_predictions(&actual, &aggregated)?,
            residuals,
            intervals,
            per_matrix,
            aggregated,
            non_converged,
        });
    }

    let mut baseline_pred: [Vec<f64>; 4] = arr4(|_| vec![0.0; n]);
    for (held, train) in folds.iter().zip(&trains) {
        for t in 0..4 {
            let mean = train.iter().map(|&i| actual[t][i]).sum::<f64>() / train.len() as f64;
            for &i in held {
                baseline_pred[t][i] = mean;
            }
        }
    }
    Ok(RegressionReport {
        protocol: cv.describe(),
        cv: *cv,
        n_students: n,
        student_ids: records.iter().map(|r| r.id.clone()).collect(),
        baseline: StyleErrors::from_predictions(&actual, &baseline_pred)?,
        actual,
        models,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClassification {
    pub kind: AlgorithmKind,
    pub spec: AlgorithmSpec,
    pub confusion: ConfusionCounts,
    pub metrics: ClassificationMetrics,
    /// One-vs-rest ROC per class; None when the class is absent or universal.
    pub roc: [Option<RocCurve>; 4],
    /// Mean of the defined per-class AUCs.
    pub macro_auc: Option<f64>,
    /// Held-out label and scores per student.
    pub predicted: Vec<Style>,
    pub scores: Vec<[f64; 4]>,
    /// Folds whose training labels were all one class.
    pub single_class_folds: usize,
    pub non_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixClassification {
    pub matrix: Style,
    pub models: Vec<ModelClassification>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub protocol: String,
    pub cv: CvConfig,
    pub n_students: usize,
    pub actual: Vec<Style>,
    /// A, V, K, R order.
    pub matrices: Vec<MatrixClassification>,
}

/// Cross-validated classification of the dominant label, separately on
/// each style matrix.
pub fn run_classification(
    records: &[StudentRecord],
    specs: &[AlgorithmSpec],
    cv: &CvConfig,
    exec: Execution,
) -> Result<ClassificationReport, ExperimentError> {
    check_inputs(records, specs)?;
    let matrices = build_style_matrices(records)?;
    let features: Vec<FeatureMatrix> = matrices.iter().map(feature_matrix).collect();
    classify_matrices(&features, &matrices[0].labels, specs, cv, exec)
}

/// Classification runs on explicit feature matrices (A, V, K, R order) and
/// labels, e.g. to test against permuted labels.
pub fn classify_matrices(
    features: &[FeatureMatrix],
    labels: &[Style],
    specs: &[AlgorithmSpec],
    cv: &CvConfig,
    exec: Execution,
) -> Result<ClassificationReport, ExperimentError> {
    let n = labels.len();
    if n < MIN_RECORDS {
        return Err(ExperimentError::TooFewRecords { got: n, min: MIN_RECORDS });
    }
    let labels = labels.to_vec();
    let folds = cv.folds(n, Some(&labels))?;
    let trains: Vec<Vec<usize>> = folds.iter().map(|f| complement(n, f)).collect();

    let n_mat = features.len();
    let per_fold = specs.len() * n_mat;
    let jobs = try_map_indexed(exec, folds.len() * per_fold, |j| {
        let (fold, m, x) = (j / per_fold, j % per_fold / n_mat, j % n_mat);
        let spec = specs[m].clone().with_seed(job_seed(cv.seed, specs[m].seed, fold, m, x, 4));
        let train = &trains[fold];
        let annotate =
            |source| ExperimentError::Learn { model: spec.kind, matrix: Style::ALL[x], target: None, fold, source };
        let train_labels: Vec<Style> = train.iter().map(|&i| labels[i]).collect();
        let single = train_labels.iter().all(|&l| l == train_labels[0]);
        let data = TrainingSet::new(features[x].select(train), Target::Classification(train_labels)).map_err(annotate)?;
        let model = fit(&spec, &data, Mode::Classification).map_err(annotate)?;
        let preds = folds[fold]
            .iter()
            .map(|&i| model.predict_classification(features[x].row(i)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(annotate)?;
        if preds.iter().any(|(_, s)| s.iter().any(|v| !v.is_finite())) {
            return Err(annotate(LearnError::NumericalFailure("non-finite class score".into())));
        }
        Ok((preds, single, model.converged))
    })?;

    let mut out = Vec::with_capacity(4);
    for x in 0..features.len() {
        let mut models = Vec::with_capacity(specs.len());
        for (m, spec) in specs.iter().enumerate() {
            let mut predicted = vec![Style::A; n];
            let mut scores = vec![[0.0; 4]; n];
            let (mut single_class_folds, mut non_converged) = (0, 0);
            for (fold, held) in folds.iter().enumerate() {
                let (preds, single, converged) = &jobs[fold * per_fold + m * n_mat + x];
                single_class_folds += usize::from(*single);
                non_converged += usize::from(!converged);
                for (&i, (label, s)) in held.iter().zip(preds) {
                    predicted[i] = *label;
                    scores[i] = *s;
                }
            }
            let counts = confusion(&labels, &predicted)?;
            let roc: [Option<RocCurve>; 4] = arr4(|c| roc_auc(&labels, &scores, Style::ALL[c]).ok());
            let defined: Vec<f64> = roc.iter().flatten().map(|r| r.auc).collect();
            models.push(ModelClassification {
                kind: spec.kind,
                spec: spec.clone(),
                metrics: classification_metrics(&counts),
                confusion: counts,
                macro_auc: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
                roc,
                predicted,
                scores,
                single_class_folds,
                non_converged,
            });
        }
        out.push(MatrixClassification { matrix: Style::ALL[x], models });
    }
    Ok(ClassificationReport { protocol: cv.describe(), cv: *cv, n_students: n, actual: labels, matrices: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    /// None when every paired difference is zero.
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
    pub method: Option<PMethod>,
    pub all_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub first: AlgorithmKind,
    pub second: AlgorithmKind,
    /// A, V, K, R, All.
    pub cells: [PairCell; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<PairRow>,
}

/// Wilcoxon signed-rank p-values of paired absolute residuals for every
/// model pair (in report order) and every column.
pub fn compare_models(report: &RegressionReport) -> Result<ComparisonTable, ExperimentError> {
    let mut rows = Vec::new();
    for (i, a) in report.models.iter().enumerate() {
        for b in &report.models[i + 1..] {
            let cell = |c: usize| -> Result<PairCell, ExperimentError> {
                match wilcoxon_signed_rank(&a.column_residuals(c), &b.column_residuals(c)) {
                    Ok(w) => Ok(PairCell {
                        p_value: Some(w.p_value),
                        statistic: Some(w.statistic),
                        method: Some(w.method),
                        all_zero: false,
                    }),
                    Err(StatsError::AllZeroDifferences) => {
                        Ok(PairCell { p_value: None, statistic: None, method: None, all_zero: true })
                    }
                    Err(e) => Err(e.into()),
                }
            };
            rows.push(PairRow { first: a.kind, second: b.kind, cells: [cell(0)?, cell(1)?, cell(2)?, cell(3)?, cell(4)?] });
        }
    }
    Ok(ComparisonTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveReport {
    pub n_students: usize,
    /// Probability distribution of each style.
    pub boxplots: [BoxplotStats; 4],
    /// Students per dominant label.
    pub label_counts: [usize; 4],
    /// Selections of each style on each question.
    pub question_counts: Vec<[usize; 4]>,
}

pub fn describe(records: &[StudentRecord]) -> Result<DescriptiveReport, ExperimentError> {
    let matrices = build_style_matrices(records)?;
    let m = &matrices[0];
    let boxplots = [
        boxplot_stats(&m.targets_for(Style::A))?,
        boxplot_stats(&m.targets_for(Style::V))?,
        boxplot_stats(&m.targets_for(Style::K))?,
        boxplot_stats(&m.targets_for(Style::R))?,
    ];
    let mut label_counts = [0; 4];
    for l in &m.labels {
        label_counts[l.index()] += 1;
    }
    let mut question_counts = vec![[0usize; 4]; QUESTIONS];
    for r in records {
        for (q, resp) in r.responses.iter().enumerate() {
            for s in Style::ALL {
                question_counts[q][s.index()] += usize::from(resp.has(s));
            }
        }
    }
    Ok(DescriptiveReport { n_students: records.len(), boxplots, label_counts, question_counts })
}

/// The five learners with default hyperparameters, in report order.
pub fn default_specs() -> Vec<AlgorithmSpec> {
    AlgorithmKind::ALL.iter().map(|&k| AlgorithmSpec::new(k)).collect()
}
