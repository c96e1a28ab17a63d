//! Regression errors, one-vs-rest confusion metrics and ROC/AUC.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Style;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty sample")]
    EmptySample,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("class {0} has only positive or only negative examples")]
    SingleClassSample(Style),
}

/// One (actual, predicted) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub actual: f64,
    pub predicted: f64,
}

impl ErrorSample {
    pub fn new(actual: f64, predicted: f64) -> Self {
        ErrorSample { actual, predicted }
    }

    pub fn abs_error(&self) -> f64 {
        (self.actual - self.predicted).abs()
    }
}

fn abs_errors(samples: &[ErrorSample]) -> Result<Vec<f64>, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::EmptySample);
    }
    if samples.iter().any(|s| !s.actual.is_finite() || !s.predicted.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(samples.iter().map(ErrorSample::abs_error).collect())
}

pub fn mae(samples: &[ErrorSample]) -> Result<f64, MetricError> {
    let e = abs_errors(samples)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Median absolute error; an even count averages the two middle values.
pub fn mdae(samples: &[ErrorSample]) -> Result<f64, MetricError> {
    let e = abs_errors(samples)?;
    Ok(median(e))
}

pub fn rmse(samples: &[ErrorSample]) -> Result<f64, MetricError> {
    let e = abs_errors(samples)?;
    Ok((e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt())
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// MAE, MdAE and RMSE together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mae: f64,
    pub mdae: f64,
    pub rmse: f64,
}

pub fn error_summary(samples: &[ErrorSample]) -> Result<ErrorSummary, MetricError> {
    Ok(ErrorSummary { mae: mae(samples)?, mdae: mdae(samples)?, rmse: rmse(samples)? })
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Per-class one-vs-rest counts, ⟨A, V, K, R⟩ order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_class: [ClassCounts; 4],
    pub n: usize,
}

pub fn confusion(actual: &[Style], predicted: &[Style]) -> Result<ConfusionCounts, MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(MetricError::EmptySample);
    }
    let mut per_class = [ClassCounts::default(); 4];
    for (&a, &p) in actual.iter().zip(predicted) {
        for c in Style::ALL {
            let counts = &mut per_class[c.index()];
            match (a == c, p == c) {
                (true, true) => counts.tp += 1,
                (false, false) => counts.tn += 1,
                (false, true) => counts.fp += 1,
                (true, false) => counts.fn_ += 1,
            }
        }
    }
    Ok(ConfusionCounts { per_class, n: actual.len() })
}

/// A ratio whose denominator may be zero; 0/0 is reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

impl Ratio {
    fn of(num: f64, den: f64) -> Ratio {
        if den == 0.0 {
            Ratio { value: 0.0, undefined: true }
        } else {
            Ratio { value: num / den, undefined: false }
        }
    }
}

pub fn recall(c: &ClassCounts) -> Ratio {
    Ratio::of(c.tp as f64, (c.tp + c.fn_) as f64)
}

pub fn precision(c: &ClassCounts) -> Ratio {
    Ratio::of(c.tp as f64, (c.tp + c.fp) as f64)
}

pub fn f1(c: &ClassCounts) -> Ratio {
    let (p, r) = (precision(c), recall(c));
    let f = Ratio::of(2.0 * r.value * p.value, r.value + p.value);
    Ratio { value: f.value, undefined: f.undefined || p.undefined || r.undefined }
}

pub fn accuracy(c: &ClassCounts) -> Ratio {
    Ratio::of((c.tp + c.tn) as f64, c.total() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub recall: Ratio,
    pub precision: Ratio,
    pub f1: Ratio,
    pub accuracy: Ratio,
}

/// Per-class values plus unweighted class means. `fraction_correct` is the
/// plain share of matching labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub per_class: [ClassMetrics; 4],
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    pub macro_accuracy: f64,
    pub fraction_correct: f64,
    pub any_undefined: bool,
}

pub fn classification_metrics(counts: &ConfusionCounts) -> ClassificationMetrics {
    let per_class = counts.per_class.map(|c| ClassMetrics {
        recall: recall(&c),
        precision: precision(&c),
        f1: f1(&c),
        accuracy: accuracy(&c),
    });
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 4.0;
    let correct: usize = counts.per_class.iter().map(|c| c.tp).sum();
    ClassificationMetrics {
        per_class,
        macro_recall: mean(|m| m.recall.value),
        macro_precision: mean(|m| m.precision.value),
        macro_f1: mean(|m| m.f1.value),
        macro_accuracy: mean(|m| m.accuracy.value),
        fraction_correct: correct as f64 / counts.n as f64,
        any_undefined: per_class
            .iter()
            .any(|m| m.recall.undefined || m.precision.undefined || m.f1.undefined),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Binary ROC curve: one point per distinct score threshold, tied scores
/// move both rates at once (a diagonal segment), area by trapezoids.
pub fn roc_curve(positive: &[bool], scores: &[f64]) -> Result<RocCurve, MetricError> {
    if positive.len() != scores.len() {
        return Err(MetricError::LengthMismatch(positive.len(), scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::EmptySample);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area2 = 0.0; // twice the area, in units of (1/n_neg)·(1/n_pos)
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as f64;
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    let auc = area2 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, auc })
}

/// One-vs-rest ROC for `class`, ranking by that class's score column.
pub fn roc_auc(actual: &[Style], scores: &[[f64; 4]], class: Style) -> Result<RocCurve, MetricError> {
    let positive: Vec<bool> = actual.iter().map(|&a| a == class).collect();
    let col: Vec<f64> = scores.iter().map(|s| s[class.index()]).collect();
    roc_curve(&positive, &col).map_err(|e| match e {
        MetricError::EmptySample if !actual.is_empty() => MetricError::SingleClassSample(class),
        other => other,
    })
}
