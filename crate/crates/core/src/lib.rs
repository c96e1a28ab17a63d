//! Learning-style prediction from VARK questionnaire responses.
//!
//! The crate covers the whole pipeline:
//!
//! * [`dataset`]: parse, validate and synthesize 16-question VARK responses,
//!   derive style probabilities and dominant labels, and split them into the
//!   four per-style binary matrices.
//! * [`learners`]: k-nearest neighbours, RBF support vector machines (SMO),
//!   C4.5 decision trees, random forests and a backpropagation MLP, each usable
//!   as a regressor or a four-class classifier.
//! * [`metrics`]: MAE, MdAE, RMSE, one-vs-rest confusion metrics and ROC/AUC.
//! * [`stats`]: Wilcoxon signed-rank test, t intervals and box-plot summaries.
//! * [`selection`]: threshold nomination of favoured styles.
//! * [`experiment`]: cross-validated regression and classification runs,
//!   model comparison tables and descriptive statistics.
//! * [`report`]: JSON, CSV and SVG rendering of experiment reports.
//!
//! With the default `parallel` feature, cross-validation jobs and forest
//! construction can run on the rayon thread pool. Results never depend on
//! scheduling: every random stream is derived from a seed and a job index.

pub mod dataset;
pub mod experiment;
pub mod learners;
pub mod metrics;
pub mod par;
pub mod report;
pub mod rng;
pub mod selection;
pub mod stats;

pub use dataset::{ResponseVector, StudentRecord, Style, StyleMatrix, StyleProbabilities};
pub use par::Execution;
