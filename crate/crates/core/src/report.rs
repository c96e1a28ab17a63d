//! Serialized outputs: canonical JSON, per-table CSV files and SVG charts.
//!
//! JSON objects are written with sorted keys and every float in fixed
//! six-decimal notation. Every output embeds the [`RunManifest`] that
//! produced it: a top-level key in JSON, `# manifest:` comment lines in CSV
//! and a `<metadata>` element in SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::dataset::{StudentRecord, Style};
use crate::experiment::{
    compare_models, describe, run_classification, run_regression, ClassificationReport, ComparisonTable, CvConfig,
    DescriptiveReport, ExperimentError, MatrixClassification, RegressionReport, COLUMNS,
};
use crate::learners::AlgorithmSpec;
use crate::par::Execution;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(String),
}

/// Provenance of one output: enough to rerun the command that made it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Every resolved flag, by long name.
    pub flags: BTreeMap<String, String>,
    /// SHA-256 of the input file, hex.
    pub input_sha256: Option<String>,
    pub seed: u64,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            flags: BTreeMap::new(),
            input_sha256: None,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        self.flags.insert(name.into(), value.to_string());
        self
    }

    fn compact(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

/// Everything one `eval` run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: RunManifest,
    pub descriptive: Option<DescriptiveReport>,
    pub regression: Option<RegressionReport>,
    pub comparison: Option<ComparisonTable>,
    pub classification: Option<ClassificationReport>,
}

impl Report {
    /// Descriptive statistics plus the requested cross-validated runs; the
    /// Wilcoxon table accompanies every regression run.
    pub fn generate(
        manifest: RunManifest,
        records: &[StudentRecord],
        specs: &[AlgorithmSpec],
        cv: &CvConfig,
        exec: Execution,
        regression: bool,
        classification: bool,
    ) -> Result<Report, ExperimentError> {
        let regression = regression.then(|| run_regression(records, specs, cv, exec)).transpose()?;
        let comparison = regression.as_ref().map(compare_models).transpose()?;
        let classification = classification.then(|| run_classification(records, specs, cv, exec)).transpose()?;
        Ok(Report { manifest, descriptive: Some(describe(records)?), regression, comparison, classification })
    }
}

/// Pretty printer whose floats are always `{:.6}`.
struct FixedFormatter(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for FixedFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.6}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{value:.6}")
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

/// Canonical JSON: sorted keys, fixed six-decimal floats, trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    // Going through Value sorts object keys.
    let value = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

/// Four significant digits, switching to scientific notation below 1e-4.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if mag < -4 {
        format!("{x:.3e}")
    } else {
        format!("{x:.*}", (3 - mag).max(0) as usize)
    }
}

fn csv_table(manifest: &RunManifest, header: &[&str], rows: &[Vec<String>]) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(|e| ReportError::Csv(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| ReportError::Csv(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| ReportError::Csv(e.to_string()))?)
        .map_err(|e| ReportError::Csv(e.to_string()))?;
    Ok(format!("# manifest: {}\n{body}", manifest.compact()))
}

/// One CSV document per table, as (file name, contents), in a fixed order.
pub fn csv_tables(report: &Report) -> Result<Vec<(String, String)>, ReportError> {
    let m = &report.manifest;
    let mut out = Vec::new();
    if let Some(d) = &report.descriptive {
        let rows: Vec<Vec<String>> = Style::ALL
            .iter()
            .zip(&d.boxplots)
            .map(|(s, b)| vec![s.letter().into(), f6(b.min), f6(b.q1), f6(b.median), f6(b.q3), f6(b.max), f6(b.mean)])
            .collect();
        out.push(("boxplots.csv".into(), csv_table(m, &["style", "min", "q1", "median", "q3", "max", "mean"], &rows)?));
        let rows: Vec<Vec<String>> =
            Style::ALL.iter().map(|s| vec![s.letter().into(), d.label_counts[s.index()].to_string()]).collect();
        out.push(("labels.csv".into(), csv_table(m, &["label", "count"], &rows)?));
        let rows: Vec<Vec<String>> = d
            .question_counts
            .iter()
            .enumerate()
            .map(|(q, c)| {
                let mut r = vec![format!("Q{}", q + 1)];
                r.extend(c.iter().map(|v| v.to_string()));
                r
            })
            .collect();
        out.push(("questions.csv".into(), csv_table(m, &["question", "A", "V", "K", "R"], &rows)?));
    }
    if let Some(r) = &report.regression {
        let mut rows = Vec::new();
        let mut intervals = Vec::new();
        for model in &r.models {
            for (c, col) in COLUMNS.iter().enumerate() {
                let e = model.errors.column(c);
                rows.push(vec![model.kind.short_name().into(), col.to_string(), f6(e.mae), f6(e.mdae), f6(e.rmse)]);
                let i = &model.intervals[c];
                intervals.push(vec![
                    model.kind.short_name().into(),
                    col.to_string(),
                    f6(i.mean),
                    f6(i.half_width),
                    i.n.to_string(),
                ]);
            }
        }
        for (c, col) in COLUMNS.iter().enumerate() {
            let e = r.baseline.column(c);
            rows.push(vec!["baseline".into(), col.to_string(), f6(e.mae), f6(e.mdae), f6(e.rmse)]);
        }
        out.push(("regression.csv".into(), csv_table(m, &["model", "style", "mae", "mdae", "rmse"], &rows)?));
        out.push((
            "intervals.csv".into(),
            csv_table(m, &["model", "style", "mean_abs_residual", "half_width_95", "n"], &intervals)?,
        ));
    }
    if let Some(t) = &report.comparison {
        let rows: Vec<Vec<String>> = t
            .rows
            .iter()
            .map(|row| {
                let mut r = vec![row.first.short_name().to_string(), row.second.short_name().to_string()];
                r.extend(row.cells.iter().map(|c| c.p_value.map_or("all_zero".into(), sig4)));
                r
            })
            .collect();
        out.push(("wilcoxon.csv".into(), csv_table(m, &["first", "second", "A", "V", "K", "R", "All"], &rows)?));
    }
    if let Some(c) = &report.classification {
        let mut confusion = Vec::new();
        let mut roc = Vec::new();
        for mc in &c.matrices {
            let rows: Vec<Vec<String>> = mc
                .models
                .iter()
                .map(|mm| {
                    let x = &mm.metrics;
                    vec![
                        mm.kind.short_name().into(),
                        f6(x.macro_precision),
                        f6(x.macro_recall),
                        f6(x.macro_f1),
                        f6(x.macro_accuracy),
                        mm.macro_auc.map_or("NA".into(), f6),
                        f6(x.fraction_correct),
                        x.any_undefined.to_string(),
                        mm.single_class_folds.to_string(),
                    ]
                })
                .collect();
            out.push((
                format!("classification_{}.csv", mc.matrix.letter()),
                csv_table(
                    m,
                    &[
                        "model",
                        "precision",
                        "recall",
                        "f1",
                        "accuracy",
                        "auc",
                        "fraction_correct",
                        "undefined_flag",
                        "single_class_folds",
                    ],
                    &rows,
                )?,
            ));
            for mm in &mc.models {
                for s in Style::ALL {
                    let k = mm.confusion.per_class[s.index()];
                    confusion.push(vec![
                        mc.matrix.letter().to_string(),
                        mm.kind.short_name().into(),
                        s.letter().to_string(),
                        k.tp.to_string(),
                        k.fp.to_string(),
                        k.fn_.to_string(),
                        k.tn.to_string(),
                    ]);
                    if let Some(curve) = &mm.roc[s.index()] {
                        for &(fpr, tpr) in &curve.points {
                            roc.push(vec![
                                mc.matrix.letter().to_string(),
                                mm.kind.short_name().into(),
                                s.letter().to_string(),
                                f6(fpr),
                                f6(tpr),
                            ]);
                        }
                    }
                }
            }
        }
        out.push(("confusion.csv".into(), csv_table(m, &["matrix", "model", "class", "tp", "fp", "fn", "tn"], &confusion)?));
        out.push(("roc.csv".into(), csv_table(m, &["matrix", "model", "class", "fpr", "tpr"], &roc)?));
    }
    Ok(out)
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(manifest: &RunManifest, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, "<metadata>{}</metadata>", xml_escape(&manifest.compact()));
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, xml_escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    s
}

/// Maps unit-square coordinates into the plot frame.
fn px(x: f64, y: f64) -> (f64, f64) {
    (PAD + x * (W - 2.0 * PAD), H - PAD - y * (H - 2.0 * PAD))
}

fn legend(s: &mut String, i: usize, label: &str) {
    let y = PAD + 14.0 + 14.0 * i as f64;
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{y:.1}" font-size="11" fill="{}">{}</text>"#,
        W - PAD - 110.0,
        COLORS[i % COLORS.len()],
        xml_escape(label)
    );
}

/// One-vs-rest ROC curves of one model on one matrix, a line per class.
pub fn roc_svg(manifest: &RunManifest, mc: &MatrixClassification, model: usize) -> String {
    let mm = &mc.models[model];
    let mut s = svg_open(manifest, &format!("ROC, {} on matrix {}", mm.kind.short_name(), mc.matrix.letter()));
    let (a, b) = (px(0.0, 0.0), px(1.0, 1.0));
    let _ = writeln!(s, r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999" stroke-dasharray="4"/>"##, a.0, a.1, b.0, b.1);
    for (k, curve) in mm.roc.iter().enumerate() {
        let Some(curve) = curve else { continue };
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(x, y)| {
                let (u, v) = px(x, y);
                format!("{u:.1},{v:.1}")
            })
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" points="{}"/>"#, COLORS[k], pts.join(" "));
        legend(&mut s, k, &format!("{} (AUC {:.3})", Style::ALL[k].letter(), curve.auc));
    }
    s.push_str("</svg>\n");
    s
}

/// Box plots of the four style probabilities.
pub fn boxplot_svg(manifest: &RunManifest, d: &DescriptiveReport) -> String {
    let mut s = svg_open(manifest, "Style probabilities");
    for (k, b) in d.boxplots.iter().enumerate() {
        let cx = (k as f64 + 0.5) / 4.0;
        let (x0, _) = px(cx - 0.08, 0.0);
        let (x1, _) = px(cx + 0.08, 0.0);
        let (xc, _) = px(cx, 0.0);
        let y = |v: f64| px(0.0, v).1;
        let c = COLORS[k];
        let _ = writeln!(s, r#"<line x1="{xc:.1}" y1="{:.1}" x2="{xc:.1}" y2="{:.1}" stroke="{c}"/>"#, y(b.min), y(b.max));
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="white" stroke="{c}"/>"#,
            y(b.q3),
            x1 - x0,
            y(b.q1) - y(b.q3)
        );
        let _ = writeln!(s, r#"<line x1="{x0:.1}" y1="{0:.1}" x2="{x1:.1}" y2="{0:.1}" stroke="{c}" stroke-width="2"/>"#, y(b.median));
        let _ = writeln!(s, r#"<text x="{xc:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#, H - PAD + 16.0, Style::ALL[k].letter());
    }
    s.push_str("</svg>\n");
    s
}

/// Mean absolute residual ± 95% half-width per model, for column `c`.
pub fn interval_svg(manifest: &RunManifest, r: &RegressionReport, c: usize) -> String {
    let mut s = svg_open(manifest, &format!("Absolute residuals, {}", COLUMNS[c]));
    let top = r
        .models
        .iter()
        .map(|m| m.intervals[c].mean + m.intervals[c].half_width)
        .fold(1e-9, f64::max)
        * 1.1;
    let n = r.models.len() as f64;
    for (k, m) in r.models.iter().enumerate() {
        let i = &m.intervals[c];
        let cx = (k as f64 + 0.5) / n;
        let (x, ym) = px(cx, i.mean / top);
        let (_, lo) = px(cx, ((i.mean - i.half_width) / top).max(0.0));
        let (_, hi) = px(cx, (i.mean + i.half_width) / top);
        let col = COLORS[k % COLORS.len()];
        let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{lo:.1}" x2="{x:.1}" y2="{hi:.1}" stroke="{col}"/>"#);
        let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{ym:.1}" r="3" fill="{col}"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
            H - PAD + 16.0,
            m.kind.short_name()
        );
    }
    s.push_str("</svg>\n");
    s
}

/// All charts for a report, as (file name, contents).
pub fn svg_charts(report: &Report) -> Vec<(String, String)> {
    let m = &report.manifest;
    let mut out = Vec::new();
    if let Some(d) = &report.descriptive {
        out.push(("boxplots.svg".into(), boxplot_svg(m, d)));
    }
    if let Some(r) = &report.regression {
        for (c, col) in COLUMNS.iter().enumerate() {
            out.push((format!("intervals_{col}.svg"), interval_svg(m, r, c)));
        }
    }
    if let Some(c) = &report.classification {
        for mc in &c.matrices {
            for (k, mm) in mc.models.iter().enumerate() {
                out.push((format!("roc_{}_{}.svg", mc.matrix.letter(), mm.kind.short_name()), roc_svg(m, mc, k)));
            }
        }
    }
    out
}
