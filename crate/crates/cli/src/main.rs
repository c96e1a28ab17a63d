//! `vark`: synthesize cohorts, run the cross-validated experiments, and
//! nominate favoured learning styles.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 data or IO error,
//! 4 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vark_core::dataset::{
    build_style_matrices, parse_responses, serialize_records, synthesize, DatasetError, StudentRecord, SynthConfig,
    QUESTIONS,
};
use vark_core::experiment::{default_specs, CvConfig, ExperimentError, COLUMNS};
use vark_core::learners::{fit, AlgorithmKind, AlgorithmSpec, LearnError, Mode, Target, TrainedModel, TrainingSet};
use vark_core::report::{csv_tables, sig4, svg_charts, to_canonical_json, Report, RunManifest};
use vark_core::selection::{format_styles, nominate, SelectionError, DEFAULT_THRESHOLD};
use vark_core::{Execution, ResponseVector, Style};

#[derive(Parser)]
#[command(name = "vark", version, about = "VARK learning-style prediction experiments")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true, env = "VARK_SEED", default_value_t = 0)]
    seed: u64,
    /// Directory for report files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Report file format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic questionnaire cohort.
    Synth(SynthArgs),
    /// Run cross-validated regression and/or classification.
    Eval(EvalArgs),
    /// Nominate favoured styles from probabilities or a trained bundle.
    Nominate(NominateArgs),
    /// Descriptive statistics of a cohort.
    Describe(InputArgs),
    /// Pairwise Wilcoxon tests of the regression residuals.
    Compare(ExperimentArgs),
    /// Train one algorithm on a whole cohort and save the model bundle.
    Train(TrainArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 72)]
    students: usize,
    /// Dirichlet concentration for A,V,K,R.
    #[arg(long, value_delimiter = ',', default_value = "2,2,2,2")]
    concentration: Vec<f64>,
    /// Probability that an answer selects a second style.
    #[arg(long, default_value_t = 0.3)]
    rate: f64,
    /// Output CSV; a `.manifest.json` sidecar is written next to it.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct InputArgs {
    /// Cohort CSV (`id,Q1..Q16`).
    #[arg(short, long)]
    input: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum CvKind {
    Loocv,
    Kfold,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = CvKind::Loocv)]
    cv: CvKind,
    /// Number of folds for `--cv kfold`.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Stratify k-fold splits by label.
    #[arg(long)]
    stratified: bool,
    /// Algorithms to run (nn, svm, dt, rf, knn).
    #[arg(long, value_delimiter = ',')]
    models: Vec<AlgorithmKind>,
    /// Hyperparameter override, e.g. `rf.n_trees=50`; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    /// Run every job on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum EvalMode {
    Regression,
    Classification,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, value_enum, default_value_t = EvalMode::Both)]
    mode: EvalMode,
}

#[derive(Args)]
struct NominateArgs {
    /// Four probabilities in A,V,K,R order.
    #[arg(long, value_delimiter = ',', num_args = 1, conflicts_with = "model")]
    probs: Option<Vec<f64>>,
    /// Regression bundle written by `train`.
    #[arg(long, requires = "answers")]
    model: Option<PathBuf>,
    /// The student's 16 answers, comma separated (e.g. `AV,R,K,...`).
    #[arg(long)]
    answers: Option<String>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Print the full nomination as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    algorithm: AlgorithmKind,
    #[arg(long, value_enum, default_value_t = TrainMode::Regression)]
    mode: TrainMode,
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TrainMode {
    Regression,
    Classification,
}

/// Models trained on a whole cohort: regression bundles hold 16 models
/// (`matrix * 4 + target`), classification bundles one per matrix.
#[derive(Serialize, Deserialize)]
struct ModelBundle {
    manifest: RunManifest,
    mode: Mode,
    models: Vec<TrainedModel>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
    fn data(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
    fn numerical(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidConfig(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<LearnError> for Failure {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::NumericalFailure(_) => Failure::numerical(e.to_string()),
            LearnError::UnknownHyperparameter { .. } | LearnError::InvalidHyperparameter { .. } => {
                Failure::usage(e.to_string())
            }
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let message = e.to_string();
        match e {
            ExperimentError::InvalidCv(_) | ExperimentError::NoModels => Failure::usage(message),
            ExperimentError::Dataset(d) => d.into(),
            ExperimentError::TooFewRecords { .. } => Failure::data(message),
            ExperimentError::Learn { source, .. } => Failure { message, ..source.into() },
            ExperimentError::Metric(_) | ExperimentError::Stats(_) => Failure::numerical(message),
        }
    }
}

impl From<SelectionError> for Failure {
    fn from(e: SelectionError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<vark_core::report::ReportError> for Failure {
    fn from(e: vark_core::report::ReportError) -> Self {
        Failure::data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read_input(path: &Path) -> Result<(Vec<StudentRecord>, String), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let digest = format!("{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| Failure::data(format!("{}: not UTF-8", path.display())))?;
    Ok((parse_responses(&text)?, digest))
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

/// Applies `kind.name=value` overrides; a bare `name=value` applies to every
/// selected algorithm that accepts it.
fn apply_params(specs: &mut [AlgorithmSpec], params: &[String]) -> Outcome {
    for p in params {
        let (key, value) = p.split_once('=').ok_or_else(|| Failure::usage(format!("--param {p:?}: expected name=value")))?;
        let value: f64 = value.parse().map_err(|_| Failure::usage(format!("--param {p:?}: value is not a number")))?;
        let (kind, name) = match key.split_once('.') {
            Some((k, n)) => (Some(k.parse::<AlgorithmKind>().map_err(Failure::usage)?), n),
            None => (None, key),
        };
        let mut used = false;
        for spec in specs.iter_mut() {
            let applies = match kind {
                Some(k) => spec.kind == k,
                None => spec.kind.hyperparameter_names().contains(&name),
            };
            if applies {
                spec.hyperparameters.insert(name.to_string(), value);
                spec.validate()?;
                used = true;
            }
        }
        if !used {
            return Err(Failure::usage(format!("--param {p:?} matches no selected algorithm")));
        }
    }
    Ok(())
}

fn base_manifest(cli: &Cli, command: &str) -> RunManifest {
    RunManifest::new(command, cli.seed).flag("plots", cli.plots).flag(
        "format",
        match cli.format {
            Format::Json => "json",
            Format::Csv => "csv",
        },
    )
}

fn emit(cli: &Cli, report: &Report, json_name: &str) -> Outcome {
    match cli.format {
        Format::Json => write_file(&cli.out_dir.join(json_name), &to_canonical_json(report)?)?,
        Format::Csv => {
            for (name, body) in csv_tables(report)? {
                write_file(&cli.out_dir.join(name), &body)?;
            }
        }
    }
    if cli.plots {
        for (name, body) in svg_charts(report) {
            write_file(&cli.out_dir.join(name), &body)?;
        }
    }
    Ok(())
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Outcome {
    let concentration: [f64; 4] = a
        .concentration
        .as_slice()
        .try_into()
        .map_err(|_| Failure::usage("--concentration needs four values"))?;
    let config = SynthConfig { n_students: a.students, concentration, multi_select_rate: a.rate, seed: cli.seed };
    let records = synthesize(&config)?;
    let csv = serialize_records(&records);
    let manifest = RunManifest::new("synth", cli.seed)
        .flag("students", a.students)
        .flag("concentration", a.concentration.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        .flag("rate", a.rate)
        .flag("output", a.output.display());
    let sidecar = PathBuf::from(format!("{}.manifest.json", a.output.display()));
    write_file(&a.output, &csv)?;
    let mut doc = serde_json::to_value(&manifest).expect("manifest serializes");
    doc["output_sha256"] = format!("{:x}", Sha256::digest(csv.as_bytes())).into();
    write_file(&sidecar, &to_canonical_json(&doc)?)?;
    println!("wrote {} students to {}", records.len(), a.output.display());
    Ok(())
}

fn experiment_setup(
    cli: &Cli,
    a: &ExperimentArgs,
    command: &str,
) -> Result<(Vec<StudentRecord>, Vec<AlgorithmSpec>, CvConfig, Execution, RunManifest), Failure> {
    let (records, digest) = read_input(&a.input.input)?;
    let mut specs = if a.models.is_empty() {
        default_specs()
    } else {
        a.models.iter().map(|&k| AlgorithmSpec::new(k)).collect()
    };
    apply_params(&mut specs, &a.params)?;
    let cv = match a.cv {
        CvKind::Loocv => CvConfig { stratified: a.stratified, ..CvConfig::loocv(cli.seed) },
        CvKind::Kfold => CvConfig::kfold(a.folds, a.stratified, cli.seed),
    };
    let exec = if a.sequential { Execution::Sequential } else { Execution::default() };
    let mut manifest = base_manifest(cli, command)
        .flag("input", a.input.input.display())
        .flag("cv", cv.describe())
        .flag("models", specs.iter().map(|s| s.kind.short_name()).collect::<Vec<_>>().join(","))
        .flag("params", a.params.join(" "));
    manifest.input_sha256 = Some(digest);
    Ok((records, specs, cv, exec, manifest))
}

fn print_regression(report: &Report) {
    let Some(r) = &report.regression else { return };
    println!("Regression ({}), MAE / MdAE / RMSE", r.protocol);
    println!("{:<9}{}", "model", COLUMNS.map(|c| format!("{c:>24}")).concat());
    let row = |name: &str, e: &vark_core::experiment::StyleErrors| {
        let cells: String =
            (0..5).map(|c| e.column(c)).map(|s| format!("{:>24}", format!("{:.4}/{:.4}/{:.4}", s.mae, s.mdae, s.rmse))).collect();
        println!("{name:<9}{cells}");
    };
    for m in &r.models {
        row(m.kind.short_name(), &m.errors);
    }
    row("baseline", &r.baseline);
    let nc: usize = r.models.iter().map(|m| m.non_converged).sum();
    if nc > 0 {
        println!("note: {nc} fits stopped at their iteration cap");
    }
}

fn print_comparison(report: &Report) {
    let Some(t) = &report.comparison else { return };
    println!("Wilcoxon signed-rank p-values (absolute residuals)");
    println!("{:<10}{}", "pair", COLUMNS.map(|c| format!("{c:>11}")).concat());
    for row in &t.rows {
        let cells: String =
            row.cells.iter().map(|c| format!("{:>11}", c.p_value.map_or("all_zero".into(), sig4))).collect();
        println!("{:<10}{cells}", format!("{}-{}", row.first.short_name(), row.second.short_name()));
    }
}

fn print_classification(report: &Report) {
    let Some(c) = &report.classification else { return };
    for mc in &c.matrices {
        println!("Classification on matrix {} ({})", mc.matrix.letter(), c.protocol);
        println!("{:<6}{:>10}{:>10}{:>10}{:>10}{:>10}", "model", "precision", "recall", "f1", "accuracy", "auc");
        for m in &mc.models {
            let x = &m.metrics;
            let auc = m.macro_auc.map_or("NA".into(), |a| format!("{a:.4}"));
            println!(
                "{:<6}{:>10.4}{:>10.4}{:>10.4}{:>10.4}{:>10}",
                m.kind.short_name(),
                x.macro_precision,
                x.macro_recall,
                x.macro_f1,
                x.macro_accuracy,
                auc
            );
        }
    }
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Outcome {
    let (records, specs, cv, exec, manifest) = experiment_setup(cli, &a.experiment, "eval")?;
    let manifest = manifest.flag(
        "mode",
        match a.mode {
            EvalMode::Regression => "regression",
            EvalMode::Classification => "classification",
            EvalMode::Both => "both",
        },
    );
    let regression = a.mode != EvalMode::Classification;
    let classification = a.mode != EvalMode::Regression;
    let report = Report::generate(manifest, &records, &specs, &cv, exec, regression, classification)?;
    emit(cli, &report, "report.json")?;
    print_regression(&report);
    print_comparison(&report);
    print_classification(&report);
    Ok(())
}

fn cmd_compare(cli: &Cli, a: &ExperimentArgs) -> Outcome {
    let (records, specs, cv, exec, manifest) = experiment_setup(cli, a, "compare")?;
    let report = Report::generate(manifest, &records, &specs, &cv, exec, true, false)?;
    emit(cli, &report, "compare.json")?;
    print_comparison(&report);
    Ok(())
}

fn cmd_describe(cli: &Cli, a: &InputArgs) -> Outcome {
    let (records, digest) = read_input(&a.input)?;
    let mut manifest = base_manifest(cli, "describe").flag("input", a.input.display());
    manifest.input_sha256 = Some(digest);
    let report = Report {
        manifest,
        descriptive: Some(vark_core::experiment::describe(&records)?),
        regression: None,
        comparison: None,
        classification: None,
    };
    emit(cli, &report, "describe.json")?;
    let d = report.descriptive.as_ref().expect("set above");
    println!("{} students", d.n_students);
    for s in Style::ALL {
        let b = &d.boxplots[s.index()];
        println!(
            "{} ({}): dominant for {} students; probability median {:.3}, IQR [{:.3}, {:.3}]",
            s.letter(),
            s.name(),
            d.label_counts[s.index()],
            b.median,
            b.q1,
            b.q3
        );
    }
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Outcome {
    let (records, digest) = read_input(&a.input.input)?;
    let mut specs = vec![AlgorithmSpec::new(a.algorithm).with_seed(cli.seed)];
    apply_params(&mut specs, &a.params)?;
    let spec = &specs[0];
    let matrices = build_style_matrices(&records)?;
    let rows = |x: usize| (0..records.len()).map(|i| matrices[x].row_f64(i)).collect::<Vec<_>>();
    let (mode, models) = match a.mode {
        TrainMode::Regression => {
            let mut models = Vec::with_capacity(16);
            for x in 0..4 {
                for t in Style::ALL {
                    let data = TrainingSet::regression(&rows(x), matrices[x].targets_for(t))?;
                    models.push(fit(spec, &data, Mode::Regression)?);
                }
            }
            (Mode::Regression, models)
        }
        TrainMode::Classification => {
            let mut models = Vec::with_capacity(4);
            for x in 0..4 {
                let data = TrainingSet::new(
                    vark_core::learners::FeatureMatrix::from_rows(&rows(x))?,
                    Target::Classification(matrices[x].labels.clone()),
                )?;
                models.push(fit(spec, &data, Mode::Classification)?);
            }
            (Mode::Classification, models)
        }
    };
    let mut manifest = base_manifest(cli, "train")
        .flag("input", a.input.input.display())
        .flag("algorithm", spec.kind.short_name())
        .flag("params", a.params.join(" "));
    manifest.input_sha256 = Some(digest);
    let bundle = ModelBundle { manifest, mode, models };
    // plain serde_json keeps the model parameters bit-exact
    let text = serde_json::to_string(&bundle).map_err(|e| Failure::data(e.to_string()))?;
    write_file(&a.output, &text)?;
    println!("wrote {} {} model(s) to {}", bundle.models.len(), spec.kind.short_name(), a.output.display());
    Ok(())
}

fn parse_answers(text: &str) -> Result<StudentRecord, Failure> {
    let cells: Vec<&str> = text.split(',').map(str::trim).collect();
    if cells.len() != QUESTIONS {
        return Err(Failure::usage(format!("--answers needs {QUESTIONS} cells, got {}", cells.len())));
    }
    let mut responses = Vec::with_capacity(QUESTIONS);
    for (q, cell) in cells.iter().enumerate() {
        let mut flags = [false; 4];
        for ch in cell.chars().filter(|&c| c != '|') {
            let s = Style::from_letter(ch).ok_or_else(|| Failure::usage(format!("answer {}: invalid style {ch:?}", q + 1)))?;
            flags[s.index()] = true;
        }
        responses.push(ResponseVector::new(flags).map_err(|_| Failure::usage(format!("answer {} is empty", q + 1)))?);
    }
    Ok(StudentRecord::new("query", responses)?)
}

fn cmd_nominate(a: &NominateArgs) -> Outcome {
    let raw: [f64; 4] = match (&a.probs, &a.model) {
        (Some(p), None) => p.as_slice().try_into().map_err(|_| Failure::usage("--probs needs four values"))?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
            let bundle: ModelBundle =
                serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
            if bundle.mode != Mode::Regression || bundle.models.len() != 16 {
                return Err(Failure::usage("nominate needs a regression bundle (train --mode regression)"));
            }
            for m in &bundle.models {
                if m.format_version != vark_core::learners::MODEL_FORMAT_VERSION {
                    return Err(Failure::data(format!("unsupported model format version {}", m.format_version)));
                }
            }
            let record = parse_answers(a.answers.as_deref().unwrap_or_default())?;
            let mut p = [0.0; 4];
            for x in 0..4 {
                let row: Vec<f64> = vark_core::dataset::encode_row(&record, Style::ALL[x]).iter().map(|&b| b as f64).collect();
                for t in 0..4 {
                    p[t] += bundle.models[x * 4 + t].predict_regression(&row)?;
                }
            }
            p.map(|v| v / 4.0)
        }
        _ => return Err(Failure::usage("give either --probs or --model with --answers")),
    };
    let n = nominate(raw, a.threshold)?;
    if a.json {
        println!("{}", to_canonical_json(&n)?.trim_end());
    } else {
        println!("{}", format_styles(&n.styles));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(&cli, a),
        Command::Eval(a) => cmd_eval(&cli, a),
        Command::Nominate(a) => cmd_nominate(a),
        Command::Describe(a) => cmd_describe(&cli, a),
        Command::Compare(a) => cmd_compare(&cli, a),
        Command::Train(a) => cmd_train(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
