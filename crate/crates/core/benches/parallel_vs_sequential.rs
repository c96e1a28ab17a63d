use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vark_core::dataset::{build_style_matrices, synthesize, SynthConfig};
use vark_core::experiment::{run_regression, CvConfig};
use vark_core::learners::forest::RandomForest;
use vark_core::learners::{AlgorithmKind, AlgorithmSpec, FeatureMatrix, Target, TrainingSet};
use vark_core::{Execution, Style};

fn forest_fit(c: &mut Criterion) {
    let records = synthesize(&SynthConfig::default()).unwrap();
    let matrices = build_style_matrices(&records).unwrap();
    let m = &matrices[0];
    let rows: Vec<Vec<f64>> = (0..m.n_rows()).map(|i| m.row_f64(i)).collect();
    let data = TrainingSet::new(
        FeatureMatrix::from_rows(&rows).unwrap(),
        Target::Regression(m.targets_for(Style::A)),
    )
    .unwrap();
    let spec = AlgorithmSpec::new(AlgorithmKind::RandomForest).with_seed(3);

    let mut group = c.benchmark_group("forest_fit");
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| RandomForest::fit_with(&spec, &data, exec).unwrap())
        });
    }
    group.finish();
}

fn regression_cv(c: &mut Criterion) {
    let records = synthesize(&SynthConfig { n_students: 40, ..SynthConfig::default() }).unwrap();
    let specs = [
        AlgorithmSpec::new(AlgorithmKind::Knn),
        AlgorithmSpec::new(AlgorithmKind::DecisionTree),
        AlgorithmSpec::new(AlgorithmKind::RandomForest).with("n_trees", 20.0),
    ];
    let cv = CvConfig::kfold(5, false, 1);

    let mut group = c.benchmark_group("regression_cv");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_regression(&records, &specs, &cv, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, forest_fit, regression_cv);
criterion_main!(benches);
