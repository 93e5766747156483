use criterion::{black_box, criterion_group, criterion_main, Criterion};
use moodkappa::corpus::generate_synthetic;
use moodkappa::minfit::fit;
use moodkappa::mc::run_experiment;
use moodkappa::{fleiss_kappa, CategoryCounts, ExperimentConfig, MinPoints, Stage};

fn kappa(c: &mut Criterion) {
    let matrix = generate_synthetic(45, 100, 3, 0.6, 1).unwrap();
    c.bench_function("fleiss_kappa 45x100", |b| b.iter(|| fleiss_kappa(black_box(&matrix))));
    c.bench_function("prefix kappas 45x100", |b| {
        b.iter(|| {
            let mut counts = CategoryCounts::new(matrix.n_items(), matrix.n_categories());
            for r in 0..matrix.n_raters() {
                counts.add_rater(matrix.rater_labels(r));
                if r > 0 {
                    black_box(counts.kappa());
                }
            }
        })
    });
}

fn experiment(c: &mut Criterion) {
    let matrix = generate_synthetic(45, 100, 3, 0.6, 1).unwrap();
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    group.bench_function("k=45 m=1000", |b| {
        b.iter(|| run_experiment(&matrix, &ExperimentConfig::sampled(45, 1000, 42)).unwrap())
    });
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let points = MinPoints::from_model(45, 0.2193).unwrap();
    for stage in [Stage::S0, Stage::S2, Stage::S4] {
        c.bench_function(&format!("fit {stage} k=45"), |b| b.iter(|| fit(black_box(&points), stage, None)));
    }
}

criterion_group!(benches, kappa, experiment, fitting);
criterion_main!(benches);
