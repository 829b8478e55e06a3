use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use skippred_bench::{corpus, examples, training_matrix};
use skippred_core::ensemble::{binarize, combine, DEFAULT_THRESHOLD};
use skippred_core::eval::average_accuracy;
use skippred_core::features::extract_examples;
use skippred_core::gbdt::{best_split, logistic_grad_hess, train};
use skippred_core::{EnsembleWeights, LastAction, SolutionId, TrainParams, N_POSITIONS};

fn bench_features(c: &mut Criterion) {
    let (catalog, sessions) = corpus(500, 1);
    c.bench_function("extract_examples/500_sessions", |b| {
        b.iter(|| extract_examples(black_box(&sessions), &catalog).unwrap())
    });
}

fn bench_gbdt(c: &mut Criterion) {
    let ex = examples(400, 2);
    let (matrix, labels) = training_matrix(&ex, 2000);
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    let features: Vec<usize> = (0..matrix.n_cols()).collect();
    let (grads, hess): (Vec<f64>, Vec<f64>) =
        labels.iter().map(|&y| logistic_grad_hess(0.0, y)).unzip();
    let params = TrainParams::default();
    c.bench_function("best_split/2000x63", |b| {
        b.iter(|| best_split(&matrix, black_box(&rows), &features, &grads, &hess, &params))
    });

    let params = TrainParams {
        num_boost_round: 20,
        max_depth: 6,
        ..TrainParams::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("2000x63_20_rounds_depth_6", |b| {
        b.iter(|| train(black_box(&matrix), &labels, &params).unwrap())
    });
    group.finish();
}

fn bench_scoring(c: &mut Criterion) {
    let weights = EnsembleWeights::default();
    let solution = SolutionId::new(9).unwrap();
    let sessions: Vec<(Vec<[f64; N_POSITIONS]>, Vec<bool>)> = (0..1000)
        .map(|s| {
            let n = 1 + s % N_POSITIONS;
            let matrix = (0..n)
                .map(|i| std::array::from_fn(|j| ((s * 7 + i * 3 + j) % 11) as f64 / 10.0))
                .collect();
            let truth = (0..n).map(|i| (s + i) % 3 != 0).collect();
            (matrix, truth)
        })
        .collect();
    c.bench_function("solution_9_and_aa/1000_sessions", |b| {
        b.iter(|| {
            let mut total = 0.0;
            for (matrix, truth) in &sessions {
                let scores =
                    combine(solution, matrix, LastAction::from_skip(true), &weights).unwrap();
                let decisions = binarize(&scores, DEFAULT_THRESHOLD);
                total += average_accuracy(&decisions, truth).unwrap();
            }
            black_box(total)
        })
    });
}

criterion_group!(benches, bench_features, bench_gbdt, bench_scoring);
criterion_main!(benches);
