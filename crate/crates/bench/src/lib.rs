//! Fixed workloads shared by the benchmarks.

use skippred_core::datamodel::{generate_synthetic_dataset, SynthConfig};
use skippred_core::features::extract_examples;
use skippred_core::{DenseMatrix, Session, TrackCatalog, TrainingExample};

pub fn corpus(n_sessions: usize, seed: u64) -> (TrackCatalog, Vec<Session>) {
    let config = SynthConfig {
        n_sessions,
        ..SynthConfig::default()
    };
    generate_synthetic_dataset(&config, seed).expect("valid synthetic config")
}

pub fn examples(n_sessions: usize, seed: u64) -> Vec<TrainingExample> {
    let (catalog, sessions) = corpus(n_sessions, seed);
    extract_examples(&sessions, &catalog).expect("synthetic corpus is consistent")
}

/// Feature matrix and labels of the first `n_rows` examples.
pub fn training_matrix(examples: &[TrainingExample], n_rows: usize) -> (DenseMatrix, Vec<bool>) {
    let take = &examples[..n_rows.min(examples.len())];
    let rows: Vec<&[f64]> = take.iter().map(|e| e.features.as_slice()).collect();
    let matrix = DenseMatrix::from_rows(&rows).expect("rows share a width");
    (matrix, take.iter().map(|e| e.label).collect())
}
