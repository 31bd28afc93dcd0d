//! Shared fixtures for the criterion benchmarks.

use hdl_core::{generate, EmbeddingSet, LabelVector, SynthSpec};

/// A reproducible Gaussian-mixture instance sized for benchmarking.
pub fn bench_instance(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    seed: u64,
) -> (EmbeddingSet, LabelVector, EmbeddingSet) {
    let spec = SynthSpec::balanced(num_classes, dim, per_class, 0.8, 0.2, seed);
    let data = generate(&spec).expect("benchmark instance must be valid");
    (data.labeled, data.labels, data.unlabeled)
}
