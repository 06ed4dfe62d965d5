//! Shared fixtures for the pipeline benchmarks.

use rkhs_meta::{
    build_group_set, compute_gram, generate_dataset, DesignData, EigenGram, GFunctionSpec,
    KernelKind,
};

/// A g-function dataset with its Gram spectra, sized for benchmarking.
pub fn fixture(n: usize, d: usize, dmax: usize) -> (DesignData, EigenGram) {
    let spec = GFunctionSpec::canonical(d, 7).expect("spec");
    let data = generate_dataset(&spec, n, 0).expect("dataset");
    let groups = build_group_set(d, dmax).expect("groups");
    let grams = compute_gram(&data, &groups, KernelKind::Matern, true, 1e-8).expect("grams");
    (data, grams)
}
