//! Fixtures shared by the benchmarks.

use leakage_core::data::{gen_gaussian_bench, gen_tabular_toy, Dataset, GaussianBenchConfig, GaussianMode, TabularToyConfig};
use leakage_core::estimators::SampleMatrix;

/// Correlated Gaussian pair (X, Y), each `d`-dimensional.
pub fn gaussian_pair(n: usize, d: usize) -> (SampleMatrix, SampleMatrix) {
    gen_gaussian_bench(&GaussianBenchConfig { mode: GaussianMode::Interconcept, d, rho: 0.5, n, seed: 1 }).expect("valid benchmark config")
}

pub fn toy(n: usize) -> Dataset {
    gen_tabular_toy(&TabularToyConfig { n, seed: 1, ..TabularToyConfig::default() }).expect("valid toy config")
}
