//! Synthetic datasets: the TabularToy(δ) family and the Gaussian
//! benchmark with its closed-form entropies and mutual informations.

mod gaussian;
mod io;
mod tabular;

pub use gaussian::{
    cholesky, closed_form_gaussian, gen_gaussian_bench, standard_normal_entropy, ClosedForm, GaussianBenchConfig,
    GaussianMode, MultivariateNormal,
};
pub use io::{read_dataset, sidecar_path, write_dataset, DatasetSidecar};
pub use tabular::{
    gen_tabular_toy, input_map, split_dataset, split_indices, DataSplit, Dataset, Provenance, SplitKind, Splits,
    TabularToyConfig, Variant, GENERATOR_VERSION,
};

#[cfg(test)]
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
