use serde::{Deserialize, Serialize};

use super::digamma::{digamma_unchecked, DigammaTable};
use super::neighbors::{count_within, kth_neighbor_distances};
use super::sample::{jitter_with_seed, variable_seed, EstimatorConfig, MIEstimate, SampleMatrix};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

fn check_k(n: usize, config: &EstimatorConfig, context: &str) -> Result<()> {
    config.validate()?;
    if n <= config.k_neighbors {
        return Err(Error::InsufficientSamples { context: context.to_string(), n, k: config.k_neighbors });
    }
    Ok(())
}

/// Kozachenko–Leonenko differential entropy in nats with max-norm balls:
/// ψ(N) − ψ(k) + (d/N) Σ log(2ε_i).
pub fn kl_entropy(x: &SampleMatrix, config: &EstimatorConfig) -> Result<MIEstimate> {
    check_k(x.n(), config, "kl_entropy")?;
    let x = jitter_with_seed(x, config.jitter_amplitude, variable_seed(x, config));
    let eps = kth_neighbor_distances(&x, config.k_neighbors, config.neighbor_search);
    let n = x.n() as f64;
    let mut log_sum = 0.0;
    for &e in &eps {
        if e <= 0.0 {
            return Err(Error::Numerical(
                "zero neighbour distance in entropy estimate; enable jitter for discrete data".into(),
            ));
        }
        log_sum += (2.0 * e).ln();
    }
    let value = digamma_unchecked(n) - digamma_unchecked(config.k_neighbors as f64) + x.d() as f64 * log_sum / n;
    Ok(MIEstimate { value, config: *config, n_used: x.n() })
}

/// KSG (variant 1) mutual information in nats, clamped below at zero.
///
/// Each argument is jittered with a seed derived from the configured seed and
/// the argument's content, so `ksg_mi(x, y)` and `ksg_mi(y, x)` see the same
/// perturbed samples and return the same value. Identical arguments get two
/// independent perturbations, so `ksg_mi(z, z)` equals [`ksg_entropy`].
pub fn ksg_mi(x: &SampleMatrix, y: &SampleMatrix, config: &EstimatorConfig) -> Result<MIEstimate> {
    if x.n() != y.n() {
        return Err(Error::shape(format!("ksg_mi: x has {} samples, y has {}", x.n(), y.n())));
    }
    check_k(x.n(), config, "ksg_mi")?;
    if x == y {
        return ksg_entropy(x, config);
    }
    let xj = jitter_with_seed(x, config.jitter_amplitude, variable_seed(x, config));
    let yj = jitter_with_seed(y, config.jitter_amplitude, variable_seed(y, config));
    Ok(MIEstimate { value: ksg_core(&xj, &yj, config)?, config: *config, n_used: x.n() })
}

/// Entropy as the KSG self-information I(z, z′) between two independently
/// jittered copies of `z`.
///
/// For discrete variables this recovers the plug-in entropy (log 2 for a fair
/// coin); for continuous variables it saturates near ψ(N) − ψ(k). It is the
/// denominator used by the normalised leakage scores, and it makes the
/// normalised self-information equal to one.
pub fn ksg_entropy(z: &SampleMatrix, config: &EstimatorConfig) -> Result<MIEstimate> {
    check_k(z.n(), config, "ksg_entropy")?;
    let base = variable_seed(z, config);
    let a = jitter_with_seed(z, config.jitter_amplitude, base);
    let b = jitter_with_seed(z, config.jitter_amplitude, derive_seed(base, 0x5E1F));
    Ok(MIEstimate { value: ksg_core(&a, &b, config)?, config: *config, n_used: z.n() })
}

/// ψ(k) + ψ(N) − ⟨ψ(n_x + 1) + ψ(n_y + 1)⟩ on already-jittered samples.
fn ksg_core(x: &SampleMatrix, y: &SampleMatrix, config: &EstimatorConfig) -> Result<f64> {
    let n = x.n();
    let k = config.k_neighbors;
    let joint = x.hstack(y)?;
    let eps = kth_neighbor_distances(&joint, k, config.neighbor_search);
    let nx = count_within(x, &eps, config.neighbor_search);
    let ny = count_within(y, &eps, config.neighbor_search);
    let table = DigammaTable::new(n);
    let mut acc = 0.0;
    for i in 0..n {
        acc += table.get(nx[i] + 1) + table.get(ny[i] + 1);
    }
    let value = table.get(k) + table.get(n) - acc / n as f64;
    Ok(value.max(0.0))
}

/// How a mutual information is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// I(x, y) / H(y)
    ByEntropyOfY,
    /// I(x, y) / √(H(x) H(y))
    ByGeometricMean,
}

/// Which estimator supplies the entropies in a normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    /// [`ksg_entropy`]; used for all leakage scores.
    #[default]
    SelfInformation,
    /// [`kl_entropy`]; differential entropy, comparable to Gaussian closed forms.
    KozachenkoLeonenko,
}

pub fn entropy(z: &SampleMatrix, method: EntropyMethod, config: &EstimatorConfig) -> Result<MIEstimate> {
    match method {
        EntropyMethod::SelfInformation => ksg_entropy(z, config),
        EntropyMethod::KozachenkoLeonenko => kl_entropy(z, config),
    }
}

/// Entropy that must be strictly positive to serve as a denominator.
pub(crate) fn denominator(z: &SampleMatrix, name: &str, method: EntropyMethod, config: &EstimatorConfig) -> Result<f64> {
    if z.is_constant() {
        return Err(Error::DegenerateVariable(name.to_string()));
    }
    let h = entropy(z, method, config)?.value;
    if !(h > 0.0) {
        return Err(Error::DegenerateVariable(format!("{name} (estimated entropy {h:.3e})")));
    }
    Ok(h)
}

/// Normalised mutual information. Not clamped above: estimator noise may
/// push it past one.
pub fn normalized_mi(
    x: &SampleMatrix,
    y: &SampleMatrix,
    norm: Normalization,
    method: EntropyMethod,
    config: &EstimatorConfig,
) -> Result<f64> {
    let hy = denominator(y, "y", method, config)?;
    let denom = match norm {
        Normalization::ByEntropyOfY => hy,
        Normalization::ByGeometricMean => (denominator(x, "x", method, config)? * hy).sqrt(),
    };
    Ok(ksg_mi(x, y, config)?.value / denom)
}
