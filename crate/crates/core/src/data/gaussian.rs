use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::SampleMatrix;
use crate::rng::{rng_from_seed, Rng};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::shape(format!("cholesky of a non-square {n}x{m} matrix")));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::config("covariance matrix is not positive definite"));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Zero-mean multivariate normal sampled as L·z with L the Cholesky factor.
#[derive(Debug, Clone)]
pub struct MultivariateNormal {
    chol: Array2<f64>,
}

impl MultivariateNormal {
    pub fn new(covariance: &Array2<f64>) -> Result<Self> {
        Ok(MultivariateNormal { chol: cholesky(covariance)? })
    }

    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub fn sample(&self, rng: &mut Rng) -> Array1<f64> {
        let z: Array1<f64> = (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect();
        self.chol.dot(&z)
    }

    /// `n` draws as the rows of an n×dim matrix.
    pub fn sample_n(&self, rng: &mut Rng, n: usize) -> Array2<f64> {
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for mut row in out.rows_mut() {
            row.assign(&self.sample(rng));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianMode {
    /// X, Y both d-dimensional, cross-covariance ρ·I.
    Interconcept,
    /// X d-dimensional, Y scalar, every X component correlated ρ with Y.
    ConceptsTask,
}

impl GaussianMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GaussianMode::Interconcept => "interconcept",
            GaussianMode::ConceptsTask => "concepts_task",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBenchConfig {
    pub mode: GaussianMode,
    pub d: usize,
    pub rho: f64,
    pub n: usize,
    pub seed: u64,
}

impl GaussianBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("dimension d must be positive"));
        }
        if self.n < 2 {
            return Err(Error::config("need at least two samples"));
        }
        match self.mode {
            GaussianMode::Interconcept if !(self.rho.abs() < 1.0) => {
                Err(Error::config(format!("interconcept rho must lie in (-1, 1), got {}", self.rho)))
            }
            GaussianMode::ConceptsTask if !(self.rho >= 0.0 && self.d as f64 * self.rho * self.rho < 1.0) => {
                Err(Error::config(format!(
                    "concepts_task rho must lie in [0, 1/sqrt(d)) = [0, {:.4}), got {}",
                    1.0 / (self.d as f64).sqrt(),
                    self.rho
                )))
            }
            _ => Ok(()),
        }
    }

    /// Joint covariance of (X, Y).
    pub fn covariance(&self) -> Array2<f64> {
        let d = self.d;
        match self.mode {
            GaussianMode::Interconcept => {
                let mut c = Array2::eye(2 * d);
                for i in 0..d {
                    c[[i, d + i]] = self.rho;
                    c[[d + i, i]] = self.rho;
                }
                c
            }
            GaussianMode::ConceptsTask => {
                let mut c = Array2::eye(d + 1);
                for i in 0..d {
                    c[[i, d]] = self.rho;
                    c[[d, i]] = self.rho;
                }
                c
            }
        }
    }

    pub fn y_dim(&self) -> usize {
        match self.mode {
            GaussianMode::Interconcept => self.d,
            GaussianMode::ConceptsTask => 1,
        }
    }
}

/// Draws (X, Y) from the benchmark Gaussian.
pub fn gen_gaussian_bench(config: &GaussianBenchConfig) -> Result<(SampleMatrix, SampleMatrix)> {
    config.validate()?;
    let mvn = MultivariateNormal::new(&config.covariance())?;
    let mut rng = rng_from_seed(config.seed);
    let joint = mvn.sample_n(&mut rng, config.n);
    let d = config.d;
    let x = joint.slice(ndarray::s![.., ..d]);
    let y = joint.slice(ndarray::s![.., d..]);
    Ok((SampleMatrix::from_array(x)?, SampleMatrix::from_array(y)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    /// I(X, Y) in nats.
    pub mi: f64,
    /// Interconcept: I/√(H(X)H(Y)); concepts-task: I/H(Y).
    pub normalized_mi: f64,
    /// H(X) in nats.
    pub entropy: f64,
}

/// Differential entropy of a d-dimensional standard normal.
pub fn standard_normal_entropy(d: usize) -> f64 {
    0.5 * d as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln())
}

pub fn closed_form_gaussian(config: &GaussianBenchConfig) -> Result<ClosedForm> {
    config.validate()?;
    let unit = 1.0 + (2.0 * std::f64::consts::PI).ln();
    let r2 = config.rho * config.rho;
    let d = config.d as f64;
    let (mi, normalized_mi) = match config.mode {
        GaussianMode::Interconcept => (-0.5 * d * (1.0 - r2).ln(), -(1.0 - r2).ln() / unit),
        GaussianMode::ConceptsTask => (-0.5 * (1.0 - d * r2).ln(), -(1.0 - d * r2).ln() / unit),
    };
    Ok(ClosedForm { mi, normalized_mi, entropy: standard_normal_entropy(config.d) })
}
