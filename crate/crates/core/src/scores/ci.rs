use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;

/// z-value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWithCI {
    pub mean: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub repeats: usize,
}

impl ScoreWithCI {
    /// Mean ± 1.96·sd/√n with the sample standard deviation.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::config(format!("a confidence interval needs at least 2 values, got {n}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite score value".into()));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let half = Z95 * var.sqrt() / (n as f64).sqrt();
        Ok(ScoreWithCI { mean, ci95_low: mean - half, ci95_high: mean + half, repeats: n })
    }

    pub fn width(&self) -> f64 {
        self.ci95_high - self.ci95_low
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci95_low <= v && v <= self.ci95_high
    }

    /// Whole interval lies above `other`'s.
    pub fn strictly_above(&self, other: &ScoreWithCI) -> bool {
        self.ci95_low > other.ci95_high
    }

    pub fn overlaps(&self, other: &ScoreWithCI) -> bool {
        !self.strictly_above(other) && !other.strictly_above(self)
    }
}

/// Evaluates `score_fn` with jitter seeds base_seed, …, base_seed + repeats − 1.
pub fn score_with_ci<F>(score_fn: F, config: &EstimatorConfig, base_seed: u64, repeats: usize) -> Result<ScoreWithCI>
where
    F: Fn(&EstimatorConfig) -> Result<f64>,
{
    if repeats < 2 {
        return Err(Error::config(format!("repeats must be at least 2, got {repeats}")));
    }
    let values = (0..repeats as u64)
        .map(|r| score_fn(&config.with_seed(base_seed.wrapping_add(r))))
        .collect::<Result<Vec<f64>>>()?;
    ScoreWithCI::from_values(&values)
}
