use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// N×d matrix of finite reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl SampleMatrix {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::shape(format!("sample matrix must be non-empty, got {n}x{d}")));
        }
        if data.len() != n * d {
            return Err(Error::shape(format!(
                "buffer of length {} does not hold a {n}x{d} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(SampleMatrix { data, n, d })
    }

    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), values.len(), 1)
    }

    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| l as f64).collect(), labels.len(), 1)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::shape("ragged rows"));
        }
        Self::new(rows.concat(), rows.len(), d)
    }

    pub fn from_array(a: ArrayView2<'_, f64>) -> Result<Self> {
        let (n, d) = a.dim();
        Self::new(a.iter().copied().collect(), n, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.d + j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.n, self.d), self.data.clone()).expect("shape checked at construction")
    }

    /// Rows restricted to `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::shape(format!("row {i} out of range for {} rows", self.n)));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(data, indices.len(), self.d)
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn hstack(&self, other: &SampleMatrix) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::shape(format!("row counts differ: {} vs {}", self.n, other.n)));
        }
        let d = self.d + other.d;
        let mut data = Vec::with_capacity(self.n * d);
        for i in 0..self.n {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(SampleMatrix { data, n: self.n, d })
    }

    /// True when every row equals the first one.
    pub fn is_constant(&self) -> bool {
        let first = self.row(0);
        (1..self.n).all(|i| self.row(i) == first)
    }

    /// Population standard deviation of each column.
    pub fn column_std(&self) -> Vec<f64> {
        let n = self.n as f64;
        (0..self.d)
            .map(|j| {
                let mean = (0..self.n).map(|i| self.data[i * self.d + j]).sum::<f64>() / n;
                let var = (0..self.n)
                    .map(|i| {
                        let e = self.data[i * self.d + j] - mean;
                        e * e
                    })
                    .sum::<f64>()
                    / n;
                var.sqrt()
            })
            .collect()
    }

    /// FNV-1a over shape and bit patterns. Used to key jitter streams to
    /// the content of a variable rather than to its argument position.
    pub(crate) fn content_hash(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01B3;
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        let mut feed = |word: u64| {
            for b in word.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(self.n as u64);
        feed(self.d as u64);
        for v in &self.data {
            feed(v.to_bits());
        }
        h
    }
}

/// How the k-nearest-neighbour statistics are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborSearch {
    /// Brute force up to [`BRUTE_FORCE_LIMIT`] samples, k-d tree beyond.
    #[default]
    Auto,
    BruteForce,
    KdTree,
}

pub const BRUTE_FORCE_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub k_neighbors: usize,
    /// Noise half-width relative to each column's standard deviation.
    pub jitter_amplitude: f64,
    pub jitter_seed: u64,
    #[serde(default)]
    pub neighbor_search: NeighborSearch,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            k_neighbors: 3,
            jitter_amplitude: 1e-10,
            jitter_seed: 0,
            neighbor_search: NeighborSearch::Auto,
        }
    }
}

impl EstimatorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.jitter_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::config("k_neighbors must be positive"));
        }
        if !(self.jitter_amplitude >= 0.0) || !self.jitter_amplitude.is_finite() {
            return Err(Error::config("jitter_amplitude must be a finite non-negative number"));
        }
        Ok(())
    }
}

/// An entropy or mutual-information value in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    pub value: f64,
    pub config: EstimatorConfig,
    pub n_used: usize,
}

/// Adds uniform noise in [−a, a] to every entry, with a = amplitude × column
/// std (amplitude itself for zero-variance columns). Deterministic in the
/// jitter seed.
pub fn jitter(x: &SampleMatrix, config: &EstimatorConfig) -> SampleMatrix {
    jitter_with_seed(x, config.jitter_amplitude, config.jitter_seed)
}

pub(crate) fn jitter_with_seed(x: &SampleMatrix, amplitude: f64, seed: u64) -> SampleMatrix {
    if amplitude == 0.0 {
        return x.clone();
    }
    let half_widths: Vec<f64> = x
        .column_std()
        .into_iter()
        .map(|s| if s > 0.0 { amplitude * s } else { amplitude })
        .collect();
    let mut rng = rng_from_seed(seed);
    let mut data = x.data.clone();
    for row in data.chunks_mut(x.d) {
        for (v, &a) in row.iter_mut().zip(&half_widths) {
            *v += rng.random_range(-a..=a);
        }
    }
    SampleMatrix { data, n: x.n, d: x.d }
}

/// Seed for jittering `x`: a function of the configured seed and the content
/// of `x`, so a variable receives the same noise wherever it appears.
pub(crate) fn variable_seed(x: &SampleMatrix, config: &EstimatorConfig) -> u64 {
    derive_seed(config.jitter_seed, x.content_hash())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_column(n: usize) -> SampleMatrix {
        SampleMatrix::from_column(&(0..n).map(|i| (i % 2) as f64).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let x = binary_column(50);
        let cfg = EstimatorConfig { jitter_amplitude: 0.0, ..Default::default() };
        assert_eq!(jitter(&x, &cfg), x);
    }

    #[test]
    fn jitter_is_deterministic() {
        let x = binary_column(100);
        let cfg = EstimatorConfig::default().with_seed(42);
        assert_eq!(jitter(&x, &cfg), jitter(&x, &cfg));
        assert_ne!(jitter(&x, &cfg), jitter(&x, &cfg.with_seed(43)));
    }

    #[test]
    fn jittered_binary_column_has_distinct_values() {
        // Distinct pairwise *distances* are unattainable in f64 at this width:
        // near 1.0 the jitter only has ~4.5e5 representable values, and
        // differences are rounded to the grid of the larger operand. The
        // points themselves are all distinct, which is what removes the
        // zero-distance ties.
        let x = binary_column(1000);
        let j = jitter(&x, &EstimatorConfig::default().with_seed(5));
        let mut values: Vec<u64> = j.as_slice().iter().map(|v| v.to_bits()).collect();
        values.sort_unstable();
        values.dedup();
        assert_eq!(values.len(), 1000);
        let eps = crate::estimators::neighbors::kth_neighbor_distances(&j, 3, NeighborSearch::BruteForce);
        assert!(eps.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn jitter_respects_half_width() {
        let x = binary_column(200);
        let cfg = EstimatorConfig { jitter_amplitude: 1e-3, ..Default::default() };
        let j = jitter(&x, &cfg);
        // std of an alternating 0/1 column is 0.5
        for (a, b) in x.as_slice().iter().zip(j.as_slice()) {
            assert!((a - b).abs() <= 0.5e-3 + 1e-15);
        }
    }

    #[test]
    fn constant_column_uses_absolute_amplitude() {
        let x = SampleMatrix::from_column(&[3.0; 10]).unwrap();
        let cfg = EstimatorConfig { jitter_amplitude: 1e-6, ..Default::default() };
        let j = jitter(&x, &cfg);
        assert!(j.as_slice().iter().all(|v| (v - 3.0).abs() <= 1e-6));
        assert!(j.as_slice().iter().any(|v| *v != 3.0));
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(SampleMatrix::new(vec![], 0, 1).is_err());
        assert!(SampleMatrix::new(vec![1.0, 2.0], 1, 3).is_err());
        assert!(matches!(SampleMatrix::new(vec![f64::NAN], 1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn content_hash_tracks_values() {
        let a = SampleMatrix::from_column(&[1.0, 2.0]).unwrap();
        let b = SampleMatrix::from_column(&[1.0, 2.0000001]).unwrap();
        assert_eq!(a.content_hash(), a.clone().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
