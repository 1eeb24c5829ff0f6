use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::gaussian::MultivariateNormal;
use crate::error::{Error, Result};
use crate::rng::derived_rng;

pub const GENERATOR_VERSION: &str = concat!("leakage-core/", env!("CARGO_PKG_VERSION"), "/tabular-toy-v1");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Three concepts, y = (c1 + c2 + c3 ≥ 2).
    #[default]
    Original,
    /// Two latents and concepts, five inputs, y = (c1 + c2 ≥ 1).
    TwoConcept,
    /// Original labels, c3 removed from the concept matrix.
    Incomplete,
    /// y = (c1 + c2 + c3 − c1·c2 ≥ 2).
    Misspecified,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::TwoConcept => "two_concept",
            Variant::Incomplete => "incomplete",
            Variant::Misspecified => "misspecified",
        }
    }

    fn latent_dim(self) -> usize {
        match self {
            Variant::TwoConcept => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabularToyConfig {
    pub delta: f64,
    pub n: usize,
    pub seed: u64,
    pub variant: Variant,
    pub split_ratios: [f64; 3],
}

impl Default for TabularToyConfig {
    fn default() -> Self {
        TabularToyConfig { delta: 0.25, n: 10_000, seed: 0, variant: Variant::Original, split_ratios: [0.7, 0.2, 0.1] }
    }
}

impl TabularToyConfig {
    pub fn validate(&self) -> Result<()> {
        // eigenvalues of Σ(δ) for the 3-latent case are 1 + 2δ and 1 − δ
        let lo = if self.variant.latent_dim() == 3 { -0.5 } else { -1.0 };
        if !(self.delta > lo && self.delta < 1.0) {
            return Err(Error::config(format!(
                "delta = {} makes the latent covariance non positive-definite",
                self.delta
            )));
        }
        if self.n < 3 {
            return Err(Error::config("n must be at least 3"));
        }
        check_ratios(&self.split_ratios)
    }

    /// Σ(δ)ᵢⱼ = δᵢⱼ + δ(1 − δᵢⱼ)
    pub fn latent_covariance(&self) -> Array2<f64> {
        let m = self.variant.latent_dim();
        Array2::from_shape_fn((m, m), |(i, j)| if i == j { 1.0 } else { self.delta })
    }
}

fn check_ratios(r: &[f64; 3]) -> Result<()> {
    if r.iter().any(|&v| !(v > 0.0)) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios must be positive and sum to 1, got {r:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Val => "val",
            SplitKind::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitKind::Train),
            "val" => Ok(SplitKind::Val),
            "test" => Ok(SplitKind::Test),
            other => Err(Error::format(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, kind: SplitKind) -> &[usize] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    /// Split membership of every row.
    pub fn membership(&self, n: usize) -> Result<Vec<SplitKind>> {
        let mut out = vec![None; n];
        for kind in [SplitKind::Train, SplitKind::Val, SplitKind::Test] {
            for &i in self.get(kind) {
                match out.get_mut(i) {
                    Some(slot @ None) => *slot = Some(kind),
                    Some(Some(_)) => return Err(Error::format(format!("row {i} appears in two splits"))),
                    None => return Err(Error::format(format!("split index {i} out of range"))),
                }
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::format(format!("row {i} belongs to no split"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator_version: String,
    pub config: Option<TabularToyConfig>,
}

/// Inputs, binary concepts and class labels of one synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub concepts: Array2<u8>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub splits: Splits,
    pub provenance: Provenance,
}

/// Rows of one split, materialised.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub ids: Vec<usize>,
    pub inputs: Array2<f64>,
    pub concepts: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_concepts(&self) -> usize {
        self.concepts.ncols()
    }
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_concepts(&self) -> usize {
        self.concepts.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.inputs.nrows() != n || self.concepts.nrows() != n {
            return Err(Error::shape("inputs, concepts and labels disagree on the sample count"));
        }
        if self.concepts.iter().any(|&c| c > 1) {
            return Err(Error::format("concepts must be binary"));
        }
        if self.labels.iter().any(|&y| y >= self.n_classes) {
            return Err(Error::format("label outside the class alphabet"));
        }
        if self.n_classes < 2 {
            return Err(Error::format("need at least two classes"));
        }
        self.splits.membership(n)?;
        Ok(())
    }

    pub fn rows(&self, ids: &[usize]) -> DataSplit {
        DataSplit {
            ids: ids.to_vec(),
            inputs: self.inputs.select(Axis(0), ids),
            concepts: self.concepts.select(Axis(0), ids).mapv(f64::from),
            labels: ids.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    pub fn split(&self, kind: SplitKind) -> DataSplit {
        self.rows(self.splits.get(kind))
    }

    /// Column names in CSV order.
    pub fn column_names(&self) -> Vec<String> {
        let mut cols: Vec<String> = (0..self.input_dim()).map(|j| format!("x{j}")).collect();
        cols.extend((0..self.n_concepts()).map(|j| format!("c{j}")));
        cols.push("y".into());
        cols.push("split".into());
        cols
    }
}

/// The fixed 7-dimensional trigonometric input map (5 inputs for two latents).
pub fn input_map(z: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * z.len() + 1);
    for &zi in z {
        x.push(zi.sin());
        x.push(zi.cos());
    }
    x.push(z.iter().sum::<f64>().sin());
    x
}

fn label(variant: Variant, c: &[u8]) -> usize {
    let c: Vec<i32> = c.iter().map(|&v| i32::from(v)).collect();
    let y = match variant {
        Variant::Original | Variant::Incomplete => c[0] + c[1] + c[2] >= 2,
        Variant::TwoConcept => c[0] + c[1] >= 1,
        Variant::Misspecified => c[0] + c[1] + c[2] - c[0] * c[1] >= 2,
    };
    usize::from(y)
}

pub fn gen_tabular_toy(config: &TabularToyConfig) -> Result<Dataset> {
    config.validate()?;
    let mvn = MultivariateNormal::new(&config.latent_covariance())?;
    let mut rng = derived_rng(config.seed, 1);
    let latents = mvn.sample_n(&mut rng, config.n);
    let m = latents.ncols();
    let kept = if config.variant == Variant::Incomplete { 2 } else { m };
    let d_x = 2 * m + 1;

    let mut inputs = Array2::zeros((config.n, d_x));
    let mut concepts = Array2::zeros((config.n, kept));
    let mut labels = Vec::with_capacity(config.n);
    for (i, z) in latents.rows().into_iter().enumerate() {
        let z = z.to_vec();
        let c: Vec<u8> = z.iter().map(|&v| u8::from(v > 0.0)).collect();
        for (j, v) in input_map(&z).into_iter().enumerate() {
            inputs[[i, j]] = v;
        }
        for j in 0..kept {
            concepts[[i, j]] = c[j];
        }
        labels.push(label(config.variant, &c));
    }

    let mut ds = Dataset {
        inputs,
        concepts,
        labels,
        n_classes: 2,
        splits: Splits::default(),
        provenance: Provenance { generator_version: GENERATOR_VERSION.to_string(), config: Some(*config) },
    };
    ds.splits = split_indices(config.n, config.split_ratios, crate::rng::derive_seed(config.seed, 2))?;
    Ok(ds)
}

/// Re-split a dataset with new ratios and seed.
pub fn split_dataset(dataset: &Dataset, ratios: [f64; 3], seed: u64) -> Result<Dataset> {
    let mut out = dataset.clone();
    out.splits = split_indices(dataset.n(), ratios, seed)?;
    Ok(out)
}

pub fn split_indices(n: usize, ratios: [f64; 3], seed: u64) -> Result<Splits> {
    check_ratios(&ratios)?;
    let n_train = (ratios[0] * n as f64).round() as usize;
    let n_val = (ratios[1] * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::config(format!("ratios {ratios:?} leave an empty split for n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::rng::rng_from_seed(seed));
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Splits { train, val, test })
}
