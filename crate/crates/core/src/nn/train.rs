use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::loss;
use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, Rng};

const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 200, batch_size: 512, seed: 0, adam: AdamConfig::default() }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// BCE on probabilities (sigmoid output layer).
    Bce,
    BceWithLogits,
    /// CE on probabilities (softmax output layer).
    CrossEntropy,
    CrossEntropyWithLogits,
    HalfMse,
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Matrix(ArrayView2<'a, f64>),
    Labels(&'a [usize]),
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Matrix(m) => m.nrows(),
            Targets::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss value and output gradient for `output` against a subset of targets.
pub fn evaluate_loss(kind: LossKind, output: ArrayView2<'_, f64>, targets: Targets<'_>, rows: &[usize]) -> Result<(f64, Array2<f64>)> {
    match (kind, targets) {
        (LossKind::Bce, Targets::Matrix(t)) => loss::bce(output, t.select(Axis(0), rows).view()),
        (LossKind::BceWithLogits, Targets::Matrix(t)) => loss::bce_with_logits(output, t.select(Axis(0), rows).view()),
        (LossKind::HalfMse, Targets::Matrix(t)) => loss::half_mse(output, t.select(Axis(0), rows).view()),
        (LossKind::CrossEntropy, Targets::Labels(l)) => {
            let sub: Vec<usize> = rows.iter().map(|&i| l[i]).collect();
            loss::cross_entropy(output, &sub)
        }
        (LossKind::CrossEntropyWithLogits, Targets::Labels(l)) => {
            let sub: Vec<usize> = rows.iter().map(|&i| l[i]).collect();
            loss::cross_entropy_with_logits(output, &sub)
        }
        (kind, _) => Err(Error::config(format!("loss {kind:?} does not accept these targets"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over mini-batches of the optimised loss.
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Seeded mini-batch order; reshuffled every epoch from a single stream.
pub struct Batcher {
    order: Vec<usize>,
    batch_size: usize,
    rng: Rng,
}

impl Batcher {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        Batcher { order: (0..n).collect(), batch_size, rng: derived_rng(seed, SHUFFLE_STREAM) }
    }

    /// Shuffles and returns this epoch's batches.
    pub fn epoch(&mut self) -> Vec<Vec<usize>> {
        self.order.shuffle(&mut self.rng);
        self.order.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }

    /// The stream also drives in-batch randomness such as RandInt masks.
    pub fn rng(&mut self) -> &mut Rng {
        &mut self.rng
    }
}

/// Mini-batch Adam training of a single network.
pub fn train(
    model: &mut Mlp,
    inputs: ArrayView2<'_, f64>,
    targets: Targets<'_>,
    kind: LossKind,
    config: &TrainConfig,
) -> Result<TrainingLog> {
    config.validate()?;
    let n = inputs.nrows();
    if n == 0 {
        return Err(Error::shape("training data is empty"));
    }
    if targets.len() != n {
        return Err(Error::shape(format!("{n} inputs but {} targets", targets.len())));
    }
    let mut opt = Adam::new(config.adam, model);
    let mut batcher = Batcher::new(n, config.batch_size, config.seed);
    let mut log = TrainingLog::default();
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        let batches = batcher.epoch();
        for rows in &batches {
            let x = inputs.select(Axis(0), rows);
            let pass = model.forward(x.view())?;
            let (l, grad) = evaluate_loss(kind, pass.output().view(), targets, rows)?;
            let grads = model.backward(&pass, grad.view())?;
            opt.step(model, &grads)?;
            total += l;
        }
        log.epochs.push(EpochRecord {
            epoch,
            loss: total / batches.len() as f64,
            concept_loss: None,
            task_loss: None,
            lambda: None,
        });
    }
    Ok(log)
}

/// Full-data loss without updating the model.
pub fn dataset_loss(model: &Mlp, inputs: ArrayView2<'_, f64>, targets: Targets<'_>, kind: LossKind) -> Result<f64> {
    let out = model.predict(inputs)?;
    let rows: Vec<usize> = (0..inputs.nrows()).collect();
    Ok(evaluate_loss(kind, out.view(), targets, &rows)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{chain, Activation, LayerSpec};
    use ndarray::array;

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let mut mlp = Mlp::new(&[LayerSpec::new(2, 1, Activation::Sigmoid)], 3).unwrap();
        let before = mlp.clone();
        let x = array![[0.0, 1.0]];
        let t = array![[1.0]];
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let log = train(&mut mlp, x.view(), Targets::Matrix(t.view()), LossKind::Bce, &cfg).unwrap();
        assert!(log.epochs.is_empty());
        assert_eq!(mlp, before);
    }

    #[test]
    fn mismatched_loss_and_targets_is_a_config_error() {
        let mut mlp = Mlp::new(&[LayerSpec::new(2, 2, Activation::Softmax)], 3).unwrap();
        let x = array![[0.0, 1.0]];
        let t = array![[1.0, 0.0]];
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        let r = train(&mut mlp, x.view(), Targets::Matrix(t.view()), LossKind::CrossEntropy, &cfg);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn xor_is_learned() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let t = array![[0.0], [1.0], [1.0], [0.0]];
        let mut mlp = Mlp::new(&chain(&[2, 8, 8, 1], Activation::Sigmoid, Activation::Sigmoid), 5).unwrap();
        let cfg = TrainConfig { epochs: 2000, batch_size: 4, seed: 1, adam: AdamConfig { learning_rate: 1e-2, ..Default::default() } };
        train(&mut mlp, x.view(), Targets::Matrix(t.view()), LossKind::Bce, &cfg).unwrap();
        let p = mlp.predict(x.view()).unwrap();
        for (pi, ti) in p.iter().zip(t.iter()) {
            assert_eq!(*pi >= 0.5, *ti == 1.0, "prediction {pi} for target {ti}");
        }
    }

    #[test]
    fn same_seed_gives_identical_weights() {
        let x = Array2::from_shape_fn((64, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        let labels: Vec<usize> = (0..64).map(|i| (i * 5 % 3 == 0) as usize).collect();
        let specs = chain(&[3, 6, 2], Activation::LeakyRelu, Activation::Identity);
        let cfg = TrainConfig { epochs: 5, batch_size: 16, seed: 9, ..Default::default() };
        let run = || {
            let mut m = Mlp::new(&specs, 2).unwrap();
            train(&mut m, x.view(), Targets::Labels(&labels), LossKind::CrossEntropyWithLogits, &cfg).unwrap();
            m
        };
        assert_eq!(run(), run());
    }
}
