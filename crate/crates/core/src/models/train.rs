use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;

use super::config::{CBMConfig, CEMConfig, Encoding, ModelConfig, Strategy};
use super::model::{TrainedModel, HEAD_INIT};
use crate::data::{DataSplit, Dataset, SplitKind};
use crate::error::{Error, Result};
use crate::nn::{
    argmax_rows, train, validate_specs, Activation, Adam, AdamConfig, Batcher, EpochRecord, LayerSpec, LossKind, Mlp, Targets,
    TrainConfig, TrainingLog,
};
use crate::rng::derive_seed;

const ENCODER_SHUFFLE: u64 = 3;
const HEAD_SHUFFLE: u64 = 4;

/// Quantile of |logits| that sets the intervention value of logit models.
pub const LOGIT_QUANTILE: f64 = 0.95;

fn check_split(split: &DataSplit, input_dim: usize, k: usize, n_classes: usize) -> Result<()> {
    if split.is_empty() {
        return Err(Error::shape("training split is empty"));
    }
    if split.inputs.ncols() != input_dim {
        return Err(Error::shape(format!("model takes {input_dim} inputs, dataset has {}", split.inputs.ncols())));
    }
    if split.n_concepts() != k {
        return Err(Error::shape(format!("model has {k} concepts, dataset has {}", split.n_concepts())));
    }
    if split.n_classes != n_classes {
        return Err(Error::shape(format!("head predicts {n_classes} classes, dataset has {}", split.n_classes)));
    }
    Ok(())
}

/// Nearest-rank quantile of |v|.
pub fn abs_quantile(values: impl IntoIterator<Item = f64>, q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().map(f64::abs).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Trains on the dataset's train split.
pub fn train_cbm(config: &CBMConfig, dataset: &Dataset) -> Result<TrainedModel> {
    train_cbm_on(config, &dataset.split(SplitKind::Train))
}

pub fn train_cbm_on(config: &CBMConfig, split: &DataSplit) -> Result<TrainedModel> {
    let mut model = TrainedModel::untrained(ModelConfig::Cbm(config.clone()))?;
    check_split(split, model.input_dim(), model.n_concepts(), model.n_classes())?;
    let x = split.inputs.view();
    let c = split.concepts.view();
    match config.strategy {
        Strategy::Joint => {
            model.log = joint_loop(&mut model, split, config.epochs, config.batch_size, config.adam, None)?;
            set_logit_scale(&mut model, x)?;
        }
        Strategy::Independent | Strategy::Sequential => {
            let enc_cfg = TrainConfig {
                epochs: config.epochs,
                batch_size: config.batch_size,
                seed: derive_seed(config.seed, ENCODER_SHUFFLE),
                adam: config.adam,
            };
            model.log = train(&mut model.encoder, x, Targets::Matrix(c), LossKind::BceWithLogits, &enc_cfg)?;
            set_logit_scale(&mut model, x)?;
            let head_inputs = if config.strategy == Strategy::Independent {
                c.mapv(|v| model.intervention_value(v))
            } else {
                let pass = model.concepts(x)?;
                model.activations(&pass)
            };
            let head_cfg = TrainConfig { epochs: config.head_epochs, seed: derive_seed(config.seed, HEAD_SHUFFLE), ..enc_cfg };
            let log = train(&mut model.head, head_inputs.view(), Targets::Labels(&split.labels), LossKind::CrossEntropyWithLogits, &head_cfg)?;
            model.head_log = Some(log);
        }
    }
    if !model.is_finite() {
        return Err(Error::Numerical("training produced non-finite parameters".into()));
    }
    Ok(model)
}

fn set_logit_scale(model: &mut TrainedModel, x: ArrayView2<'_, f64>) -> Result<()> {
    if model.encoding() == Some(Encoding::Logit) {
        let logits = model.concepts(x)?.logits;
        let l = abs_quantile(logits.iter().copied(), LOGIT_QUANTILE).unwrap();
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Numerical(format!("logit intervention value {l} is not a positive number")));
        }
        model.logit_scale = Some(l);
    }
    Ok(())
}

pub fn train_cem(config: &CEMConfig, dataset: &Dataset) -> Result<TrainedModel> {
    train_cem_on(config, &dataset.split(SplitKind::Train))
}

pub fn train_cem_on(config: &CEMConfig, split: &DataSplit) -> Result<TrainedModel> {
    let mut model = TrainedModel::untrained(ModelConfig::Cem(config.clone()))?;
    check_split(split, model.input_dim(), model.n_concepts(), model.n_classes())?;
    let p_int = (config.p_int > 0.0).then_some(config.p_int);
    model.log = joint_loop(&mut model, split, config.epochs, config.batch_size, config.adam, p_int)?;
    if !model.is_finite() {
        return Err(Error::Numerical("training produced non-finite parameters".into()));
    }
    Ok(model)
}

/// Mini-batch Adam on λ·L_c + L_y. With `p_int`, every batch draws a fresh
/// per-sample, per-concept RandInt mask from the shuffling stream.
fn joint_loop(model: &mut TrainedModel, split: &DataSplit, epochs: usize, batch_size: usize, adam: AdamConfig, p_int: Option<f64>) -> Result<TrainingLog> {
    let n = split.len();
    let k = model.n_concepts();
    let lambda = model.config.lambda();
    let mut opt_enc = Adam::new(adam, &model.encoder);
    let mut opt_head = Adam::new(adam, &model.head);
    let mut opt_scorers: Vec<Adam> = model.scorers.iter().map(|s| Adam::new(adam, s)).collect();
    let mut batcher = Batcher::new(n, batch_size, derive_seed(model.config.seed(), ENCODER_SHUFFLE));
    let mut log = TrainingLog::default();
    for epoch in 0..epochs {
        let batches = batcher.epoch();
        let (mut total, mut concept, mut task) = (0.0, 0.0, 0.0);
        for rows in &batches {
            let x = split.inputs.select(Axis(0), rows);
            let c = split.concepts.select(Axis(0), rows);
            let y: Vec<usize> = rows.iter().map(|&r| split.labels[r]).collect();
            let mask = p_int.map(|p| {
                let rng = batcher.rng();
                Array2::from_shape_simple_fn((rows.len(), k), || rng.random_bool(p))
            });
            let g = model.joint_gradients(x.view(), c.view(), &y, mask.as_ref())?;
            opt_enc.step(&mut model.encoder, &g.encoder)?;
            opt_head.step(&mut model.head, &g.head)?;
            for ((opt, s), gs) in opt_scorers.iter_mut().zip(model.scorers.iter_mut()).zip(&g.scorers) {
                opt.step(s, gs)?;
            }
            total += g.loss;
            concept += g.concept_loss;
            task += g.task_loss;
        }
        let m = batches.len() as f64;
        log.epochs.push(EpochRecord {
            epoch,
            loss: total / m,
            concept_loss: Some(concept / m),
            task_loss: Some(task / m),
            lambda: Some(lambda),
        });
    }
    Ok(log)
}

/// Head fitted to ground-truth concepts of the train split; returns it with
/// its test-split accuracy y_acc^(k).
pub fn train_reference_head(head: &[LayerSpec], dataset: &Dataset, train_config: &TrainConfig) -> Result<(Mlp, f64)> {
    validate_specs(head)?;
    if head.last().unwrap().activation != Activation::Identity {
        return Err(Error::config("reference head must end in an identity layer emitting logits"));
    }
    let train_split = dataset.split(SplitKind::Train);
    let test_split = dataset.split(SplitKind::Test);
    if head[0].in_dim != dataset.n_concepts() || head.last().unwrap().out_dim != dataset.n_classes {
        return Err(Error::shape("reference head does not match the dataset's concepts and classes"));
    }
    if train_split.is_empty() || test_split.is_empty() {
        return Err(Error::shape("reference head needs non-empty train and test splits"));
    }
    let mut mlp = Mlp::new(head, derive_seed(train_config.seed, HEAD_INIT))?;
    train(&mut mlp, train_split.concepts.view(), Targets::Labels(&train_split.labels), LossKind::CrossEntropyWithLogits, train_config)?;
    let pred = argmax_rows(mlp.predict(test_split.concepts.view())?.view());
    Ok((mlp, accuracy(&pred, &test_split.labels)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_quantile() {
        let v = (1..=100).map(|i| -(i as f64));
        assert_eq!(abs_quantile(v, 0.95), Some(95.0));
        assert_eq!(abs_quantile([3.0], 0.95), Some(3.0));
        assert_eq!(abs_quantile(std::iter::empty(), 0.5), None);
    }

    #[test]
    fn accuracy_counts_matches() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]), 0.75);
    }
}
