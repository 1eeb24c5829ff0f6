use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, Strategy};
use super::model::TrainedModel;
use super::train::accuracy;
use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::nn::argmax_rows;
use crate::rng::derived_rng;

const POLICY_STREAM: u64 = 0x1A7E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Independent uniformly random concept order per sample.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionResult {
    /// Task accuracy after 0, 1, …, k interventions.
    pub accuracy_curve: Vec<f64>,
    pub policy: Policy,
    pub policy_seed: u64,
    pub reference_accuracy: Option<f64>,
    pub s_int: Option<f64>,
}

impl InterventionResult {
    pub fn s_int(&self) -> Result<f64> {
        self.s_int.ok_or_else(|| Error::MissingDependency("intervention score needs a reference head accuracy".into()))
    }

    /// Accuracy with every concept replaced by its ground truth.
    pub fn final_accuracy(&self) -> f64 {
        *self.accuracy_curve.last().unwrap()
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.accuracy_curve.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Independently trained CBMs fit their head on ground-truth concepts, so
/// that head is its own reference.
pub fn is_own_reference(model: &TrainedModel) -> bool {
    matches!(&model.config, ModelConfig::Cbm(c) if c.strategy == Strategy::Independent)
}

/// Replaces the activations of the first m concepts of each sample's random
/// order by their ground-truth values (±L for logit models; for embedding
/// models the activation, which selects the aligned embedding).
///
/// `reference` is y_acc^(k) of a separately fitted head. Without it, s_int
/// is filled only for models that are their own reference.
pub fn intervene(
    model: &TrainedModel,
    split: &DataSplit,
    policy: Policy,
    policy_seed: u64,
    reference: Option<f64>,
) -> Result<InterventionResult> {
    let k = model.n_concepts();
    if split.n_concepts() != k {
        return Err(Error::shape(format!("model has {k} concepts, split has {}", split.n_concepts())));
    }
    if split.is_empty() {
        return Err(Error::shape("cannot intervene on an empty split"));
    }
    let Policy::Random = policy;
    let mut rng = derived_rng(policy_seed, POLICY_STREAM);
    let orders: Vec<Vec<usize>> = (0..split.len())
        .map(|_| {
            let mut o: Vec<usize> = (0..k).collect();
            o.shuffle(&mut rng);
            o
        })
        .collect();
    let pass = model.concepts(split.inputs.view())?;
    let mut act = model.activations(&pass);
    let mut curve = Vec::with_capacity(k + 1);
    for m in 0..=k {
        if m > 0 {
            for (r, order) in orders.iter().enumerate() {
                let i = order[m - 1];
                act[[r, i]] = model.intervention_value(split.concepts[[r, i]]);
            }
        }
        let logits = model.class_logits(model.head_input(&pass, &act)?.view())?;
        curve.push(accuracy(&argmax_rows(logits.view()), &split.labels));
    }
    let reference = reference.or_else(|| is_own_reference(model).then(|| curve[k]));
    Ok(InterventionResult {
        s_int: reference.map(|r| crate::scores::s_int(curve[k], r)),
        accuracy_curve: curve,
        policy,
        policy_seed,
        reference_accuracy: reference,
    })
}
