use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::dump::predict;
use super::model::TrainedModel;
use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::nn::argmax_rows;
use crate::scores::auc;

/// Concept metrics are averaged over concepts at threshold 0.5; task F1
/// and AUC are macro averages (one-vs-rest AUC). An AUC is absent when a
/// class is missing from the split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub c_acc: f64,
    pub c_f1: f64,
    pub c_auc: Option<f64>,
    pub y_acc: f64,
    pub y_f1: f64,
    pub y_auc: Option<f64>,
}

fn f1(pred: &[bool], truth: &[bool]) -> f64 {
    let tp = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count() as f64;
    let fp = pred.iter().zip(truth).filter(|(p, t)| **p && !**t).count() as f64;
    let fneg = pred.iter().zip(truth).filter(|(p, t)| !**p && **t).count() as f64;
    if tp + fp + fneg == 0.0 {
        return 1.0;
    }
    2.0 * tp / (2.0 * tp + fp + fneg)
}

fn mean_or_absent(values: Vec<Result<f64>>) -> Result<Option<f64>> {
    let mut acc = Vec::with_capacity(values.len());
    for v in values {
        match v {
            Ok(x) => acc.push(x),
            Err(Error::DegenerateLabel(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(acc.iter().sum::<f64>() / acc.len() as f64))
}

pub fn classification_metrics(
    concept_probs: ArrayView2<'_, f64>,
    concepts: ArrayView2<'_, f64>,
    class_probs: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<Metrics> {
    let (n, k) = concepts.dim();
    if concept_probs.dim() != (n, k) || class_probs.nrows() != n || labels.len() != n || n == 0 {
        return Err(Error::shape("metric inputs disagree on their shapes"));
    }
    let (mut c_acc, mut c_f1, mut c_auc) = (0.0, 0.0, Vec::with_capacity(k));
    for i in 0..k {
        let pred: Vec<bool> = concept_probs.column(i).iter().map(|&p| p >= 0.5).collect();
        let truth: Vec<bool> = concepts.column(i).iter().map(|&c| c == 1.0).collect();
        c_acc += pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / n as f64;
        c_f1 += f1(&pred, &truth);
        c_auc.push(auc(&concept_probs.column(i).to_vec(), &truth));
    }
    let classes = class_probs.ncols();
    let yhat = argmax_rows(class_probs);
    let y_acc = yhat.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / n as f64;
    let mut y_f1 = 0.0;
    let mut y_auc = Vec::with_capacity(classes);
    for l in 0..classes {
        let pred: Vec<bool> = yhat.iter().map(|&p| p == l).collect();
        let truth: Vec<bool> = labels.iter().map(|&y| y == l).collect();
        y_f1 += f1(&pred, &truth);
        y_auc.push(auc(&class_probs.column(l).to_vec(), &truth));
    }
    Ok(Metrics {
        c_acc: c_acc / k as f64,
        c_f1: c_f1 / k as f64,
        c_auc: mean_or_absent(c_auc)?,
        y_acc,
        y_f1: y_f1 / classes as f64,
        y_auc: mean_or_absent(y_auc)?,
    })
}

pub fn evaluate(model: &TrainedModel, split: &DataSplit) -> Result<Metrics> {
    let p = predict(model, split.inputs.view())?;
    classification_metrics(p.concept_probs.view(), split.concepts.view(), p.class_probs.view(), &split.labels)
}
