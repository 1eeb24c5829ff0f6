//! Losses returning the mean value and the gradient w.r.t. the network output.

use ndarray::{Array2, ArrayView2, Axis};

use super::mlp::sigmoid;
use crate::error::{Error, Result};

/// Probabilities are clipped to [CLIP, 1 − CLIP] before taking logs.
pub const CLIP: f64 = 1e-7;

fn same_shape(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("{what}: predictions {:?} vs targets {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(Error::shape(format!("{what}: empty batch")));
    }
    Ok(())
}

fn check_binary(t: &ArrayView2<'_, f64>) -> Result<()> {
    if let Some(v) = t.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("binary target {v} outside [0, 1]")));
    }
    Ok(())
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::shape(format!("{} labels for {rows} rows", labels.len())));
    }
    if rows == 0 {
        return Err(Error::shape("cross-entropy of an empty batch"));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Domain(format!("label {l} outside {classes} classes")));
    }
    Ok(())
}

/// Mean binary cross-entropy over every entry, on probabilities.
pub fn bce(probs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    same_shape(&probs, &targets, "bce")?;
    check_binary(&targets)?;
    let count = probs.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(probs.raw_dim());
    ndarray::Zip::from(&mut grad).and(&probs).and(&targets).for_each(|g, &p, &t| {
        let pc = p.clamp(CLIP, 1.0 - CLIP);
        loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        if p == pc {
            *g = (pc - t) / (pc * (1.0 - pc)) / count;
        }
    });
    Ok((loss / count, grad))
}

/// Mean binary cross-entropy on logits, computed stably.
pub fn bce_with_logits(logits: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    same_shape(&logits, &targets, "bce_with_logits")?;
    check_binary(&targets)?;
    let count = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    ndarray::Zip::from(&mut grad).and(&logits).and(&targets).for_each(|g, &z, &t| {
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        *g = (sigmoid(z) - t) / count;
    });
    Ok((loss / count, grad))
}

/// Mean categorical cross-entropy on row-wise probabilities.
pub fn cross_entropy(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    check_labels(labels, probs.nrows(), probs.ncols())?;
    let n = probs.nrows() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(probs.raw_dim());
    for (i, &l) in labels.iter().enumerate() {
        let p = probs[[i, l]];
        let pc = p.clamp(CLIP, 1.0 - CLIP);
        loss -= pc.ln();
        if p == pc {
            grad[[i, l]] = -1.0 / (pc * n);
        }
    }
    Ok((loss / n, grad))
}

/// Mean categorical cross-entropy on logits (softmax folded in).
pub fn cross_entropy_with_logits(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    check_labels(labels, logits.nrows(), logits.ncols())?;
    let n = logits.nrows() as f64;
    let mut loss = 0.0;
    let mut grad = softmax_rows(logits);
    for (i, &l) in labels.iter().enumerate() {
        let row = logits.row(i);
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[l];
        grad[[i, l]] -= 1.0;
    }
    grad /= n;
    Ok((loss / n, grad))
}

/// ½ mean squared error per row: Σ (p − t)² / (2N).
pub fn half_mse(pred: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    same_shape(&pred, &targets, "half_mse")?;
    let n = pred.nrows() as f64;
    let diff = &pred - &targets;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * n);
    Ok((loss, diff / n))
}

pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

/// Row-wise argmax; ties resolve to the lowest index.
pub fn argmax_rows(scores: ArrayView2<'_, f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for j in 1..r.len() {
                if r[j] > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
