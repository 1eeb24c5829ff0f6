use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::auc::auc;
use super::ci::ScoreWithCI;
use super::data::ConceptData;
use crate::error::{Error, Result};
use crate::nn::{chain, train, Activation, AdamConfig, LossKind, Mlp, Targets, TrainConfig};
use crate::rng::{derive_seed, derived_rng};

/// Probe networks used for the impurity matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of the evaluation samples used to fit each probe; AUCs are
    /// measured on the rest.
    pub train_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { hidden: 32, epochs: 50, batch_size: 64, learning_rate: 1e-3, train_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OisReport {
    pub score: ScoreWithCI,
    pub probe: ProbeConfig,
    /// π(ĉ, c) and π(c, c) of the first repeat.
    pub pi_predicted: Vec<Vec<f64>>,
    pub pi_true: Vec<Vec<f64>>,
    /// (repeat, matrix, i, j) of probes that failed; their AUC is set to 0.5.
    pub unreliable_cells: Vec<UnreliableCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnreliableCell {
    pub repeat: usize,
    pub matrix: String,
    pub i: usize,
    pub j: usize,
    pub reason: String,
}

/// AUC of a probe trained to predict `target` from `input` on the train rows,
/// measured on the held-out rows.
fn probe_auc(input: &[f64], target: &[f64], train_rows: &[usize], test_rows: &[usize], probe: &ProbeConfig, seed: u64) -> Result<f64> {
    let x = Array2::from_shape_vec((input.len(), 1), input.to_vec()).unwrap();
    let t = Array2::from_shape_vec((target.len(), 1), target.to_vec()).unwrap();
    let xtr = x.select(Axis(0), train_rows);
    let ttr = t.select(Axis(0), train_rows);
    let mut mlp = Mlp::new(&chain(&[1, probe.hidden, 1], Activation::LeakyRelu, Activation::Sigmoid), derive_seed(seed, 1))?;
    let cfg = TrainConfig {
        epochs: probe.epochs,
        batch_size: probe.batch_size,
        seed: derive_seed(seed, 2),
        adam: AdamConfig { learning_rate: probe.learning_rate, ..Default::default() },
    };
    train(&mut mlp, xtr.view(), Targets::Matrix(ttr.view()), LossKind::Bce, &cfg)?;
    let out = mlp.predict(x.select(Axis(0), test_rows).view())?;
    let labels: Vec<bool> = test_rows.iter().map(|&r| target[r] == 1.0).collect();
    auc(out.as_slice().unwrap(), &labels)
}

/// Oracle impurity score (2/k)‖π(ĉ, c) − π(c, c)‖_F, with π_ij the held-out
/// AUC of a probe predicting c_j from the i-th representation. Diagonal
/// cells are included. Repeats vary the probe split, initialisation and
/// batch order.
pub fn ois(data: &ConceptData, probe: &ProbeConfig, base_seed: u64, repeats: usize) -> Result<OisReport> {
    let k = data.k();
    let n = data.n();
    if k < 2 {
        return Err(Error::config("OIS needs at least two concepts"));
    }
    if repeats < 2 {
        return Err(Error::config(format!("repeats must be at least 2, got {repeats}")));
    }
    if !(probe.train_fraction > 0.0 && probe.train_fraction < 1.0) {
        return Err(Error::config("probe train fraction must lie in (0, 1)"));
    }
    let n_train = ((n as f64) * probe.train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InsufficientSamples { context: "OIS probe split".into(), n, k: 1 });
    }
    let chat: Vec<Vec<f64>> = (0..k).map(|i| data.predicted.column(i).to_vec()).collect();
    let c: Vec<Vec<f64>> = (0..k).map(|i| data.true_concepts.column(i).to_vec()).collect();

    let mut values = Vec::with_capacity(repeats);
    let mut unreliable = Vec::new();
    let mut first: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;
    for r in 0..repeats {
        let seed = base_seed.wrapping_add(r as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut derived_rng(seed, 0x0150));
        let (train_rows, test_rows) = order.split_at(n_train);
        let mut pi = [vec![vec![0.5; k]; k], vec![vec![0.5; k]; k]];
        for (m, (name, inputs)) in [("predicted", &chat), ("true", &c)].into_iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    // same probe seed for both matrices, so identical inputs give identical cells
                    let cell_seed = derive_seed(seed, (i * k + j) as u64 + 1);
                    match probe_auc(&inputs[i], &c[j], train_rows, test_rows, probe, cell_seed) {
                        Ok(a) => pi[m][i][j] = a,
                        Err(e) => unreliable.push(UnreliableCell { repeat: r, matrix: name.into(), i, j, reason: e.to_string() }),
                    }
                }
            }
        }
        let frob: f64 = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| (pi[0][i][j] - pi[1][i][j]).powi(2))
            .sum::<f64>()
            .sqrt();
        values.push(2.0 * frob / k as f64);
        if first.is_none() {
            let [p, t] = pi;
            first = Some((p, t));
        }
    }
    let (pi_predicted, pi_true) = first.unwrap();
    Ok(OisReport { score: ScoreWithCI::from_values(&values)?, probe: *probe, pi_predicted, pi_true, unreliable_cells: unreliable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random_concepts(n: usize, k: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_simple_fn((n, k), || rng.random_bool(0.5) as u8 as f64)
    }

    #[test]
    fn identical_representations_give_zero() {
        let c = random_concepts(300, 3, 1);
        let y: Vec<usize> = (0..300).map(|i| (c[[i, 0]] as usize) ^ (i % 2)).collect();
        let data = ConceptData::new(c.clone(), c, y).unwrap();
        let probe = ProbeConfig { epochs: 5, ..Default::default() };
        let r = ois(&data, &probe, 0, 2).unwrap();
        assert_eq!(r.score.mean, 0.0);
        assert_eq!(r.score.width(), 0.0);
        // a concept predicts itself perfectly
        assert_eq!(r.pi_true[0][0], 1.0);
    }

    #[test]
    fn mixing_in_other_concepts_raises_the_score() {
        let c = random_concepts(400, 2, 2);
        let mut chat = c.clone();
        for r in 0..400 {
            chat[[r, 0]] = 0.5 * c[[r, 0]] + 0.3 * c[[r, 1]];
        }
        let y: Vec<usize> = (0..400).map(|i| i % 2).collect();
        let data = ConceptData::new(c, chat, y).unwrap();
        let probe = ProbeConfig { epochs: 30, ..Default::default() };
        let r = ois(&data, &probe, 0, 2).unwrap();
        assert!(r.score.mean > 0.1, "{:?}", r.score);
        assert!(r.score.mean <= 1.0);
    }
}
