//! Central finite-difference checks of the analytic gradients, for plain
//! networks and for the joint concept/task loss of trained models.
//!
//! A coordinate is skipped when the ±h evaluations land on different sides
//! of a ReLU kink, where the two-sided difference is meaningless.

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::models::{CBMConfig, CEMConfig, Encoding, ModelConfig, Strategy, TrainedModel};
use crate::nn::{chain, evaluate_loss, Activation, Gradients, LayerSpec, LossKind, Mlp, Targets};
use crate::rng::rng_from_seed;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const ABS_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl GradCheck {
    fn record(&mut self, analytic: f64, numeric: f64) {
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric));
        self.checked += 1;
    }

    pub fn merge(self, other: GradCheck) -> GradCheck {
        GradCheck {
            max_rel_error: self.max_rel_error.max(other.max_rel_error),
            checked: self.checked + other.checked,
            skipped: self.skipped + other.skipped,
        }
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error <= tolerance
    }
}

fn is_kinked(a: Activation) -> bool {
    matches!(a, Activation::Relu | Activation::LeakyRelu)
}

/// Which side of the kink every ReLU-family unit is on.
fn kink_pattern(mlp: &Mlp, x: ArrayView2<'_, f64>) -> Result<Vec<bool>> {
    let pass = mlp.forward(x)?;
    let mut out = Vec::new();
    for (layer, y) in mlp.layers().iter().zip(&pass.outputs) {
        if is_kinked(layer.activation) {
            out.extend(y.iter().map(|&v| v > 0.0));
        }
    }
    Ok(out)
}

/// Perturbs every parameter of every network returned by `nets` and
/// compares the central difference of `loss` with `analytic`.
fn sweep<M: Clone>(
    base: &M,
    nets: fn(&mut M) -> Vec<&mut Mlp>,
    analytic: &[&Gradients],
    loss: impl Fn(&M) -> Result<(f64, Vec<bool>)>,
) -> Result<GradCheck> {
    let mut check = GradCheck::default();
    let mut work = base.clone();
    let shapes: Vec<Vec<(usize, usize, usize)>> = nets(&mut work)
        .iter()
        .map(|m| m.layers().iter().map(|l| (l.weights.ncols(), l.weights.len(), l.bias.len())).collect())
        .collect();
    if shapes.len() != analytic.len() {
        return Err(Error::shape("one gradient set per network is required"));
    }
    for (j, layers) in shapes.iter().enumerate() {
        for (l, &(cols, n_w, n_b)) in layers.iter().enumerate() {
            for idx in 0..n_w + n_b {
                let eval = |delta: f64| -> Result<(f64, Vec<bool>)> {
                    let mut m = base.clone();
                    let mut all = nets(&mut m);
                    let layer = &mut all[j].layers_mut()[l];
                    if idx < n_w {
                        layer.weights[[idx / cols, idx % cols]] += delta;
                    } else {
                        layer.bias[idx - n_w] += delta;
                    }
                    loss(&m)
                };
                let (up, p_up) = eval(STEP)?;
                let (down, p_down) = eval(-STEP)?;
                if p_up != p_down {
                    check.skipped += 1;
                    continue;
                }
                let g = &analytic[j];
                let a = if idx < n_w { g.weights[l][[idx / cols, idx % cols]] } else { g.biases[l][idx - n_w] };
                check.record(a, (up - down) / (2.0 * STEP));
            }
        }
    }
    Ok(check)
}

fn mlp_loss(mlp: &Mlp, x: ArrayView2<'_, f64>, targets: Targets<'_>, kind: LossKind) -> Result<(f64, Array2<f64>)> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    evaluate_loss(kind, mlp.predict(x)?.view(), targets, &rows)
}

/// Checks parameter and input gradients of `kind` applied to the network output.
pub fn check_mlp(mlp: &Mlp, x: ArrayView2<'_, f64>, targets: Targets<'_>, kind: LossKind) -> Result<GradCheck> {
    let pass = mlp.forward(x)?;
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let (_, g_out) = evaluate_loss(kind, pass.output().view(), targets, &rows)?;
    let grads = mlp.backward(&pass, g_out.view())?;
    let loss = |m: &Mlp| -> Result<(f64, Vec<bool>)> { Ok((mlp_loss(m, x, targets, kind)?.0, kink_pattern(m, x)?)) };
    let mut check = sweep(mlp, |m| vec![m], &[&grads], loss)?;

    let mut xp = x.to_owned();
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            let orig = xp[[r, c]];
            xp[[r, c]] = orig + STEP;
            let (up, p_up) = (mlp_loss(mlp, xp.view(), targets, kind)?.0, kink_pattern(mlp, xp.view())?);
            xp[[r, c]] = orig - STEP;
            let (down, p_down) = (mlp_loss(mlp, xp.view(), targets, kind)?.0, kink_pattern(mlp, xp.view())?);
            xp[[r, c]] = orig;
            if p_up != p_down {
                check.skipped += 1;
            } else {
                check.record(grads.input[[r, c]], (up - down) / (2.0 * STEP));
            }
        }
    }
    Ok(check)
}

fn model_nets(m: &mut TrainedModel) -> Vec<&mut Mlp> {
    let mut v = vec![&mut m.encoder];
    v.extend(m.scorers.iter_mut());
    v.push(&mut m.head);
    v
}

/// Checks `TrainedModel::joint_gradients` for every trainable network.
/// Kinks are tracked in the encoder, the only network with ReLU units in
/// the standard architectures.
pub fn check_joint(
    model: &TrainedModel,
    x: ArrayView2<'_, f64>,
    c: ArrayView2<'_, f64>,
    y: &[usize],
    intervened: Option<&Array2<bool>>,
) -> Result<GradCheck> {
    let g = model.joint_gradients(x, c, y, intervened)?;
    let mut analytic = vec![&g.encoder];
    analytic.extend(g.scorers.iter());
    analytic.push(&g.head);
    let loss = |m: &TrainedModel| -> Result<(f64, Vec<bool>)> {
        Ok((m.joint_gradients(x, c, y, intervened)?.loss, kink_pattern(&m.encoder, x)?))
    };
    sweep(model, model_nets, &analytic, loss)
}

/// A randomly drawn small network with inputs and loss-compatible targets.
#[derive(Debug, Clone)]
pub struct MlpCase {
    pub mlp: Mlp,
    pub inputs: Array2<f64>,
    pub loss: LossKind,
    pub matrix_targets: Array2<f64>,
    pub labels: Vec<usize>,
}

impl MlpCase {
    pub fn targets(&self) -> Targets<'_> {
        match self.loss {
            LossKind::CrossEntropy | LossKind::CrossEntropyWithLogits => Targets::Labels(&self.labels),
            _ => Targets::Matrix(self.matrix_targets.view()),
        }
    }

    pub fn check(&self) -> Result<GradCheck> {
        check_mlp(&self.mlp, self.inputs.view(), self.targets(), self.loss)
    }
}

const HIDDEN_ACTIVATIONS: [Activation; 4] = [Activation::LeakyRelu, Activation::Relu, Activation::Sigmoid, Activation::Identity];

/// Up to three layers of width at most 8, a random loss, and an output
/// activation the loss accepts.
pub fn random_mlp_case(seed: u64) -> Result<MlpCase> {
    let mut rng = rng_from_seed(seed);
    let losses = [LossKind::Bce, LossKind::BceWithLogits, LossKind::CrossEntropy, LossKind::CrossEntropyWithLogits, LossKind::HalfMse];
    let loss = losses[rng.random_range(0..losses.len())];
    let last = match loss {
        LossKind::Bce => Activation::Sigmoid,
        LossKind::CrossEntropy => Activation::Softmax,
        LossKind::BceWithLogits | LossKind::CrossEntropyWithLogits => Activation::Identity,
        LossKind::HalfMse => [Activation::Sigmoid, Activation::Identity, Activation::LeakyRelu, Activation::Softmax][rng.random_range(0..4)],
    };
    let depth = rng.random_range(1..=3);
    let min_out = if matches!(loss, LossKind::CrossEntropy | LossKind::CrossEntropyWithLogits) { 2 } else { 1 };
    let mut widths: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    widths.push(rng.random_range(min_out..=8));
    let specs: Vec<LayerSpec> = (0..depth)
        .map(|l| {
            let act = if l + 1 == depth { last } else { HIDDEN_ACTIVATIONS[rng.random_range(0..4)] };
            LayerSpec::new(widths[l], widths[l + 1], act)
        })
        .collect();
    let mlp = Mlp::new(&specs, rng.random())?;
    let batch = rng.random_range(1..=6);
    let inputs = Array2::from_shape_simple_fn((batch, widths[0]), || StandardNormal.sample(&mut rng));
    let out = widths[depth];
    let matrix_targets = match loss {
        LossKind::HalfMse => Array2::from_shape_simple_fn((batch, out), || StandardNormal.sample(&mut rng)),
        _ => Array2::from_shape_simple_fn((batch, out), || f64::from(u8::from(rng.random_bool(0.5)))),
    };
    let labels = (0..batch).map(|_| rng.random_range(0..out)).collect();
    Ok(MlpCase { mlp, inputs, loss, matrix_targets, labels })
}

/// A small untrained soft, logit or embedding model with a random batch and,
/// for embedding models, an optional RandInt mask.
#[derive(Debug, Clone)]
pub struct JointCase {
    pub model: TrainedModel,
    pub inputs: Array2<f64>,
    pub concepts: Array2<f64>,
    pub labels: Vec<usize>,
    pub mask: Option<Array2<bool>>,
}

impl JointCase {
    pub fn check(&self) -> Result<GradCheck> {
        check_joint(&self.model, self.inputs.view(), self.concepts.view(), &self.labels, self.mask.as_ref())
    }
}

pub fn random_joint_case(seed: u64) -> Result<JointCase> {
    let mut rng = rng_from_seed(seed);
    let d_x = rng.random_range(1..=6);
    let k = rng.random_range(1..=4);
    let classes = rng.random_range(2..=4);
    let hidden = rng.random_range(1..=8);
    let lambda = rng.random_range(0.0..5.0);
    let model_seed = rng.random();
    let config = match rng.random_range(0..3) {
        kind @ (0 | 1) => {
            let encoding = if kind == 0 { Encoding::Soft } else { Encoding::Logit };
            let mut c = CBMConfig::tabular(encoding, Strategy::Joint, lambda, d_x, k, classes);
            c.encoder = chain(&[d_x, hidden, k], Activation::LeakyRelu, Activation::Identity);
            ModelConfig::Cbm(c.with_seed(model_seed))
        }
        _ => {
            let d = rng.random_range(1..=4);
            let mut c = CEMConfig::tabular(lambda, 0.5, d_x, k, classes);
            c.embedding_dim = d;
            c.backbone = chain(&[d_x, hidden, 2 * k * d], Activation::LeakyRelu, Activation::Identity);
            c.head = vec![LayerSpec::new(k * d, classes, Activation::Identity)];
            ModelConfig::Cem(c.with_seed(model_seed))
        }
    };
    let is_cem = matches!(config, ModelConfig::Cem(_));
    let model = TrainedModel::untrained(config)?;
    let batch = rng.random_range(1..=6);
    let inputs = Array2::from_shape_simple_fn((batch, d_x), || StandardNormal.sample(&mut rng));
    let concepts = Array2::from_shape_simple_fn((batch, k), || f64::from(u8::from(rng.random_bool(0.5))));
    let labels = (0..batch).map(|_| rng.random_range(0..classes)).collect();
    let mask = (is_cem && rng.random_bool(0.5)).then(|| Array2::from_shape_simple_fn((batch, k), || rng.random_bool(0.5)));
    Ok(JointCase { model, inputs, concepts, labels, mask })
}
