use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::checkpoint::MlpRecord;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Relu,
    Sigmoid,
    Identity,
    Softmax,
}

impl Activation {
    fn apply(self, pre: &mut Array2<f64>) {
        match self {
            Activation::LeakyRelu => pre.mapv_inplace(|v| if v > 0.0 { v } else { LEAKY_SLOPE * v }),
            Activation::Relu => pre.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => pre.mapv_inplace(sigmoid),
            Activation::Identity => {}
            Activation::Softmax => {
                for mut row in pre.rows_mut() {
                    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|v| (v - m).exp());
                    let s = row.sum();
                    row /= s;
                }
            }
        }
    }

    /// Gradient w.r.t. the pre-activation, given the activation output and
    /// the gradient w.r.t. that output.
    fn backward(self, out: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::LeakyRelu => {
                let mut g = grad.clone();
                g.zip_mut_with(out, |g, &y| {
                    if y <= 0.0 {
                        *g *= LEAKY_SLOPE
                    }
                });
                g
            }
            Activation::Relu => {
                let mut g = grad.clone();
                g.zip_mut_with(out, |g, &y| {
                    if y <= 0.0 {
                        *g = 0.0
                    }
                });
                g
            }
            Activation::Sigmoid => {
                let mut g = grad.clone();
                g.zip_mut_with(out, |g, &y| *g *= y * (1.0 - y));
                g
            }
            Activation::Identity => grad.clone(),
            Activation::Softmax => {
                let dot = (grad * out).sum_axis(Axis(1)).insert_axis(Axis(1));
                out * &(grad - &dot)
            }
        }
    }

}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec { in_dim, out_dim, activation }
    }
}

/// Builds the spec list for widths like `[7, 64, 64, 3]`: `hidden` between
/// layers and `last` on the output.
pub fn chain(widths: &[usize], hidden: Activation, last: Activation) -> Vec<LayerSpec> {
    let n = widths.len().saturating_sub(1);
    (0..n)
        .map(|i| LayerSpec::new(widths[i], widths[i + 1], if i + 1 == n { last } else { hidden }))
        .collect()
}

pub fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::config("a network needs at least one layer"));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::config(format!("layer {i} has a zero dimension")));
        }
        if s.activation == Activation::Softmax && i + 1 != specs.len() {
            return Err(Error::config("softmax is only allowed on the final layer"));
        }
        if i > 0 && specs[i - 1].out_dim != s.in_dim {
            return Err(Error::config(format!(
                "layer {} outputs {} values but layer {i} expects {}",
                i - 1,
                specs[i - 1].out_dim,
                s.in_dim
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// in_dim × out_dim
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.weights.nrows(), self.weights.ncols(), self.activation)
    }
}

/// Sequential stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpRecord", try_from = "MlpRecord")]
pub struct Mlp {
    pub(crate) layers: Vec<Dense>,
    pub(crate) init_seed: u64,
}

/// Every layer input and output of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `inputs[l]` is the input to layer l.
    pub inputs: Vec<Array2<f64>>,
    /// `outputs[l]` is the post-activation output of layer l.
    pub outputs: Vec<Array2<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("non-empty network")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// Gradient w.r.t. the network input.
    pub input: Array2<f64>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp, batch: usize) -> Self {
        Gradients {
            weights: mlp.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: mlp.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
            input: Array2::zeros((batch, mlp.input_dim())),
        }
    }
}

impl Mlp {
    /// Weights and biases uniform in ±1/√fan_in, the Kaiming-uniform
    /// default of common deep-learning frameworks.
    pub fn new(specs: &[LayerSpec], init_seed: u64) -> Result<Self> {
        validate_specs(specs)?;
        let mut rng = rng_from_seed(init_seed);
        let layers = specs
            .iter()
            .map(|s| {
                let bound = 1.0 / (s.in_dim as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((s.in_dim, s.out_dim), || rng.random_range(-bound..bound));
                let bias = Array1::from_shape_simple_fn(s.out_dim, || rng.random_range(-bound..bound));
                Dense { weights, bias, activation: s.activation }
            })
            .collect();
        Ok(Mlp { layers, init_seed })
    }

    pub fn from_layers(layers: Vec<Dense>, init_seed: u64) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(Dense::spec).collect();
        validate_specs(&specs)?;
        if layers.iter().any(|l| l.bias.len() != l.weights.ncols()) {
            return Err(Error::shape("bias length differs from layer width"));
        }
        Ok(Mlp { layers, init_seed })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Dense::spec).collect()
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "network expects {} input columns, batch has {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<ForwardPass> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { x.to_owned() } else { outputs[l - 1].clone() };
            let mut z = input.dot(&layer.weights);
            z += &layer.bias;
            layer.activation.apply(&mut z);
            inputs.push(input);
            outputs.push(z);
        }
        Ok(ForwardPass { inputs, outputs })
    }

    /// Output of the last layer only.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut cur: Option<Array2<f64>> = None;
        for layer in &self.layers {
            let mut z = match &cur {
                None => x.dot(&layer.weights),
                Some(h) => h.dot(&layer.weights),
            };
            z += &layer.bias;
            layer.activation.apply(&mut z);
            cur = Some(z);
        }
        Ok(cur.unwrap())
    }

    /// Reverse-mode gradients given dL/d(output).
    pub fn backward(&self, pass: &ForwardPass, grad_output: ArrayView2<'_, f64>) -> Result<Gradients> {
        if pass.outputs.len() != self.layers.len() {
            return Err(Error::shape("forward pass does not belong to this network"));
        }
        if grad_output.dim() != pass.output().dim() {
            return Err(Error::shape(format!(
                "output gradient is {:?}, network output is {:?}",
                grad_output.dim(),
                pass.output().dim()
            )));
        }
        let n_layers = self.layers.len();
        let mut weights = vec![Array2::zeros((0, 0)); n_layers];
        let mut biases = vec![Array1::zeros(0); n_layers];
        let mut grad = grad_output.to_owned();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let dpre = layer.activation.backward(&pass.outputs[l], &grad);
            weights[l] = pass.inputs[l].t().dot(&dpre);
            biases[l] = dpre.sum_axis(Axis(0));
            grad = dpre.dot(&layer.weights.t());
        }
        Ok(Gradients { weights, biases, input: grad })
    }
}
