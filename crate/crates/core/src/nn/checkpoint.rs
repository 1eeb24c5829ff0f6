//! Serialised network form: layer specs plus base64 little-endian f64 tensors.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{validate_specs, Dense, LayerSpec, Mlp};
use crate::error::{Error, Result};

pub fn encode_f64(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_f64(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD.decode(text).map_err(|e| Error::format(format!("bad base64 tensor: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::format(format!("tensor byte length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: String,
}

impl TensorRecord {
    fn from_slice(shape: Vec<usize>, values: &[f64]) -> Self {
        TensorRecord { shape, data: encode_f64(values) }
    }

    fn values(&self, expected: &[usize]) -> Result<Vec<f64>> {
        if self.shape != expected {
            return Err(Error::format(format!("tensor shape {:?}, expected {:?}", self.shape, expected)));
        }
        let v = decode_f64(&self.data)?;
        if v.len() != expected.iter().product::<usize>() {
            return Err(Error::format("tensor length disagrees with its shape"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::format("non-finite parameter in checkpoint"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub layers: Vec<LayerSpec>,
    pub init_seed: u64,
    /// weight then bias for each layer, in layer order
    pub tensors: Vec<TensorRecord>,
}

impl From<Mlp> for MlpRecord {
    fn from(m: Mlp) -> Self {
        let mut tensors = Vec::with_capacity(2 * m.layers.len());
        for l in &m.layers {
            let w = l.weights.as_standard_layout();
            tensors.push(TensorRecord::from_slice(vec![w.nrows(), w.ncols()], w.as_slice().unwrap()));
            tensors.push(TensorRecord::from_slice(vec![l.bias.len()], l.bias.as_slice().unwrap()));
        }
        MlpRecord { layers: m.specs(), init_seed: m.init_seed, tensors }
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRecord) -> Result<Self> {
        validate_specs(&r.layers).map_err(|e| Error::format(e.to_string()))?;
        if r.tensors.len() != 2 * r.layers.len() {
            return Err(Error::format(format!("{} tensors for {} layers", r.tensors.len(), r.layers.len())));
        }
        let mut layers = Vec::with_capacity(r.layers.len());
        for (i, s) in r.layers.iter().enumerate() {
            let w = r.tensors[2 * i].values(&[s.in_dim, s.out_dim])?;
            let b = r.tensors[2 * i + 1].values(&[s.out_dim])?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((s.in_dim, s.out_dim), w).unwrap(),
                bias: Array1::from_vec(b),
                activation: s.activation,
            });
        }
        Mlp::from_layers(layers, r.init_seed)
    }
}
