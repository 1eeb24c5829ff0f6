use std::path::Path;

use ndarray::{s, Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use super::config::{Encoding, ModelConfig};
use crate::error::{Error, Result};
use crate::nn::{bce_with_logits, cross_entropy_with_logits, sigmoid, Gradients, LayerSpec, Mlp, TrainingLog};
use crate::rng::derive_seed;

pub(crate) const ENCODER_INIT: u64 = 1;
pub(crate) const HEAD_INIT: u64 = 2;
pub(crate) const SCORER_INIT: u64 = 16;

/// A concept bottleneck or concept embedding model with its training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    /// CBM concept encoder, or CEM backbone emitting (ĉ⁺_i, ĉ⁻_i) pairs.
    pub encoder: Mlp,
    /// CEM per-concept scoring maps 2d → 1 (logit).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scorers: Vec<Mlp>,
    pub head: Mlp,
    /// L such that intervened logits are set to ±L.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logit_scale: Option<f64>,
    pub log: TrainingLog,
    /// Log of a separately fitted head.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_log: Option<TrainingLog>,
}

/// Concept-level forward results for a batch.
#[derive(Debug, Clone)]
pub struct ConceptPass {
    /// N×k concept logits.
    pub logits: Array2<f64>,
    /// N×2kd backbone output of a CEM.
    pub embeddings: Option<Array2<f64>>,
}

/// Loss terms and parameter gradients of λ·L_c + L_y on one batch.
#[derive(Debug, Clone)]
pub struct JointGradients {
    pub loss: f64,
    pub concept_loss: f64,
    pub task_loss: f64,
    pub encoder: Gradients,
    pub scorers: Vec<Gradients>,
    pub head: Gradients,
}

impl TrainedModel {
    /// Freshly initialised networks for `config`.
    pub fn untrained(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed();
        let (encoder, head, scorers) = match &config {
            ModelConfig::Cbm(c) => (Mlp::new(&c.encoder, derive_seed(seed, ENCODER_INIT))?, Mlp::new(&c.head, derive_seed(seed, HEAD_INIT))?, vec![]),
            ModelConfig::Cem(c) => {
                let spec = [LayerSpec::new(2 * c.embedding_dim, 1, crate::nn::Activation::Identity)];
                let scorers = (0..c.n_concepts)
                    .map(|i| Mlp::new(&spec, derive_seed(seed, SCORER_INIT + i as u64)))
                    .collect::<Result<Vec<_>>>()?;
                (Mlp::new(&c.backbone, derive_seed(seed, ENCODER_INIT))?, Mlp::new(&c.head, derive_seed(seed, HEAD_INIT))?, scorers)
            }
        };
        Ok(TrainedModel { config, encoder, scorers, head, logit_scale: None, log: TrainingLog::default(), head_log: None })
    }

    pub fn n_concepts(&self) -> usize {
        self.config.n_concepts()
    }

    pub fn n_classes(&self) -> usize {
        self.head.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn is_cem(&self) -> bool {
        matches!(self.config, ModelConfig::Cem(_))
    }

    pub fn encoding(&self) -> Option<Encoding> {
        match &self.config {
            ModelConfig::Cbm(c) => Some(c.encoding),
            ModelConfig::Cem(_) => None,
        }
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        match &self.config {
            ModelConfig::Cem(c) => Some(c.embedding_dim),
            ModelConfig::Cbm(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.is_finite() && self.head.is_finite() && self.scorers.iter().all(Mlp::is_finite)
    }

    fn check_inputs(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(format!("model expects {} input columns, got {}", self.input_dim(), x.ncols())));
        }
        Ok(())
    }

    pub fn concepts(&self, x: ArrayView2<'_, f64>) -> Result<ConceptPass> {
        self.check_inputs(&x)?;
        let h = self.encoder.predict(x)?;
        match self.embedding_dim() {
            None => Ok(ConceptPass { logits: h, embeddings: None }),
            Some(d) => {
                let k = self.n_concepts();
                let mut logits = Array2::zeros((x.nrows(), k));
                for i in 0..k {
                    let pair = h.slice(s![.., 2 * d * i..2 * d * (i + 1)]);
                    logits.column_mut(i).assign(&self.scorers[i].predict(pair)?.column(0));
                }
                Ok(ConceptPass { logits, embeddings: Some(h) })
            }
        }
    }

    /// Concept probabilities σ(logits).
    pub fn concept_probs(pass: &ConceptPass) -> Array2<f64> {
        pass.logits.mapv(sigmoid)
    }

    /// Activations the head receives without interventions.
    pub fn activations(&self, pass: &ConceptPass) -> Array2<f64> {
        match self.encoding() {
            Some(Encoding::Hard) => pass.logits.mapv(|z| if sigmoid(z) >= 0.5 { 1.0 } else { 0.0 }),
            Some(Encoding::Logit) => pass.logits.clone(),
            Some(Encoding::Soft) | None => pass.logits.mapv(sigmoid),
        }
    }

    /// Activation that stands for ground-truth value `c` under intervention.
    pub fn intervention_value(&self, c: f64) -> f64 {
        match (self.encoding(), self.logit_scale) {
            (Some(Encoding::Logit), Some(l)) => {
                if c >= 0.5 {
                    l
                } else {
                    -l
                }
            }
            _ => c,
        }
    }

    /// Head input for given activations: the activations themselves, or the
    /// concatenated mixtures ĉ_i ĉ⁺_i + (1 − ĉ_i) ĉ⁻_i of a CEM.
    pub fn head_input(&self, pass: &ConceptPass, activations: &Array2<f64>) -> Result<Array2<f64>> {
        match (self.embedding_dim(), &pass.embeddings) {
            (None, _) => Ok(activations.clone()),
            (Some(d), Some(h)) => Ok(mix(h, activations, d)),
            (Some(_), None) => Err(Error::MissingField("embeddings of a concept embedding model".into())),
        }
    }

    /// Class logits for a head input.
    pub fn class_logits(&self, head_input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.head.predict(head_input)
    }

    /// λ·BCE(concept logits, c) + CE(class logits, y) and its gradients for
    /// every trainable network. For CEMs, `intervened[r, i]` replaces ĉ_i by
    /// c_i in the mixture of sample r (the concept loss is unaffected).
    pub fn joint_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        c: ArrayView2<'_, f64>,
        y: &[usize],
        intervened: Option<&Array2<bool>>,
    ) -> Result<JointGradients> {
        self.check_inputs(&x)?;
        let (n, k) = (x.nrows(), self.n_concepts());
        if c.dim() != (n, k) || y.len() != n {
            return Err(Error::shape(format!("batch of {n} rows needs {n}×{k} concepts and {n} labels")));
        }
        if let Some(m) = intervened {
            if m.dim() != (n, k) {
                return Err(Error::shape("intervention mask does not match the batch"));
            }
        }
        let lambda = self.config.lambda();
        match self.embedding_dim() {
            None => {
                let encoding = self.encoding().unwrap();
                if encoding == Encoding::Hard {
                    return Err(Error::config("hard models have no joint loss"));
                }
                let pe = self.encoder.forward(x)?;
                let z = pe.output();
                let a = if encoding == Encoding::Soft { z.mapv(sigmoid) } else { z.clone() };
                let ph = self.head.forward(a.view())?;
                let (task_loss, gy) = cross_entropy_with_logits(ph.output().view(), y)?;
                let head = self.head.backward(&ph, gy.view())?;
                let (concept_loss, gc) = bce_with_logits(z.view(), c)?;
                let mut gz = head.input.clone();
                if encoding == Encoding::Soft {
                    gz.zip_mut_with(&a, |g, &p| *g *= p * (1.0 - p));
                }
                gz.scaled_add(lambda, &gc);
                let encoder = self.encoder.backward(&pe, gz.view())?;
                Ok(JointGradients { loss: lambda * concept_loss + task_loss, concept_loss, task_loss, encoder, scorers: vec![], head })
            }
            Some(d) => {
                let pb = self.encoder.forward(x)?;
                let h = pb.output();
                let mut passes = Vec::with_capacity(k);
                let mut logits = Array2::zeros((n, k));
                for i in 0..k {
                    let pair = h.slice(s![.., 2 * d * i..2 * d * (i + 1)]);
                    let p = self.scorers[i].forward(pair)?;
                    logits.column_mut(i).assign(&p.output().column(0));
                    passes.push(p);
                }
                let probs = logits.mapv(sigmoid);
                let mut a = probs.clone();
                if let Some(m) = intervened {
                    ndarray::Zip::from(&mut a).and(m).and(&c).for_each(|a, &hit, &ci| {
                        if hit {
                            *a = ci
                        }
                    });
                }
                let w = mix(h, &a, d);
                let ph = self.head.forward(w.view())?;
                let (task_loss, gy) = cross_entropy_with_logits(ph.output().view(), y)?;
                let head = self.head.backward(&ph, gy.view())?;
                let (concept_loss, gc) = bce_with_logits(logits.view(), c)?;
                let gw = &head.input;
                let mut gh = Array2::zeros(h.raw_dim());
                let mut scorers = Vec::with_capacity(k);
                for i in 0..k {
                    let (p0, n0, w0) = (2 * d * i, 2 * d * i + d, d * i);
                    let mut gs = Array2::zeros((n, 1));
                    for r in 0..n {
                        let ai = a[[r, i]];
                        let mut ga = 0.0;
                        for t in 0..d {
                            let g = gw[[r, w0 + t]];
                            gh[[r, p0 + t]] += ai * g;
                            gh[[r, n0 + t]] += (1.0 - ai) * g;
                            ga += g * (h[[r, p0 + t]] - h[[r, n0 + t]]);
                        }
                        let through_mix = match intervened {
                            Some(m) if m[[r, i]] => 0.0,
                            _ => ga * probs[[r, i]] * (1.0 - probs[[r, i]]),
                        };
                        gs[[r, 0]] = through_mix + lambda * gc[[r, i]];
                    }
                    let g = self.scorers[i].backward(&passes[i], gs.view())?;
                    gh.slice_mut(s![.., p0..p0 + 2 * d]).scaled_add(1.0, &g.input);
                    scorers.push(g);
                }
                let encoder = self.encoder.backward(&pb, gh.view())?;
                Ok(JointGradients { loss: lambda * concept_loss + task_loss, concept_loss, task_loss, encoder, scorers, head })
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        m.check_consistency()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Parameters finite and network shapes matching the config.
    pub fn check_consistency(&self) -> Result<()> {
        self.config.validate()?;
        let (enc, head) = match &self.config {
            ModelConfig::Cbm(c) => (&c.encoder, &c.head),
            ModelConfig::Cem(c) => {
                if self.scorers.len() != c.n_concepts || self.scorers.iter().any(|s| s.input_dim() != 2 * c.embedding_dim || s.output_dim() != 1) {
                    return Err(Error::format("scoring maps do not match the embedding config"));
                }
                (&c.backbone, &c.head)
            }
        };
        if &self.encoder.specs() != enc || &self.head.specs() != head {
            return Err(Error::format("network shapes do not match the stored config"));
        }
        if !self.is_finite() {
            return Err(Error::Numerical("checkpoint holds non-finite parameters".into()));
        }
        Ok(())
    }
}

/// Column-wise mixture of the backbone pairs by the activations.
pub(crate) fn mix(h: &Array2<f64>, a: &Array2<f64>, d: usize) -> Array2<f64> {
    let (n, k) = a.dim();
    let mut w = Array2::zeros((n, k * d));
    for r in 0..n {
        for i in 0..k {
            let ai = a[[r, i]];
            for t in 0..d {
                w[[r, d * i + t]] = ai * h[[r, 2 * d * i + t]] + (1.0 - ai) * h[[r, 2 * d * i + d + t]];
            }
        }
    }
    w
}

/// (ĉ⁺, ĉ⁻) as N×k×d tensors.
pub(crate) fn split_pairs(h: &Array2<f64>, k: usize, d: usize) -> (Array3<f64>, Array3<f64>) {
    let n = h.nrows();
    let pos = Array3::from_shape_fn((n, k, d), |(r, i, t)| h[[r, 2 * d * i + t]]);
    let neg = Array3::from_shape_fn((n, k, d), |(r, i, t)| h[[r, 2 * d * i + d + t]]);
    (pos, neg)
}
