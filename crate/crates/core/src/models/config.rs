use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{chain, validate_specs, Activation, AdamConfig, LayerSpec};

/// How concept activations are passed to the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Probabilities binarised at 0.5.
    Hard,
    /// Sigmoid probabilities.
    Soft,
    /// Raw logits.
    Logit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Encoder and head each fit to ground truth.
    Independent,
    /// Head fit to the trained encoder's activations.
    Sequential,
    /// λ·L_c + L_y on both networks at once.
    Joint,
}

impl Encoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Hard => "hard",
            Encoding::Soft => "soft",
            Encoding::Logit => "logit",
        }
    }
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Independent => "independent",
            Strategy::Sequential => "sequential",
            Strategy::Joint => "joint",
        }
    }
}

const HIDDEN: usize = 64;

/// The encoder emits concept logits and the head class logits; the encoding
/// decides what sits between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CBMConfig {
    pub encoding: Encoding,
    pub strategy: Strategy,
    pub lambda: f64,
    pub encoder: Vec<LayerSpec>,
    pub head: Vec<LayerSpec>,
    pub epochs: usize,
    /// Epochs of a separately fitted head (independent and sequential).
    pub head_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl CBMConfig {
    /// Leaky-ReLU encoder {d_x, 64, 64, k} and a linear head.
    pub fn tabular(encoding: Encoding, strategy: Strategy, lambda: f64, input_dim: usize, n_concepts: usize, n_classes: usize) -> Self {
        CBMConfig {
            encoding,
            strategy,
            lambda,
            encoder: chain(&[input_dim, HIDDEN, HIDDEN, n_concepts], Activation::LeakyRelu, Activation::Identity),
            head: vec![LayerSpec::new(n_concepts, n_classes, Activation::Identity)],
            epochs: 200,
            head_epochs: 200,
            batch_size: 512,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }

    pub fn hard(input_dim: usize, n_concepts: usize, n_classes: usize) -> Self {
        Self::tabular(Encoding::Hard, Strategy::Independent, 0.0, input_dim, n_concepts, n_classes)
    }

    pub fn joint(encoding: Encoding, lambda: f64, input_dim: usize, n_concepts: usize, n_classes: usize) -> Self {
        Self::tabular(encoding, Strategy::Joint, lambda, input_dim, n_concepts, n_classes)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_concepts(&self) -> usize {
        self.encoder.last().map_or(0, |l| l.out_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoding == Encoding::Hard && self.strategy != Strategy::Independent {
            return Err(Error::config(format!(
                "hard models are trained independently, not with the {} strategy",
                self.strategy.as_str()
            )));
        }
        check_lambda(self.lambda)?;
        check_logit_net(&self.encoder, "encoder")?;
        check_logit_net(&self.head, "head")?;
        if self.encoder.last().unwrap().out_dim != self.head[0].in_dim {
            return Err(Error::config(format!(
                "encoder emits {} concepts but the head expects {} inputs",
                self.n_concepts(),
                self.head[0].in_dim
            )));
        }
        check_batch(self.batch_size)?;
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CEMConfig {
    pub embedding_dim: usize,
    pub n_concepts: usize,
    pub lambda: f64,
    /// RandInt probability of replacing an activation by its ground truth.
    pub p_int: f64,
    /// Trunk ending in the 2·k·d embedding outputs.
    pub backbone: Vec<LayerSpec>,
    /// Head on the k·d concatenated mixed embeddings.
    pub head: Vec<LayerSpec>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl CEMConfig {
    /// The tabular encoder trunk feeding 2·k·d linear outputs, and a linear head.
    pub fn tabular(lambda: f64, p_int: f64, input_dim: usize, n_concepts: usize, n_classes: usize) -> Self {
        let d = 16;
        CEMConfig {
            embedding_dim: d,
            n_concepts,
            lambda,
            p_int,
            backbone: chain(&[input_dim, HIDDEN, HIDDEN, 2 * n_concepts * d], Activation::LeakyRelu, Activation::Identity),
            head: vec![LayerSpec::new(n_concepts * d, n_classes, Activation::Identity)],
            epochs: 200,
            batch_size: 512,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.n_concepts == 0 {
            return Err(Error::config("embedding dimension and concept count must be positive"));
        }
        if !(0.0..1.0).contains(&self.p_int) {
            return Err(Error::config(format!("p_int must lie in [0, 1), got {}", self.p_int)));
        }
        check_lambda(self.lambda)?;
        check_logit_net(&self.backbone, "backbone")?;
        check_logit_net(&self.head, "head")?;
        let (k, d) = (self.n_concepts, self.embedding_dim);
        if self.backbone.last().unwrap().out_dim != 2 * k * d {
            return Err(Error::config(format!("backbone must emit 2·k·d = {} values", 2 * k * d)));
        }
        if self.head[0].in_dim != k * d {
            return Err(Error::config(format!("head must take k·d = {} inputs", k * d)));
        }
        check_batch(self.batch_size)?;
        self.adam.validate()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be a finite non-negative number, got {lambda}")));
    }
    Ok(())
}

fn check_batch(batch: usize) -> Result<()> {
    if batch == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    Ok(())
}

fn check_logit_net(specs: &[LayerSpec], name: &str) -> Result<()> {
    validate_specs(specs).map_err(|e| Error::config(format!("{name}: {e}")))?;
    if specs.last().unwrap().activation != Activation::Identity {
        return Err(Error::config(format!("{name} must end in an identity layer emitting logits")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Cbm(CBMConfig),
    Cem(CEMConfig),
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Cbm(c) => c.validate(),
            ModelConfig::Cem(c) => c.validate(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelConfig::Cbm(c) => c.seed,
            ModelConfig::Cem(c) => c.seed,
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            ModelConfig::Cbm(c) => c.lambda,
            ModelConfig::Cem(c) => c.lambda,
        }
    }

    pub fn n_concepts(&self) -> usize {
        match self {
            ModelConfig::Cbm(c) => c.n_concepts(),
            ModelConfig::Cem(c) => c.n_concepts,
        }
    }

    /// Short label such as `soft-joint-l0.01` or `cem-l5-p0.5`.
    pub fn label(&self) -> String {
        match self {
            ModelConfig::Cbm(c) if c.encoding == Encoding::Hard => "hard".into(),
            ModelConfig::Cbm(c) => format!("{}-{}-l{}", c.encoding.as_str(), c.strategy.as_str(), c.lambda),
            ModelConfig::Cem(c) => format!("cem-l{}-p{}", c.lambda, c.p_int),
        }
    }
}
