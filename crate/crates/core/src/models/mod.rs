//! Concept bottleneck models (hard, soft, logit; independent, sequential,
//! joint) and concept embedding models, with interventions and metrics.

mod config;
mod dump;
mod intervene;
mod metrics;
mod model;
mod train;

pub use config::{CBMConfig, CEMConfig, Encoding, ModelConfig, Strategy};
pub use dump::{embeddings_path, predict, read_embeddings, write_embeddings, ActivationDump, Prediction};
pub use intervene::{intervene, is_own_reference, InterventionResult, Policy};
pub use metrics::{classification_metrics, evaluate, Metrics};
pub use model::{ConceptPass, JointGradients, TrainedModel};
pub use train::{
    abs_quantile, accuracy, train_cbm, train_cbm_on, train_cem, train_cem_on, train_reference_head, LOGIT_QUANTILE,
};
