//! Sequential dense networks with manual reverse-mode gradients and Adam.

mod adam;
mod checkpoint;
mod loss;
mod mlp;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{decode_f64, encode_f64, MlpRecord, TensorRecord};
pub use loss::{
    argmax_rows, bce, bce_with_logits, cross_entropy, cross_entropy_with_logits, half_mse, softmax_rows, CLIP,
};
pub use mlp::{chain, sigmoid, validate_specs, Activation, Dense, ForwardPass, Gradients, LayerSpec, Mlp, LEAKY_SLOPE};
pub use train::{dataset_loss, evaluate_loss, train, Batcher, EpochRecord, LossKind, Targets, TrainConfig, TrainingLog};
