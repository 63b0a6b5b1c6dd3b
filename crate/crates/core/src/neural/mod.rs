//! Fully connected networks trained from scratch: the direct regression
//! network and the encoder/decoder family with free or angle-supervised latents.

mod aoa;
pub mod checkpoint;
mod dnn;
mod encdec;
mod loss;
mod mlp;
mod model;
mod train;

pub use aoa::{aoa_from_position, AngleComponent, AoaLabel};
pub use dnn::{train, NeuralPrecoder};
pub use encdec::{
    compose, labels_for, train_angle_pipeline, train_free, train_supervised_decoder, train_supervised_encoder,
    AngleEncoderDecoder, Composed, EncoderDecoder, EncoderDecoderSpec, LatentDecoder, LatentEncoder, LatentMode,
    TrainedAutoencoder, TrainedDecoder, TrainedEncoder,
};
pub use loss::{cosine_loss_and_grad, squared_error_and_grad};
pub use mlp::{dropout_mask, Activation, Dense, DropoutSpec, Mlp, MlpCache, MlpSpec, Mode};
pub use model::{train_model, Architecture, TrainedModel};
pub use train::{
    fit, flatten_input, mix_seed, output_to_complex, unflatten_input, Network, Optimizer, TrainConfig, TrainHistory,
    TrainingData,
};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("latent width mismatch: encoder {encoder}, decoder {decoder}")]
    LatentMismatch { encoder: usize, decoder: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("network output has zero norm")]
    ZeroOutput,
    #[error("downlink target has zero norm")]
    ZeroTarget,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged in epoch {epoch}; epoch losses so far: {loss_trace:?}")]
    Diverged { epoch: usize, loss_trace: Vec<f64> },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint was written for a different architecture")]
    SpecHashMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
