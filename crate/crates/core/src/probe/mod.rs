//! Numerical core of the collision classifier.
//!
//! The encoder stub turns a clip into `L x D` token embeddings. The
//! attentive probe pools them with one learnable query (`softmax(q Z^T / sqrt(D)) Z`
//! over key/value projections of the tokens), then a small MLP and a linear
//! head produce class probabilities. Everything runs in `f64`.

mod attention;
mod checkpoint;
mod encoder;
mod matrix;
mod model;
mod train;

pub use attention::{attend, cross_attention, softmax, Attention};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
};
pub use encoder::{add_position, encode_stub, EncoderStub, POOL_GRID};
pub use matrix::{Matrix, TokenMatrix};
pub use model::{
    argmax, classify, probe_backward, probe_forward, Activation, ProbeOutput, ProbeParams,
    ProbeShape,
};
pub use train::{accuracy, mean_loss, train_probe, TrainSpec, TrainedProbe};
