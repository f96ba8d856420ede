//! Desk-scale simulator and analysis library for a semantic V2X
//! collision-prediction pipeline.
//!
//! Roadside units render (here: synthesize) short traffic clips, encode them
//! into token embeddings, pool the tokens with a single-query attentive probe
//! and send the pooled `1 x D` vector over a V2X link. Vehicles decode that
//! vector with a small MLP and a linear classifier.
//!
//! Modules:
//! - [`config`]: configuration records and the TOML config loader.
//! - [`semlink`]: payload sizes, compression ratios, quantization and link latency.
//! - [`costmodel`]: analytic FLOPs, activation memory and inference time.
//! - [`probe`]: encoder stub, attentive probe, gradients and training.
//! - [`scenario`]: synthetic traffic clips, post-processing and datasets.
//! - [`pipeline`]: metrics, report tables and the end-to-end runner.

pub mod config;
pub mod costmodel;
pub mod error;
pub mod pipeline;
pub mod probe;
pub mod scenario;
pub mod semlink;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
