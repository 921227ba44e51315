//! CNN-LSTM closing-price forecaster with hand-written backpropagation.
//!
//! The pipeline turns an OHLCV CSV into scaled sliding windows, the model
//! stacks three Conv1D/MaxPool/LSTM stages under a dense head, and the
//! harness trains it with mini-batch SGD (or Adam) and reports metrics in
//! price space.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod harness;
pub mod layers;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod plot;
pub mod synth;
pub mod tensor;
pub(crate) mod textfmt;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use error::{Error, Result};
pub use model::{Model, ModelConfig, Parameters};
pub use tensor::Tensor;
