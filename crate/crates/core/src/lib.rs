//! Bimodal information-augmented multi-head attention (BIMHA) for
//! utterance-level multimodal sentiment analysis.
//!
//! The network runs four stages over precomputed text, acoustic and visual
//! features:
//!
//! 1. unimodal encoders ([`encoders`]): an LSTM over token embeddings and
//!    three-layer DNNs for the acoustic and visual vectors;
//! 2. inter-modal interaction ([`imi`]): outer products of every modality
//!    pair, a private ReLU projection per pair and one shared projection;
//! 3. inter-bimodal interaction ([`ibi`]): multi-head attention in which
//!    each bimodal feature queries the stack of all bimodal features;
//! 4. prediction ([`model`]): residual merge with the stacked features and
//!    a three-layer DNN.
//!
//! Everything is differentiated by the small tape engine in [`tensor`].

pub mod cli;
pub mod config;
pub mod data;
pub mod encoders;
pub mod error;
pub mod gradcheck;
pub mod ibi;
pub mod imi;
pub mod metrics;
pub mod model;
pub mod params;
pub mod tensor;
pub mod train;

pub use config::{ModelConfig, Precision, TargetMode, Task, TokenKind};
pub use data::{Dataset, DatasetFeatures, DatasetManifest, UtteranceSample};
pub use error::{Error, Result};
pub use metrics::{MetricReport, Scheme};
pub use model::BimhaModel;
pub use tensor::{Scalar, Tape, Tensor, Var};
pub use train::{RunReport, TrainOptions};
