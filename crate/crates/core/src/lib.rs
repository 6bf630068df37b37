//! Semi-supervised log anomaly detection from dependency and proximity
//! patterns.
//!
//! Raw log lines are parsed into templates by a fixed-depth prefix-tree miner
//! ([`ingest`]), grouped into sequences and counted into an event count matrix
//! ([`sequencer`]). For every event a Markov blanket is searched over the
//! training matrix ([`mb`]); events with a non-empty blanket get a small MLP
//! regressor on their blanket, the rest get a mean model ([`pattern`]). Each
//! model's threshold is the largest deviation it shows on clean validation
//! data, and a test sequence is anomalous as soon as one event exceeds its
//! threshold ([`detector`]).
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below pin the `f64` instantiation used by the command-line tool.

pub mod config;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod event;
pub mod fingerprint;
pub mod ingest;
pub mod jsonl;
pub mod mb;
pub mod pattern;
pub mod pipeline;
pub mod scalar;
pub mod sequencer;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use event::{EventId, Label};
pub use scalar::Scalar;
pub use sequencer::{EventCountMatrix, WindowSpec};

pub type ModelBundle = pattern::ModelBundle<f64>;
pub type PatternModel = pattern::PatternModel<f64>;
pub type MlpRegressor = pattern::MlpRegressor<f64>;
pub type MeanModel = pattern::MeanModel<f64>;
pub type ThresholdVector = pattern::ThresholdVector<f64>;
pub type DeviationMatrix = pattern::DeviationMatrix<f64>;
pub type Verdict = detector::Verdict<f64>;
pub type CiTestResult = mb::CiTestResult<f64>;
pub type CorrelationMatrix = mb::CorrelationMatrix<f64>;
