//! Per-second quality-of-experience (QoE) prediction for streaming video.
//!
//! This crate turns raw playback traces — a short-time video quality score,
//! a play/stall indicator, and timing — into per-second QoE predictions
//! with a small stacked LSTM trained by truncated backpropagation through
//! time. It also ships everything needed to run honest experiments around
//! that model: database-style cross-validation splits, the usual
//! correlation/error measures, and a synthetic-trace generator with a
//! known non-Markovian ground truth for end-to-end checks.
//!
//! Module map:
//!
//! * [`numerics`] — dense matrices, activations, seeded splittable RNG
//! * [`lstm`] — the stacked LSTM: init, forward, exact BPTT gradients
//! * [`features`] — per-second feature extraction and normalization
//! * [`datasets`] — corpora on disk and cross-validation split plans
//! * [`training`] — windowing, Adam, the fit/predict pair
//! * [`metrics`] — LCC, SROCC, normalized RMSE, outage rate, pooling
//! * [`synth`] — synthetic corpus generation with oracle ground truth

pub mod datasets;
pub mod error;
pub mod features;
pub mod lstm;
pub mod metrics;
pub mod numerics;
pub mod synth;
pub mod training;

pub use datasets::{split, verify_no_leakage, Corpus, Fold, Protocol, RandomMode, SplitPlan};
pub use error::{Error, Result};
pub use features::{FeatureMode, FeatureSeries, FeatureSet, NormSpec, Orientation, SessionTrace, TraceMeta};
pub use lstm::{CellState, Gradients, LstmNetwork, NetworkConfig};
pub use metrics::{
    lcc, outage_rate, pool_overall, rmse_n, srocc, MetricsReport, PoolMethod, SessionScores,
};
pub use numerics::{sigmoid, tanh, Matrix, Rng};
pub use synth::{gen_corpus, gen_trace, oracle_qoe, OracleParams, SynthConfig};
pub use training::{fit, predict, FitOutcome, TrainConfig, TrainedModel};
