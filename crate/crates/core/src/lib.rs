//! Cost-sensitive intrusion detection toolkit.
//!
//! Probability models (a tanh-hidden-layer perceptron and per-class
//! diagonal Gaussian mixtures) estimate class posteriors over the five
//! traffic categories; a decision layer picks the class minimizing expected
//! cost under a configurable cost matrix; and an evaluation engine reports
//! empirical expected cost with bootstrap confidence intervals, detection
//! and false-alarm rates, and α-sweep tables.
//!
//! All numeric code is generic over the scalar type via [`Real`]; the
//! `*F64` aliases below are the double-precision instantiation used by the
//! CLI and the file formats.

pub mod cost;
pub mod data;
pub mod error;
pub mod eval;
pub mod family;
pub mod gmm;
pub mod kdd;
pub mod label;
pub mod linalg;
pub mod mlp;
pub mod rng;
pub mod scalar;
pub mod select;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CostMatrixF64 = cost::CostMatrix<f64>;
pub type ClassPosteriorF64 = cost::ClassPosterior<f64>;
pub type LabeledDatasetF64 = data::LabeledDataset<f64>;
pub type FeatureEncoderF64 = kdd::FeatureEncoder<f64>;
pub type GmmParamsF64 = gmm::GmmParams<f64>;
pub type MlpParamsF64 = mlp::MlpParams<f64>;
pub type TrainedModelF64 = family::TrainedModel<f64>;
pub type HyperParamsF64 = family::HyperParams<f64>;
pub type EvaluationReportF64 = eval::EvaluationReport<f64>;
