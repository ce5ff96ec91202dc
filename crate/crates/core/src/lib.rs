//! Next-Monday open/closed forecasting for shellfish production areas.
//!
//! The crate covers the whole chain: raw oceanographic CSVs are aggregated
//! into weekly per-estuary datasets ([`ingest`]), a calibrated synthetic
//! generator stands in for restricted monitoring data ([`synth`]), and two
//! hybrid classifiers ([`bagnet`], [`svmknn`]) are evaluated against simple
//! baselines ([`baselines`]) under stratified cross-validation and grid
//! search ([`experiment`]).
//!
//! Data-parallel stages (ensemble members, folds, grid cells, per-query
//! local SVMs) run on rayon when the `parallel` feature is enabled and fall
//! back to plain iterators otherwise. Results never depend on scheduling.

pub mod bagnet;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod par;
pub mod scaler;
pub mod seed;
pub mod svm;
pub mod svmknn;
pub mod synth;

pub use dataset::{EstuaryDataset, Matrix, SampleKey};
pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, KappaBand, MetricsReport};
pub use model::{Classifier, FittedModel, ModelKind, ModelSpec};

/// Version tag written into every persisted JSON artifact.
pub const FORMAT_VERSION: u32 = 1;
