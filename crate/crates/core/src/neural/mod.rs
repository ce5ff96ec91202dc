//! Feedforward sigmoid networks trained with Adagrad on a class-weighted
//! log-loss. Used on its own as the ANN baseline and as the ensemble member
//! of [`crate::bagnet`].

pub mod adagrad;
pub mod mlp;
pub mod train;

pub use adagrad::AdagradState;
pub use mlp::{gradient, loss, sigmoid, ClassWeights, Mlp, MlpArchitecture};
pub use train::{fit_network, train, ClassWeightMode, TrainConfig, TrainedNetwork};
