//! Mini-batch Adagrad training with balanced class weights.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adagrad::{AdagradState, DEFAULT_LEARNING_RATE};
use super::mlp::{ClassWeights, Mlp, MlpArchitecture, Workspace};
use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::scaler::Standardizer;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeightMode {
    Balanced,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub class_weight: ClassWeightMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: DEFAULT_LEARNING_RATE,
            class_weight: ClassWeightMode::Balanced,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// A trained network together with the standardization it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub scaler: Standardizer,
    pub mlp: Mlp,
}

impl TrainedNetwork {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.mlp.forward(&self.scaler.transform(x))
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba(x) > 0.5)
    }

    /// Probabilities for every row of `x`.
    pub fn predict_proba_matrix(&self, x: &Matrix) -> Vec<f64> {
        let xs = self.scaler.transform_matrix(x);
        self.mlp.forward_many(xs.iter_rows())
    }
}

/// Per-epoch mean training loss, for diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub epoch_loss: Vec<f64>,
}

pub fn train(mlp: Mlp, x: &Matrix, y: &[u8], cfg: &TrainConfig) -> Result<TrainedNetwork> {
    train_traced(mlp, x, y, cfg).map(|(net, _)| net)
}

/// Train `mlp` on rows `x` with labels `y`. Features are standardized with
/// the statistics of `x`, which are stored in the returned model.
pub fn train_traced(
    mut mlp: Mlp,
    x: &Matrix,
    y: &[u8],
    cfg: &TrainConfig,
) -> Result<(TrainedNetwork, TrainTrace)> {
    cfg.validate()?;
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Data(format!(
            "training set has {} rows and {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.cols() != mlp.arch.input {
        return Err(Error::Data(format!(
            "network expects {} inputs, data has {}",
            mlp.arch.input,
            x.cols()
        )));
    }
    let weights = match cfg.class_weight {
        ClassWeightMode::Balanced => ClassWeights::balanced(y)?,
        ClassWeightMode::Uniform => ClassWeights::UNIFORM,
    };
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform_matrix(x);
    let targets: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let sample_w: Vec<f64> = targets.iter().map(|&t| weights.of(t)).collect();

    let mut opt = AdagradState::new(mlp.params.len(), cfg.learning_rate);
    let mut grad = vec![0.0; mlp.params.len()];
    let mut ws = Workspace::new(&mlp.arch);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut trace = TrainTrace::default();
    let mut rows: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
    let mut ys = Vec::with_capacity(cfg.batch_size);
    let mut wb = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed::derive(cfg.seed, &[epoch as u64]));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            rows.clear();
            ys.clear();
            wb.clear();
            for &i in batch {
                rows.push(xs.row(i));
                ys.push(targets[i]);
                wb.push(sample_w[i]);
            }
            let l = mlp.loss_and_grad(&rows, &ys, &wb, &mut ws, &mut grad);
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite loss {l} at epoch {epoch} (batch of {}, lr {})",
                    batch.len(),
                    cfg.learning_rate
                )));
            }
            epoch_loss += l * batch.len() as f64;
            opt.step(&mut mlp.params, &grad);
        }
        trace.epoch_loss.push(epoch_loss / x.rows() as f64);
    }
    if mlp.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Training("parameters diverged".into()));
    }
    Ok((TrainedNetwork { scaler, mlp }, trace))
}

/// Initialise a network for `hidden` and train it.
pub fn fit_network(x: &Matrix, y: &[u8], hidden: &[usize], cfg: &TrainConfig) -> Result<TrainedNetwork> {
    let arch = MlpArchitecture::new(x.cols(), hidden.to_vec())?;
    train(Mlp::init(arch, cfg.seed), x, y, cfg)
}
