//! Adagrad: per-parameter step sizes shrinking with accumulated squared
//! gradients.

use serde::{Deserialize, Serialize};

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdagradState {
    pub accum: Vec<f64>,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl AdagradState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            accum: vec![0.0; n_params],
            learning_rate,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// `G ← G + g²; θ ← θ − η·g / (√G + ε)`
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let lr = self.learning_rate;
        let eps = self.epsilon;
        for ((p, g2), &g) in params.iter_mut().zip(&mut self.accum).zip(grad) {
            *g2 += g * g;
            *p -= lr * g / (g2.sqrt() + eps);
        }
    }
}
