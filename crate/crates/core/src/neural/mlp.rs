//! Fully connected sigmoid network with a single sigmoid output.
//!
//! Parameters live in one flat buffer. Layer `l` owns a `fan_in × fan_out`
//! row-major weight block followed by its `fan_out` biases.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Probabilities are clamped to `[P_CLAMP, 1 − P_CLAMP]` inside the log-loss.
pub const P_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input: usize,
    pub hidden: Vec<usize>,
}

impl MlpArchitecture {
    /// Zero hidden layers (plain logistic regression) is accepted; more
    /// than two is not.
    pub fn new(input: usize, hidden: Vec<usize>) -> Result<Self> {
        if input == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("layer widths must be >= 1".into()));
        }
        if hidden.len() > 2 {
            return Err(Error::Config(format!(
                "at most 2 hidden layers supported, got {}",
                hidden.len()
            )));
        }
        Ok(Self { input, hidden })
    }

    /// Widths from input to the single output unit.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input);
        w.extend(&self.hidden);
        w.push(1);
        w
    }

    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.widths().windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: MlpArchitecture,
    pub params: Vec<f64>,
    pub seed: u64,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-sample activations, reused across forward/backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(arch: &MlpArchitecture) -> Self {
        let widths = arch.widths();
        Self {
            acts: widths.iter().map(|&w| vec![0.0; w]).collect(),
            deltas: widths[1..].iter().map(|&w| vec![0.0; w]).collect(),
        }
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: MlpArchitecture, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut params = vec![0.0; arch.n_params()];
        let mut off = 0;
        for (fan_in, fan_out) in arch.layer_shapes() {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[off..off + fan_in * fan_out] {
                *p = rng.gen_range(-limit..=limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        Self { arch, params, seed }
    }

    pub fn from_params(arch: MlpArchitecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.n_params() {
            return Err(Error::Data(format!(
                "expected {} parameters, got {}",
                arch.n_params(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Data("non-finite network parameter".into()));
        }
        Ok(Self {
            arch,
            params,
            seed: 0,
        })
    }

    pub(crate) fn slots(&self) -> Vec<LayerSlot> {
        let mut off = 0;
        self.arch
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let s = LayerSlot {
                    fan_in,
                    fan_out,
                    w: off,
                    b: off + fan_in * fan_out,
                };
                off += fan_in * fan_out + fan_out;
                s
            })
            .collect()
    }

    /// Weight block of layer `l` (`fan_in × fan_out`, row-major).
    pub fn weights(&self, l: usize) -> &[f64] {
        let s = self.slots()[l];
        &self.params[s.w..s.w + s.fan_in * s.fan_out]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let s = self.slots()[l];
        &self.params[s.b..s.b + s.fan_out]
    }

    fn forward_ws(&self, slots: &[LayerSlot], x: &[f64], ws: &mut Workspace) -> f64 {
        ws.acts[0].copy_from_slice(x);
        for (l, s) in slots.iter().enumerate() {
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            out.copy_from_slice(&self.params[s.b..s.b + s.fan_out]);
            let w = &self.params[s.w..s.w + s.fan_in * s.fan_out];
            for (i, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &w[i * s.fan_out..(i + 1) * s.fan_out];
                for (o, &wij) in out.iter_mut().zip(row) {
                    *o += a * wij;
                }
            }
            out.iter_mut().for_each(|z| *z = sigmoid(*z));
        }
        ws.acts[slots.len()][0]
    }

    /// Output probability for one (already standardized) input.
    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut ws = Workspace::new(&self.arch);
        self.forward_ws(&self.slots(), x, &mut ws)
    }

    /// Batch forward pass reusing one workspace.
    pub fn forward_many<'a>(&self, xs: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
        let slots = self.slots();
        let mut ws = Workspace::new(&self.arch);
        xs.map(|x| self.forward_ws(&slots, x, &mut ws)).collect()
    }

    /// Accumulate `scale · ∂ℓ/∂θ` of one weighted sample into `grad` and
    /// return its unscaled weighted log-loss.
    fn backprop_one(
        &self,
        slots: &[LayerSlot],
        x: &[f64],
        y: f64,
        weight: f64,
        scale: f64,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        let p = self.forward_ws(slots, x, ws);
        let pc = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
        let loss = -weight * (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());

        let last = slots.len() - 1;
        // Sigmoid output with cross-entropy: dℓ/dz = w·(p − y).
        ws.deltas[last][0] = weight * (p - y) * scale;
        for l in (0..slots.len()).rev() {
            let s = slots[l];
            let input = &ws.acts[l];
            let delta = &ws.deltas[l];
            let gw = &mut grad[s.w..s.w + s.fan_in * s.fan_out];
            for (i, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &mut gw[i * s.fan_out..(i + 1) * s.fan_out];
                for (g, &d) in row.iter_mut().zip(delta) {
                    *g += a * d;
                }
            }
            for (g, &d) in grad[s.b..s.b + s.fan_out].iter_mut().zip(delta) {
                *g += d;
            }
            if l > 0 {
                let w = &self.params[s.w..s.w + s.fan_in * s.fan_out];
                let (lower, upper) = ws.deltas.split_at_mut(l);
                let prev = &mut lower[l - 1];
                let delta = &upper[0];
                for (i, pd) in prev.iter_mut().enumerate() {
                    let row = &w[i * s.fan_out..(i + 1) * s.fan_out];
                    let back: f64 = row.iter().zip(delta).map(|(w, d)| w * d).sum();
                    let a = ws.acts[l][i];
                    *pd = back * a * (1.0 - a);
                }
            }
        }
        loss
    }

    /// Mean weighted log-loss and its gradient over a batch of row indices.
    pub(crate) fn loss_and_grad(
        &self,
        rows: &[&[f64]],
        targets: &[f64],
        weights: &[f64],
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let slots = self.slots();
        let scale = 1.0 / rows.len() as f64;
        let mut total = 0.0;
        for ((x, &y), &w) in rows.iter().zip(targets).zip(weights) {
            total += self.backprop_one(&slots, x, y, w, scale, ws, grad);
        }
        total * scale
    }
}

/// Weighted mean log-loss of `mlp` on a batch.
pub fn loss(mlp: &Mlp, batch: &[(&[f64], u8)], weights: ClassWeights) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let total: f64 = batch
        .iter()
        .map(|&(x, y)| {
            let p = mlp.forward(x).clamp(P_CLAMP, 1.0 - P_CLAMP);
            let y = y as f64;
            weights.of(y) * -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / batch.len() as f64)
}

/// Gradient of [`loss`] with respect to the flat parameter vector.
pub fn gradient(mlp: &Mlp, batch: &[(&[f64], u8)], weights: ClassWeights) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let rows: Vec<&[f64]> = batch.iter().map(|b| b.0).collect();
    let ys: Vec<f64> = batch.iter().map(|b| b.1 as f64).collect();
    let ws_: Vec<f64> = ys.iter().map(|&y| weights.of(y)).collect();
    let mut grad = vec![0.0; mlp.params.len()];
    let mut ws = Workspace::new(&mlp.arch);
    mlp.loss_and_grad(&rows, &ys, &ws_, &mut ws, &mut grad);
    Ok(grad)
}

/// Per-class loss weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub positive: f64,
    pub negative: f64,
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights {
        positive: 1.0,
        negative: 1.0,
    };

    /// `w_c = n / (2·n_c)`, so both classes carry equal total weight.
    pub fn balanced(labels: &[u8]) -> Result<Self> {
        let n = labels.len();
        let pos = labels.iter().filter(|&&y| y == 1).count();
        let neg = n - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::Data(
                "balanced class weights need both classes present".into(),
            ));
        }
        Ok(Self {
            positive: n as f64 / (2.0 * pos as f64),
            negative: n as f64 / (2.0 * neg as f64),
        })
    }

    #[inline]
    pub fn of(&self, y: f64) -> f64 {
        if y >= 0.5 {
            self.positive
        } else {
            self.negative
        }
    }
}
