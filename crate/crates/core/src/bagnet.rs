//! Neural-Network-Adding Bootstrap: member networks trained on bootstrap
//! resamples and combined by 0.632-bootstrap accuracy weights.
//!
//! Member `i` scores `r_i = 0.632·acc_oob_i + 0.368·acc_train_i`, where
//! `acc_oob_i` is its accuracy on the rows its resample left out and
//! `acc_train_i` its accuracy on the whole training set. The ensemble output
//! is `Σ w_i·p_i` with `w_i = r_i / Σ r_j`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::neural::{fit_network, ClassWeightMode, TrainConfig, TrainedNetwork};
use crate::{par, seed};

pub const DEFAULT_MEMBERS: usize = 50;
pub const OOB_WEIGHT: f64 = 0.632;
pub const TRAIN_WEIGHT: f64 = 0.368;
/// Seed offset per redraw when a resample holds a single class.
pub const RETRY_SEED_OFFSET: u64 = 10_000;
pub const MAX_RETRIES: u32 = 5;

/// Hidden-layer grid searched by default.
pub const HIDDEN_GRID: [&[usize]; 18] = [
    &[2],
    &[4],
    &[8],
    &[10],
    &[16],
    &[24],
    &[32],
    &[4, 2],
    &[8, 4],
    &[16, 8],
    &[24, 16],
    &[32, 16],
    &[32, 24],
    &[64, 32],
    &[128, 32],
    &[128, 64],
    &[192, 128],
    &[256, 192],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapSample {
    pub in_bag: Vec<usize>,
    /// Sorted indices never drawn.
    pub out_of_bag: Vec<usize>,
    pub seed: u64,
}

pub fn bootstrap_sample(n: usize, seed_: u64) -> Result<BootstrapSample> {
    if n < 2 {
        return Err(Error::Config(format!("bootstrap needs n >= 2, got {n}")));
    }
    let mut rng = seed::rng(seed_);
    let in_bag: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut seen = vec![false; n];
    for &i in &in_bag {
        seen[i] = true;
    }
    let out_of_bag = (0..n).filter(|&i| !seen[i]).collect();
    Ok(BootstrapSample {
        in_bag,
        out_of_bag,
        seed: seed_,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagnetConfig {
    pub members: usize,
    pub hidden: Vec<usize>,
    /// Per-member training settings; the seed field is ignored and derived
    /// from the master seed instead.
    pub train: TrainConfig,
}

impl Default for BagnetConfig {
    fn default() -> Self {
        Self {
            members: DEFAULT_MEMBERS,
            hidden: vec![192, 128],
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub network: TrainedNetwork,
    pub acc_oob: f64,
    pub acc_train: f64,
    pub raw_weight: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagnetModel {
    pub members: Vec<Member>,
    pub master_seed: u64,
    pub threshold: f64,
}

/// Raw and normalized aggregation weights for `(acc_oob, acc_train)` pairs.
/// Falls back to uniform weights when every raw weight is zero.
pub fn aggregation_weights(accuracies: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let raw: Vec<f64> = accuracies
        .iter()
        .map(|&(oob, train)| OOB_WEIGHT * oob + TRAIN_WEIGHT * train)
        .collect();
    let total: f64 = raw.iter().sum();
    let norm = if total > 0.0 {
        raw.iter().map(|r| r / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    };
    (raw, norm)
}

fn accuracy(net: &TrainedNetwork, x: &Matrix, y: &[u8], rows: Option<&[usize]>) -> f64 {
    let hits = match rows {
        Some(idx) => idx.iter().filter(|&&i| net.predict(x.row(i)) == y[i]).count(),
        None => net
            .predict_proba_matrix(x)
            .iter()
            .zip(y)
            .filter(|(p, &t)| u8::from(**p > 0.5) == t)
            .count(),
    };
    let n = rows.map_or(y.len(), <[usize]>::len);
    hits as f64 / n as f64
}

fn fit_member(
    x: &Matrix,
    y: &[u8],
    cfg: &BagnetConfig,
    master_seed: u64,
    i: usize,
) -> Result<(TrainedNetwork, f64, f64)> {
    let base = master_seed.wrapping_add(i as u64);
    let mut attempt = 0;
    let sample = loop {
        let s = bootstrap_sample(x.rows(), base.wrapping_add(RETRY_SEED_OFFSET * attempt as u64))?;
        let pos = s.in_bag.iter().filter(|&&j| y[j] == 1).count();
        if pos > 0 && pos < s.in_bag.len() {
            break s;
        }
        if attempt == MAX_RETRIES {
            return Err(Error::Training(format!(
                "member {i}: every bootstrap resample held one class ({} tries)",
                MAX_RETRIES + 1
            )));
        }
        attempt += 1;
    };
    let xb = x.select_rows(&sample.in_bag);
    let yb: Vec<u8> = sample.in_bag.iter().map(|&j| y[j]).collect();
    let tc = TrainConfig {
        seed: seed::derive(master_seed, &[i as u64]),
        ..cfg.train.clone()
    };
    let net = fit_network(&xb, &yb, &cfg.hidden, &tc)?;
    let acc_train = accuracy(&net, x, y, None);
    let acc_oob = if sample.out_of_bag.is_empty() {
        acc_train
    } else {
        accuracy(&net, x, y, Some(&sample.out_of_bag))
    };
    Ok((net, acc_oob, acc_train))
}

impl BagnetModel {
    pub fn fit(x: &Matrix, y: &[u8], cfg: &BagnetConfig, master_seed: u64) -> Result<Self> {
        if cfg.members == 0 {
            return Err(Error::Config("BAGNET needs at least one member".into()));
        }
        if x.rows() != y.len() {
            return Err(Error::Data(format!("{} rows and {} labels", x.rows(), y.len())));
        }
        let pos = y.iter().filter(|&&v| v == 1).count();
        if pos == 0 || pos == y.len() {
            return Err(Error::Data("BAGNET needs both classes in training data".into()));
        }
        let mut cfg = cfg.clone();
        cfg.train.class_weight = ClassWeightMode::Balanced;
        let fitted = par::try_map_range(cfg.members, |i| fit_member(x, y, &cfg, master_seed, i))?;
        let acc: Vec<(f64, f64)> = fitted.iter().map(|&(_, o, t)| (o, t)).collect();
        let (raw, norm) = aggregation_weights(&acc);
        let members = fitted
            .into_iter()
            .zip(raw.into_iter().zip(norm))
            .map(|((network, acc_oob, acc_train), (raw_weight, weight))| Member {
                network,
                acc_oob,
                acc_train,
                raw_weight,
                weight,
            })
            .collect();
        Ok(Self {
            members,
            master_seed,
            threshold: 0.5,
        })
    }

    /// Assemble a model from already-trained members.
    pub fn from_members(networks: Vec<(TrainedNetwork, f64, f64)>, master_seed: u64) -> Result<Self> {
        if networks.is_empty() {
            return Err(Error::Config("BAGNET needs at least one member".into()));
        }
        let acc: Vec<(f64, f64)> = networks.iter().map(|&(_, o, t)| (o, t)).collect();
        let (raw, norm) = aggregation_weights(&acc);
        let members = networks
            .into_iter()
            .zip(raw.into_iter().zip(norm))
            .map(|((network, acc_oob, acc_train), (raw_weight, weight))| Member {
                network,
                acc_oob,
                acc_train,
                raw_weight,
                weight,
            })
            .collect();
        Ok(Self {
            members,
            master_seed,
            threshold: 0.5,
        })
    }

    /// The 0.632 bootstrap accuracy estimate: the mean raw member weight.
    pub fn acc_boot(&self) -> f64 {
        self.members.iter().map(|m| m.raw_weight).sum::<f64>() / self.members.len() as f64
    }

    /// Weighted member combination from per-member outputs.
    ///
    /// Computed as `p_min + Σ w_i·(p_i − p_min)`, which equals `Σ w_i·p_i`
    /// when the weights sum to one but is exact when all members agree.
    pub fn combine(&self, outputs: &[f64]) -> f64 {
        let lo = outputs.iter().copied().fold(f64::INFINITY, f64::min);
        let spread: f64 = self
            .members
            .iter()
            .zip(outputs)
            .map(|(m, p)| m.weight * (p - lo))
            .sum();
        (lo + spread).clamp(0.0, 1.0)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let outputs: Vec<f64> = self.members.iter().map(|m| m.network.predict_proba(x)).collect();
        self.combine(&outputs)
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba(x) > self.threshold)
    }

    pub fn predict_proba_matrix(&self, x: &Matrix) -> Vec<f64> {
        let per_member: Vec<Vec<f64>> =
            par::map_slice(&self.members, |m| m.network.predict_proba_matrix(x));
        let mut outputs = vec![0.0; self.members.len()];
        (0..x.rows())
            .map(|r| {
                for (o, col) in outputs.iter_mut().zip(&per_member) {
                    *o = col[r];
                }
                self.combine(&outputs)
            })
            .collect()
    }
}
