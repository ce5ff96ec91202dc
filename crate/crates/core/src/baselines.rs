//! Comparison models: plain kNN, Gaussian naive Bayes, a global linear SVM
//! and a single network (see [`crate::neural`]).

use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::neural::sigmoid;
use crate::par;
use crate::scaler::Standardizer;
use crate::svm::{linear_svm_fit, signed_labels, LinearSvm, SvmParams};
use crate::svmknn::knn_query;

pub const NB_VAR_FLOOR: f64 = 1e-9;

pub(crate) fn check_training(x: &Matrix, y: &[u8], what: &str) -> Result<()> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Data(format!(
            "{what}: {} rows and {} labels",
            x.rows(),
            y.len()
        )));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Data(format!("{what} needs both classes in training data")));
    }
    Ok(())
}

/// Majority vote of the k Manhattan-nearest standardized neighbours. A
/// split vote goes to closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnClassifier {
    pub scaler: Standardizer,
    pub train: Matrix,
    pub labels: Vec<u8>,
    pub k: usize,
}

impl KnnClassifier {
    pub fn fit(x: &Matrix, y: &[u8], k: usize) -> Result<Self> {
        check_training(x, y, "kNN")?;
        if k == 0 || k > x.rows() {
            return Err(Error::Config(format!("k = {k} must be in 1..={}", x.rows())));
        }
        let scaler = Standardizer::fit(x);
        Ok(Self {
            train: scaler.transform_matrix(x),
            scaler,
            labels: y.to_vec(),
            k,
        })
    }

    /// Fraction of closed neighbours.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let z = self.scaler.transform(x);
        let idx = knn_query(&self.train, &z, self.k)?;
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        Ok(pos as f64 / self.k as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        self.score(x).map(|s| u8::from(s >= 0.5))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Index 0 is open, 1 is closed.
    pub prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(x: &Matrix, y: &[u8]) -> Result<Self> {
        check_training(x, y, "naive Bayes")?;
        let d = x.cols();
        let mut count = [0usize; 2];
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        for (row, &c) in x.iter_rows().zip(y) {
            let c = c as usize;
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..2 {
            mean[c].iter_mut().for_each(|m| *m /= count[c] as f64);
        }
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for (row, &c) in x.iter_rows().zip(y) {
            let c = c as usize;
            for ((s, v), m) in var[c].iter_mut().zip(row).zip(&mean[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..2 {
            var[c]
                .iter_mut()
                .for_each(|s| *s = (*s / count[c] as f64).max(NB_VAR_FLOOR));
        }
        let n = y.len() as f64;
        Ok(Self {
            prior: [count[0] as f64 / n, count[1] as f64 / n],
            mean,
            var,
        })
    }

    /// `ln prior + Σ ln N(x_j; μ, σ²)` for each class.
    pub fn log_scores(&self, x: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.prior[c].ln()
                + x.iter()
                    .zip(&self.mean[c])
                    .zip(&self.var[c])
                    .map(|((v, m), s)| {
                        -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s)
                    })
                    .sum::<f64>();
        }
        out
    }

    /// Posterior probability of closed.
    pub fn score(&self, x: &[f64]) -> f64 {
        let [s0, s1] = self.log_scores(x);
        sigmoid(s1 - s0)
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        let [s0, s1] = self.log_scores(x);
        u8::from(s1 >= s0)
    }
}

/// One linear SVM over the whole standardized training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSvm {
    pub scaler: Standardizer,
    pub svm: LinearSvm,
}

impl GlobalSvm {
    pub fn fit(x: &Matrix, y: &[u8], c: f64) -> Result<Self> {
        check_training(x, y, "SVM")?;
        let scaler = Standardizer::fit(x);
        let z = scaler.transform_matrix(x);
        let pts: Vec<&[f64]> = z.iter_rows().collect();
        let svm = linear_svm_fit(&pts, &signed_labels(y), SvmParams::new(c))?;
        Ok(Self { scaler, svm })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.svm.decision(&self.scaler.transform(x))
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }
}

/// Scores for every row, in parallel.
pub(crate) fn score_rows<F>(x: &Matrix, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    par::try_map_range(x.rows(), |i| f(x.row(i)))
}
