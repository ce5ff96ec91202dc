//! SVM-KNN: for every query, pick the k Manhattan-nearest training rows
//! and classify with a linear SVM trained on just those rows. The local SVM
//! is thrown away after the query. If the neighbours all share one label
//! that label is returned without training anything.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::neural::sigmoid;
use crate::par;
use crate::scaler::Standardizer;
use crate::svm::{linear_svm_fit, signed_labels, SvmParams};

/// Neighbourhood sizes searched by default.
pub const K_GRID: [usize; 13] = [3, 5, 7, 9, 10, 15, 20, 25, 30, 35, 40, 45, 50];
/// Soft-margin penalties searched by default.
pub const C_GRID: [f64; 4] = [0.1, 0.5, 1.0, 10.0];

#[inline]
pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Indices of the `k` rows of `train` closest to `x` in L1 distance,
/// nearest first. Equal distances are ordered by row index.
pub fn knn_query(train: &Matrix, x: &[f64], k: usize) -> Result<Vec<usize>> {
    let n = train.rows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("k = {k} must be in 1..={n}")));
    }
    let mut d: Vec<(f64, usize)> = train
        .iter_rows()
        .enumerate()
        .map(|(i, r)| (manhattan(r, x), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < n {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(cmp);
    Ok(d.into_iter().map(|(_, i)| i).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmKnnConfig {
    pub k: usize,
    pub c: f64,
}

impl Default for SvmKnnConfig {
    fn default() -> Self {
        Self { k: 5, c: 1.0 }
    }
}

/// Counts local solver invocations; shared across clones is not needed.
#[derive(Debug, Default)]
pub struct SolverCounter(AtomicUsize);

impl Clone for SolverCounter {
    fn clone(&self) -> Self {
        Self(AtomicUsize::new(self.0.load(Ordering::Relaxed)))
    }
}

impl PartialEq for SolverCounter {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmKnnModel {
    pub scaler: Standardizer,
    /// Standardized training rows.
    pub train: Matrix,
    pub labels: Vec<u8>,
    pub config: SvmKnnConfig,
    #[serde(skip)]
    solver_calls: SolverCounter,
}

/// Outcome of one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDecision {
    pub label: u8,
    /// Local SVM decision value; `None` when the neighbours were unanimous.
    pub decision: Option<f64>,
    pub converged: bool,
}

impl LocalDecision {
    pub fn solver_invoked(&self) -> bool {
        self.decision.is_some()
    }

    /// Monotone score in [0, 1]: the label itself for unanimous
    /// neighbourhoods, otherwise the logistic of the decision value. Not a
    /// calibrated probability.
    pub fn score(&self) -> f64 {
        match self.decision {
            Some(v) => sigmoid(v),
            None => self.label as f64,
        }
    }
}

impl SvmKnnModel {
    pub fn fit(x: &Matrix, y: &[u8], config: SvmKnnConfig) -> Result<Self> {
        if x.rows() != y.len() || x.rows() == 0 {
            return Err(Error::Data(format!("{} rows and {} labels", x.rows(), y.len())));
        }
        if config.k == 0 || config.k > x.rows() {
            return Err(Error::Config(format!(
                "k = {} must be in 1..={}",
                config.k,
                x.rows()
            )));
        }
        if !(config.c > 0.0 && config.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", config.c)));
        }
        let pos = y.iter().filter(|&&v| v == 1).count();
        if pos == 0 || pos == y.len() {
            return Err(Error::Data("SVM-KNN needs both classes in training data".into()));
        }
        let scaler = Standardizer::fit(x);
        Ok(Self {
            train: scaler.transform_matrix(x),
            scaler,
            labels: y.to_vec(),
            config,
            solver_calls: SolverCounter::default(),
        })
    }

    /// Number of local SVMs trained so far by this model instance.
    pub fn solver_invocations(&self) -> usize {
        self.solver_calls.0.load(Ordering::Relaxed)
    }

    pub fn decide(&self, x: &[f64]) -> Result<LocalDecision> {
        let z = self.scaler.transform(x);
        self.decide_standardized(&z)
    }

    fn decide_standardized(&self, z: &[f64]) -> Result<LocalDecision> {
        let idx = knn_query(&self.train, z, self.config.k)?;
        let first = self.labels[idx[0]];
        if idx.iter().all(|&i| self.labels[i] == first) {
            return Ok(LocalDecision {
                label: first,
                decision: None,
                converged: true,
            });
        }
        self.solver_calls.0.fetch_add(1, Ordering::Relaxed);
        let pts: Vec<&[f64]> = idx.iter().map(|&i| self.train.row(i)).collect();
        let ys = signed_labels(&idx.iter().map(|&i| self.labels[i]).collect::<Vec<_>>());
        let svm = linear_svm_fit(&pts, &ys, SvmParams::new(self.config.c))?;
        let v = svm.decision(z);
        Ok(LocalDecision {
            label: u8::from(v > 0.0),
            decision: Some(v),
            converged: svm.converged,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        self.decide(x).map(|d| d.label)
    }

    /// Decisions for every row of `x`; queries run in parallel.
    pub fn decide_all(&self, x: &Matrix) -> Result<Vec<LocalDecision>> {
        let z = self.scaler.transform_matrix(x);
        par::try_map_range(z.rows(), |i| self.decide_standardized(z.row(i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::linear_svm_fit;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn nearest_in_one_dimension() {
        let t = m(&[&[0.0], &[10.0]]);
        assert_eq!(knn_query(&t, &[1.0], 1).unwrap(), vec![0]);
        assert_eq!(knn_query(&t, &[10.0], 1).unwrap(), vec![1]);
        assert!(knn_query(&t, &[1.0], 3).is_err());
        assert!(knn_query(&t, &[1.0], 0).is_err());
    }

    #[test]
    fn manhattan_ties_resolve_by_index() {
        let t = m(&[&[0.0, 0.0], &[1.0, 1.0], &[3.0, 0.0]]);
        assert_eq!(manhattan(t.row(0), &[0.0, 1.0]), 1.0);
        assert_eq!(manhattan(t.row(1), &[0.0, 1.0]), 1.0);
        assert_eq!(manhattan(t.row(2), &[0.0, 1.0]), 4.0);
        assert_eq!(knn_query(&t, &[0.0, 1.0], 2).unwrap(), vec![0, 1]);
        assert_eq!(knn_query(&t, &[0.0, 1.0], 1).unwrap(), vec![0]);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(K_GRID.len() * C_GRID.len(), 52);
        assert_eq!(SvmKnnConfig::default(), SvmKnnConfig { k: 5, c: 1.0 });
    }

    #[test]
    fn unanimous_neighbourhood_skips_solver() {
        let x = m(&[&[0.0], &[0.1], &[0.2], &[10.0], &[10.1], &[10.2]]);
        let y = [1, 1, 1, 0, 0, 0];
        let model = SvmKnnModel::fit(&x, &y, SvmKnnConfig { k: 3, c: 1.0 }).unwrap();
        let d = model.decide(&[0.05]).unwrap();
        assert_eq!(d.label, 1);
        assert!(!d.solver_invoked());
        assert_eq!(model.solver_invocations(), 0);
        let d = model.decide(&[5.1]).unwrap();
        assert!(d.solver_invoked());
        assert_eq!(model.solver_invocations(), 1);
    }

    #[test]
    fn full_neighbourhood_matches_global_svm() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![t - 5.5, (t * 0.7).sin()]
            })
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.0)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let model = SvmKnnModel::fit(&x, &y, SvmKnnConfig { k: 12, c: 1.0 }).unwrap();
        let pts: Vec<&[f64]> = model.train.iter_rows().collect();
        let global = linear_svm_fit(&pts, &signed_labels(&y), SvmParams::new(1.0)).unwrap();
        for q in [-3.3, -0.2, 0.1, 2.0, 7.5] {
            let raw = [q, 0.3];
            let z = model.scaler.transform(&raw);
            assert_eq!(model.predict(&raw).unwrap(), global.predict(&z));
        }
    }

    #[test]
    fn fit_validation() {
        let x = m(&[&[0.0], &[1.0]]);
        assert!(SvmKnnModel::fit(&x, &[1, 1], SvmKnnConfig { k: 1, c: 1.0 }).is_err());
        assert!(SvmKnnModel::fit(&x, &[1, 0], SvmKnnConfig { k: 3, c: 1.0 }).is_err());
        assert!(SvmKnnModel::fit(&x, &[1, 0], SvmKnnConfig { k: 1, c: -1.0 }).is_err());
    }

    proptest! {
        #[test]
        fn manhattan_is_a_metric(
            a in prop::collection::vec(-100.0f64..100.0, 5),
            b in prop::collection::vec(-100.0f64..100.0, 5),
            c in prop::collection::vec(-100.0f64..100.0, 5),
        ) {
            prop_assert_eq!(manhattan(&a, &b), manhattan(&b, &a));
            prop_assert!(manhattan(&a, &c) <= manhattan(&a, &b) + manhattan(&b, &c) + 1e-9);
            prop_assert_eq!(manhattan(&a, &a), 0.0);
        }

        #[test]
        fn row_permutation_invariance(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 12..30),
            q in (-5.0f64..5.0, -5.0f64..5.0),
            shift in 1usize..11,
        ) {
            let rows: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
            let mut y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + 0.5 * r[1] > 0.0)).collect();
            y[0] = 1;
            y[1] = 0;
            let x = Matrix::from_rows(&rows).unwrap();
            let model = SvmKnnModel::fit(&x, &y, SvmKnnConfig { k: 5, c: 1.0 }).unwrap();
            let query = [q.0, q.1];
            // Skip queries whose k-th and (k+1)-th neighbours tie.
            let z = model.scaler.transform(&query);
            let mut d: Vec<f64> = model.train.iter_rows().map(|r| manhattan(r, &z)).collect();
            d.sort_by(f64::total_cmp);
            prop_assume!(d.windows(2).all(|w| w[1] - w[0] > 1e-9));

            let n = rows.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let xp = x.select_rows(&perm);
            let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
            let permuted = SvmKnnModel::fit(&xp, &yp, SvmKnnConfig { k: 5, c: 1.0 }).unwrap();
            // Neighbour sets agree; the local solver sees them in another
            // order, so compare the labels rather than raw decision values.
            let a = model.decide(&query).unwrap();
            let b = permuted.decide(&query).unwrap();
            if let (Some(u), Some(v)) = (a.decision, b.decision) {
                prop_assume!(u.abs() > 1e-3 && v.abs() > 1e-3);
            }
            prop_assert_eq!(a.label, b.label);
        }
    }
}
