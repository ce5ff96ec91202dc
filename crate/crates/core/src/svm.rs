//! Linear soft-margin SVM solved by dual coordinate descent.
//!
//! The bias is folded in as an extra constant feature of value 1, so the
//! problem solved is
//!
//! ```text
//! min_{w,b}  ½(‖w‖² + b²) + C · Σ max(0, 1 − yᵢ(w·xᵢ + b))
//! ```
//!
//! through its box-constrained dual `0 ≤ αᵢ ≤ C`. Coordinates are swept in
//! input order, which makes the result a pure function of the input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the largest projected-gradient magnitude of a sweep is below this.
    pub tol: f64,
    /// Maximum number of full sweeps over the data.
    pub max_iter: usize,
}

impl SvmParams {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub params: SvmParams,
    /// False when `max_iter` sweeps ran out before the stopping rule held.
    pub converged: bool,
    pub sweeps: usize,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvm {
    #[inline]
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// Class 1 for a strictly positive decision value, else 0.
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }
}

/// Map 0/1 labels to -1/+1.
pub fn signed_labels(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect()
}

/// Sum of hinge losses `max(0, 1 − y(w·x + b))`.
pub fn hinge_loss(weights: &[f64], bias: f64, points: &[&[f64]], labels: &[f64]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(x, &y)| (1.0 - y * (dot(weights, x) + bias)).max(0.0))
        .sum()
}

/// `½(‖w‖² + b²) + C·Σ hinge`, the objective minimised by [`linear_svm_fit`].
pub fn primal_objective(weights: &[f64], bias: f64, points: &[&[f64]], labels: &[f64], c: f64) -> f64 {
    0.5 * (dot(weights, weights) + bias * bias) + c * hinge_loss(weights, bias, points, labels)
}

pub fn linear_svm_fit(points: &[&[f64]], labels: &[f64], params: SvmParams) -> Result<LinearSvm> {
    let n = points.len();
    if n == 0 || labels.len() != n {
        return Err(Error::Data(format!("{n} points and {} labels", labels.len())));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {}", params.c)));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Data("SVM labels must be -1 or +1".into()));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::Data("SVM training needs both classes".into()));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::Data("SVM points have inconsistent widths".into()));
    }

    let c = params.c;
    let diag: Vec<f64> = points.iter().map(|x| dot(x, x) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < params.max_iter {
        sweeps += 1;
        let mut max_violation: f64 = 0.0;
        for i in 0..n {
            let y = labels[i];
            let x = points[i];
            let g = y * (dot(&w, x) + b) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y;
                if step != 0.0 {
                    for (wj, xj) in w.iter_mut().zip(x.iter()) {
                        *wj += step * xj;
                    }
                    b += step;
                }
            }
        }
        if max_violation < params.tol {
            converged = true;
            break;
        }
    }

    Ok(LinearSvm {
        weights: w,
        bias: b,
        params,
        converged,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_symmetric_pair() {
        let a = [-1.0];
        let b = [1.0];
        let svm = linear_svm_fit(&[&a, &b], &[-1.0, 1.0], SvmParams { c: 1e3, tol: 1e-10, max_iter: 100_000 }).unwrap();
        assert!(svm.converged);
        assert_abs_diff_eq!(svm.weights[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(svm.bias, 0.0, epsilon = 1e-6);
        assert_eq!(svm.predict(&[0.5]), 1);
        assert_eq!(svm.predict(&[-0.5]), 0);
    }

    #[test]
    fn duplicated_data_with_half_c_gives_same_solution() {
        let pts: Vec<[f64; 2]> = vec![[0.0, 1.0], [1.0, 2.0], [2.0, 0.5], [3.0, 3.0], [-1.0, 0.0], [0.5, -1.0]];
        let y = [1.0, 1.0, -1.0, 1.0, -1.0, -1.0];
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let p = SvmParams { c: 2.0, tol: 1e-10, max_iter: 100_000 };
        let a = linear_svm_fit(&refs, &y, p).unwrap();
        let mut dup = refs.clone();
        dup.extend(refs.iter().copied());
        let ydup: Vec<f64> = y.iter().chain(y.iter()).copied().collect();
        let b = linear_svm_fit(&dup, &ydup, SvmParams { c: 1.0, ..p }).unwrap();
        for (u, v) in a.weights.iter().zip(&b.weights) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(a.bias, b.bias, epsilon = 1e-6);
    }

    #[test]
    fn separable_set_has_zero_hinge() {
        let pts = [[2.0, 2.0], [3.0, 1.0], [2.5, 3.0], [-2.0, -1.0], [-1.0, -3.0], [-3.0, -2.0]];
        let y = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let svm = linear_svm_fit(&refs, &y, SvmParams { c: 100.0, tol: 1e-10, max_iter: 100_000 }).unwrap();
        assert!(hinge_loss(&svm.weights, svm.bias, &refs, &y) < 1e-8);
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let pts = [[0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [0.2, 0.3]];
        let y = [1.0, -1.0, 1.0, -1.0];
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let svm = linear_svm_fit(&refs, &y, SvmParams { c: 10.0, tol: 1e-14, max_iter: 1 }).unwrap();
        assert!(!svm.converged);
        assert_eq!(svm.sweeps, 1);
    }

    #[test]
    fn input_validation() {
        let a = [0.0];
        assert!(linear_svm_fit(&[&a, &a], &[1.0, 1.0], SvmParams::new(1.0)).is_err());
        assert!(linear_svm_fit(&[&a, &a], &[1.0, 0.0], SvmParams::new(1.0)).is_err());
        assert!(linear_svm_fit(&[&a, &a], &[1.0, -1.0], SvmParams::new(0.0)).is_err());
        assert!(linear_svm_fit(&[], &[], SvmParams::new(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn never_worse_than_trivial_solution(
            raw in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, any::<bool>()), 4..30),
            c in 0.05f64..20.0,
        ) {
            let pts: Vec<[f64; 2]> = raw.iter().map(|&(a, b, _)| [a, b]).collect();
            let mut y: Vec<f64> = raw.iter().map(|&(_, _, s)| if s { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
            let p = SvmParams { tol: 1e-8, max_iter: 200_000, ..SvmParams::new(c) };
            let svm = linear_svm_fit(&refs, &y, p).unwrap();
            let obj = primal_objective(&svm.weights, svm.bias, &refs, &y, c);
            let pos = y.iter().filter(|&&v| v > 0.0).count();
            let majority = if 2 * pos >= y.len() { 1.0 } else { -1.0 };
            let trivial = primal_objective(&[0.0, 0.0], majority, &refs, &y, c);
            // Duality gap at stopping is at most n·C·tol.
            let slack = y.len() as f64 * c * p.tol + 1e-9;
            prop_assert!(obj <= trivial + slack, "obj {obj} trivial {trivial}");
        }
    }
}
