//! Norm bounds on the U decomposition of a true parameter matrix.

use std::sync::Arc;

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::cover_tree::CoverTree;
use crate::error::{Error, Result};
use crate::metric_space::LabelMetric;
use crate::synthetic::{sample_true_params, SynthConfig};
use crate::tree_loss::{decompose_w, frobenius_norm};

/// Slack for comparisons that hold exactly in real arithmetic.
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub seed: Option<u64>,
    pub k: usize,
    /// Largest row norm of `W*`.
    pub b: f64,
    pub lambda: f64,
    /// Estimated doubling dimension of the label metric.
    pub c_estimate: f64,
    pub u_norm: f64,
    pub w_norm: f64,
    /// `2 sqrt(k) B`.
    pub bound_lemma2: f64,
    /// `lambda B sqrt(log2 k) / sqrt(2)` when `c <= 1`, otherwise
    /// `sqrt(5) lambda B sqrt(k^(1 - 1/c))`.
    pub bound_lemma3: f64,
    pub lemma2_satisfied: bool,
    pub lemma3_satisfied: bool,
    /// `‖W*‖_F <= sqrt(k) B`.
    pub w_bound_satisfied: bool,
}

/// Decomposes `w_star` over the U-tree of its own row metric and evaluates
/// both norm bounds.
pub fn check_bounds(w_star: ArrayView2<f64>, base: f64, lambda: f64) -> Result<TheoryReport> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be >= 1, got {lambda}")));
    }
    let k = w_star.nrows();
    let metric = LabelMetric::from_rows(w_star)?;
    let tree = CoverTree::build(&metric, base)?;
    let u = decompose_w(w_star, Arc::new(tree.derive_u_paths()))?;

    let b = w_star
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max);
    let c = metric.estimate_doubling_constant().dimension;
    let kf = k as f64;
    let bound_lemma2 = 2.0 * kf.sqrt() * b;
    let bound_lemma3 = if c <= 1.0 {
        lambda * b * kf.log2().sqrt() / 2f64.sqrt()
    } else {
        5f64.sqrt() * lambda * b * kf.powf(1.0 - 1.0 / c).sqrt()
    };
    let u_norm = u.frobenius_norm();
    let w_norm = frobenius_norm(w_star);
    let within = |value: f64, bound: f64| value <= bound * (1.0 + ROUNDING);
    Ok(TheoryReport {
        seed: None,
        k,
        b,
        lambda,
        c_estimate: c,
        u_norm,
        w_norm,
        bound_lemma2,
        bound_lemma3,
        lemma2_satisfied: within(u_norm, bound_lemma2),
        lemma3_satisfied: within(u_norm, bound_lemma3),
        w_bound_satisfied: within(w_norm, kf.sqrt() * b),
    })
}

/// [`check_bounds`] on `trials` Gaussian `k x d` matrices, seeds
/// `seed..seed + trials`.
pub fn run_bounds(
    k: usize,
    d: usize,
    trials: usize,
    seed: u64,
    base: f64,
    lambda: f64,
) -> Result<Vec<TheoryReport>> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_add(t);
            let cfg = SynthConfig { n: 1, d, k, sigma: 1.0, seed: s };
            let w = sample_true_params(&cfg)?;
            let mut report = check_bounds(w.view(), base, lambda)?;
            report.seed = Some(s);
            Ok(report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_class() {
        let w = array![[3.0, 4.0]];
        let r = check_bounds(w.view(), 2.0, 1.0).unwrap();
        assert_eq!(r.u_norm, 5.0);
        assert_eq!(r.w_norm, 5.0);
        assert_eq!(r.b, 5.0);
        assert_eq!(r.bound_lemma2, 10.0);
        assert!(r.lemma2_satisfied && r.w_bound_satisfied);
    }

    #[test]
    fn lemma3_branches() {
        // Two points: every ball is covered by one half-radius ball around
        // either member, so c = 0 and the log branch applies.
        let w = array![[0.0, 0.0], [1.0, 0.0]];
        let r = check_bounds(w.view(), 2.0, 2.0).unwrap();
        assert!(r.c_estimate <= 1.0);
        assert!((r.bound_lemma3 - 2.0 * 1.0 * 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_small_lambda() {
        assert!(check_bounds(array![[1.0]].view(), 2.0, 0.5).is_err());
    }

    #[test]
    fn reports_are_seeded() {
        let a = run_bounds(8, 3, 4, 11, 2.0, 1.0).unwrap();
        assert_eq!(a, run_bounds(8, 3, 4, 11, 2.0, 1.0).unwrap());
        assert_eq!(a[2].seed, Some(13));
        assert!(a.iter().all(|r| r.lemma2_satisfied && r.w_bound_satisfied));
    }
}
