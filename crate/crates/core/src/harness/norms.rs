//! Norms of the true parameters under each parameterization.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::cover_tree::{CoverTree, PathTable, TreeVariant};
use crate::error::{Error, Result};
use crate::metric_space::LabelMetric;
use crate::synthetic::{sample_true_params, SynthConfig};
use crate::tree_loss::{decompose_w, frobenius_norm};

#[derive(Debug, Clone, PartialEq)]
pub struct NormRecord {
    pub k: usize,
    pub seed: u64,
    pub k_prime: usize,
    pub w_norm: f64,
    pub u_norm: f64,
    /// Smallest-norm `V` whose path sums reproduce `W*`.
    pub v_norm: f64,
}

/// Minimum Frobenius norm solution of `A V = W` where `A` is the `k x k'`
/// path incidence matrix of `paths`: `V = A^T (A A^T)^{-1} W`.
pub fn min_norm_v(w: ArrayView2<f64>, paths: &PathTable) -> Result<Array2<f64>> {
    if paths.variant() != TreeVariant::V {
        return Err(Error::input("minimum-norm solve needs a V path table"));
    }
    let k = paths.k();
    if w.nrows() != k {
        return Err(Error::input(format!(
            "W has {} rows, path table has {k} classes",
            w.nrows()
        )));
    }
    let d = w.ncols();
    // (A A^T)_{ij} counts the rows shared by the paths of classes i and j.
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut member = vec![vec![false; paths.k_prime()]; k];
    for (i, path) in paths.paths().iter().enumerate() {
        for &r in path {
            member[i][r] = true;
        }
    }
    for i in 0..k {
        for j in 0..=i {
            let shared = paths.path(j).iter().filter(|&&r| member[i][r]).count() as f64;
            gram[(i, j)] = shared;
            gram[(j, i)] = shared;
        }
    }
    let rhs = DMatrix::from_fn(k, d, |i, c| w[[i, c]]);
    let z = gram
        .cholesky()
        .ok_or_else(|| Error::input("path incidence matrix is rank deficient"))?
        .solve(&rhs);
    let mut v = Array2::zeros((paths.k_prime(), d));
    for (i, path) in paths.paths().iter().enumerate() {
        for &r in path {
            for c in 0..d {
                v[[r, c]] += z[(i, c)];
            }
        }
    }
    Ok(v)
}

/// Norms of `W*`, its U decomposition and the minimum-norm V for each
/// class count in `ks`, averaged by the caller.
pub fn run_norms(
    ks: &[usize],
    d: usize,
    trials: usize,
    seed: u64,
    base: f64,
) -> Result<Vec<NormRecord>> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let jobs: Vec<(usize, u64)> = ks
        .iter()
        .flat_map(|&k| (0..trials as u64).map(move |t| (k, seed.wrapping_add(t))))
        .collect();
    jobs.par_iter()
        .map(|&(k, s)| {
            let cfg = SynthConfig { n: 1, d, k, sigma: 1.0, seed: s };
            let w = sample_true_params(&cfg)?;
            let metric = LabelMetric::from_rows(w.view())?;
            let tree = CoverTree::build(&metric, base)?;
            let u = decompose_w(w.view(), Arc::new(tree.derive_u_paths()))?;
            let v_paths = tree.derive_v_tree();
            let v = min_norm_v(w.view(), &v_paths)?;
            Ok(NormRecord {
                k,
                seed: s,
                k_prime: v_paths.k_prime(),
                w_norm: frobenius_norm(w.view()),
                u_norm: u.frobenius_norm(),
                v_norm: frobenius_norm(v.view()),
            })
        })
        .collect()
}
