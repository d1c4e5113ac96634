//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's own loss, gradient or reconstruction code.

#![allow(dead_code)]

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use treeloss::cover_tree::CoverTree;
use treeloss::metric_space::LabelMetric;
use treeloss::{PathTable, ParamMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || scale * rng.sample::<f64, _>(StandardNormal))
}

/// Euclidean metric on `k` random points in `m` dimensions.
pub fn random_metric(rng: &mut ChaCha8Rng, k: usize, m: usize) -> LabelMetric {
    LabelMetric::from_rows(gaussian(rng, k, m, 1.0).view()).unwrap()
}

pub fn random_tree(rng: &mut ChaCha8Rng, k: usize, base: f64) -> CoverTree {
    let m = rng.random_range(1..=6);
    CoverTree::build(&random_metric(rng, k, m), base).unwrap()
}

/// `w_i` as the plain sum of the rows listed in `P_i`.
pub fn path_walk_w(entries: ArrayView2<f64>, paths: &PathTable) -> Array2<f64> {
    let mut w = Array2::zeros((paths.k(), entries.ncols()));
    for i in 0..paths.k() {
        for &r in paths.path(i) {
            let row = entries.row(r).to_owned();
            let mut target = w.row_mut(i);
            target += &row;
        }
    }
    w
}

/// Flat cross entropy `logsumexp(-W x) + w_y . x`, summed in f64 with a max
/// shift.
pub fn flat_loss(w: ArrayView2<f64>, x: ArrayView1<f64>, y: usize) -> f64 {
    let scores: Vec<f64> = w.rows().into_iter().map(|r| -r.dot(&x)).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[y]
}

/// Loss of any parameterization through the path-walk reconstruction.
pub fn oracle_loss(p: &ParamMatrix, x: ArrayView1<f64>, y: usize) -> f64 {
    match p.paths() {
        None => flat_loss(p.entries(), x, y),
        Some(paths) => flat_loss(path_walk_w(p.entries(), paths).view(), x, y),
    }
}

/// Central finite differences of [`oracle_loss`] in every entry.
pub fn fd_gradient(p: &ParamMatrix, x: ArrayView1<f64>, y: usize, h: f64) -> Array2<f64> {
    let base = p.entries().to_owned();
    let mut grad = Array2::zeros(base.raw_dim());
    for idx in ndarray::indices(base.raw_dim()) {
        let mut plus = base.clone();
        plus[idx] += h;
        let mut minus = base.clone();
        minus[idx] -= h;
        let fp = oracle_loss(&p.with_entries(plus).unwrap(), x, y);
        let fm = oracle_loss(&p.with_entries(minus).unwrap(), x, y);
        grad[idx] = (fp - fm) / (2.0 * h);
    }
    grad
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn max_relative_error(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let scale = a.iter().chain(b.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

/// Edge-by-edge check of the covering bound and of nesting (every node with
/// children has a child carrying its own label). Returns a description of
/// each failure.
pub fn brute_force_violations(tree: &CoverTree, metric: &LabelMetric) -> Vec<String> {
    let mut out = Vec::new();
    for (id, node) in tree.nodes().iter().enumerate() {
        if let Some(p) = node.parent {
            let parent = tree.node(p);
            let d = metric.distance(node.label, parent.label);
            let bound = tree.base().powi(-(parent.depth as i32));
            if d > bound {
                out.push(format!("node {id}: distance {d} exceeds {bound}"));
            }
            if node.depth != parent.depth + 1 {
                out.push(format!("node {id}: depth {} under {}", node.depth, parent.depth));
            }
        }
        if !node.children.is_empty()
            && !node.children.iter().any(|&c| tree.node(c).label == node.label)
        {
            out.push(format!("node {id}: no same-label child"));
        }
    }
    let mut seen = vec![false; tree.k()];
    for node in tree.nodes() {
        if node.children.is_empty() {
            if seen[node.label] {
                out.push(format!("label {} has two leaves", node.label));
            }
            seen[node.label] = true;
        }
    }
    if let Some(l) = seen.iter().position(|s| !s) {
        out.push(format!("label {l} has no leaf"));
    }
    out
}

/// Walks from the leaf of `label` to the root.
fn ancestry(tree: &CoverTree, label: usize) -> Vec<usize> {
    let leaf = tree
        .nodes()
        .iter()
        .position(|n| n.label == label && n.children.is_empty())
        .unwrap();
    let mut chain = vec![leaf];
    while let Some(p) = tree.node(*chain.last().unwrap()).parent {
        chain.push(p);
    }
    chain
}

/// Expected U path: the distinct labels met walking up from the leaf.
pub fn expected_u_path(tree: &CoverTree, label: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for id in ancestry(tree, label) {
        let l = tree.node(id).label;
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

/// Expected V path length: the leaf plus every branching ancestor.
pub fn expected_v_len(tree: &CoverTree, label: usize) -> usize {
    1 + ancestry(tree, label)[1..]
        .iter()
        .filter(|&&id| tree.node(id).children.len() >= 2)
        .count()
}

pub fn v_params(rng: &mut ChaCha8Rng, tree: &CoverTree, d: usize, scale: f64) -> ParamMatrix {
    let paths = Arc::new(tree.derive_v_tree());
    ParamMatrix::tree(gaussian(rng, paths.k_prime(), d, scale), paths).unwrap()
}

pub fn u_params(rng: &mut ChaCha8Rng, tree: &CoverTree, d: usize, scale: f64) -> ParamMatrix {
    let paths = Arc::new(tree.derive_u_paths());
    ParamMatrix::tree(gaussian(rng, tree.k(), d, scale), paths).unwrap()
}
