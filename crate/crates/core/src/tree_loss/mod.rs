//! Cross-entropy loss of a linear model under three parameterizations.
//!
//! Scores follow the negative-logit convention `s_i = -w_i . x`, so the loss
//! of `(x, y)` is `logsumexp(s) - s_y` and the predicted class minimizes
//! `w_i . x`. In the U and V parameterizations the class vector `w_i` is the
//! sum of parameter rows along the class path `P_i` of a [`PathTable`];
//! pseudoclass rows receive gradient from every class below them but carry
//! no probability mass of their own.

mod dataset;
mod io;

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::cover_tree::{PathTable, TreeVariant};
use crate::error::{Error, Result};
use crate::metric_space::LabelMetric;

pub use dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Flat,
    U,
    V,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Flat => "FLAT",
            Variant::U => "U",
            Variant::V => "V",
        })
    }
}

/// Weight matrix in one of the three parameterizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMatrix {
    entries: Array2<f64>,
    paths: Option<Arc<PathTable>>,
}

/// Mean loss, top-1 accuracy and (with a metric) similarity accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean_loss: f64,
    pub top1: f64,
    pub similarity_accuracy: Option<f64>,
}

impl ParamMatrix {
    /// Flat `k x d` cross-entropy weights.
    pub fn flat(entries: Array2<f64>) -> Result<Self> {
        check_finite(&entries)?;
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::input("parameter matrix must be non-empty"));
        }
        Ok(ParamMatrix {
            entries,
            paths: None,
        })
    }

    /// Tree-parameterized weights; `entries` needs one row per path-table row.
    pub fn tree(entries: Array2<f64>, paths: Arc<PathTable>) -> Result<Self> {
        check_finite(&entries)?;
        if entries.nrows() != paths.k_prime() || entries.ncols() == 0 {
            return Err(Error::input(format!(
                "{} path table expects {} rows, got {}x{}",
                paths.variant(),
                paths.k_prime(),
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(ParamMatrix {
            entries,
            paths: Some(paths),
        })
    }

    /// Same layout as `self` with new entries.
    pub fn with_entries(&self, entries: Array2<f64>) -> Result<Self> {
        match &self.paths {
            None => Self::flat(entries),
            Some(p) => Self::tree(entries, Arc::clone(p)),
        }
    }

    pub fn variant(&self) -> Variant {
        match self.paths.as_deref().map(PathTable::variant) {
            None => Variant::Flat,
            Some(TreeVariant::U) => Variant::U,
            Some(TreeVariant::V) => Variant::V,
        }
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    pub fn paths(&self) -> Option<&Arc<PathTable>> {
        self.paths.as_ref()
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.paths.as_ref().map_or(self.entries.nrows(), |p| p.k())
    }

    /// Number of parameter rows.
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    /// Feature dimension.
    pub fn d(&self) -> usize {
        self.entries.ncols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self.entries.view())
    }

    /// Class weight matrix `W` with `w_i` the sum of rows along `P_i`.
    pub fn reconstruct_w(&self) -> Result<Array2<f64>> {
        let paths = self
            .paths
            .as_deref()
            .ok_or_else(|| Error::input("flat parameters have nothing to reconstruct"))?;
        let mut acc = self.entries.clone();
        for &row in paths.topological_order() {
            if let Some(p) = paths.parent(row) {
                let (mut child, above) = acc.multi_slice_mut((
                    ndarray::s![row, ..],
                    ndarray::s![p, ..],
                ));
                child += &above;
            }
        }
        acc.slice_axis_inplace(Axis(0), (0..paths.k()).into());
        Ok(acc)
    }

    /// The class weights as a flat parameter matrix.
    pub fn to_flat(&self) -> Result<Self> {
        match self.paths {
            None => Ok(self.clone()),
            Some(_) => Self::flat(self.reconstruct_w()?),
        }
    }

    /// Class scores `s_i = -w_i . x`.
    pub fn scores(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_features(x)?;
        Ok(self.scores_unchecked(x))
    }

    fn scores_unchecked(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let z = self.entries.dot(&x);
        match self.paths.as_deref() {
            None => -z,
            Some(paths) => {
                let mut acc = z.to_vec();
                for &row in paths.topological_order() {
                    if let Some(p) = paths.parent(row) {
                        acc[row] += acc[p];
                    }
                }
                Array1::from_iter(acc[..paths.k()].iter().map(|v| -v))
            }
        }
    }

    pub fn loss(&self, x: ArrayView1<f64>, y: usize) -> Result<f64> {
        self.check_sample(x, y)?;
        let scores = self.scores_unchecked(x);
        Ok(log_sum_exp(scores.view()) - scores[y])
    }

    /// Gradient of [`ParamMatrix::loss`] with respect to every entry.
    pub fn gradient(&self, x: ArrayView1<f64>, y: usize) -> Result<Array2<f64>> {
        self.check_sample(x, y)?;
        let (_, weights) = self.loss_and_row_weights(x, y);
        let mut grad = Array2::zeros(self.entries.raw_dim());
        for (mut row, g) in grad.axis_iter_mut(Axis(0)).zip(weights) {
            row.scaled_add(-g, &x);
        }
        Ok(grad)
    }

    /// Loss and the per-row factors `g_j` with `dL/d row_j = -g_j x`:
    /// the softmax residual `p_i - [i = y]` summed over every class whose
    /// path contains row `j`.
    pub(crate) fn loss_and_row_weights(&self, x: ArrayView1<f64>, y: usize) -> (f64, Vec<f64>) {
        let scores = self.scores_unchecked(x);
        let lse = log_sum_exp(scores.view());
        let loss = lse - scores[y];
        let mut weights = vec![0.0; self.rows()];
        for (i, s) in scores.iter().enumerate() {
            weights[i] = (s - lse).exp();
        }
        weights[y] -= 1.0;
        if let Some(paths) = self.paths.as_deref() {
            for &row in paths.topological_order().iter().rev() {
                if let Some(p) = paths.parent(row) {
                    weights[p] += weights[row];
                }
            }
        }
        (loss, weights)
    }

    /// One SGD step `entries -= eta * gradient(x, y)`; returns the loss at
    /// the pre-step parameters.
    pub(crate) fn sgd_step(&mut self, x: ArrayView1<f64>, y: usize, eta: f64) -> f64 {
        let (loss, weights) = self.loss_and_row_weights(x, y);
        for (mut row, g) in self.entries.axis_iter_mut(Axis(0)).zip(weights) {
            if g != 0.0 {
                row.scaled_add(eta * g, &x);
            }
        }
        loss
    }

    /// Class with the largest softmax probability (smallest `w_i . x`);
    /// ties go to the smallest index.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<usize> {
        self.check_features(x)?;
        Ok(argmax(self.scores_unchecked(x).view()))
    }

    pub fn evaluate(&self, data: &Dataset, metric: Option<&LabelMetric>) -> Result<Evaluation> {
        if data.d() != self.d() {
            return Err(Error::input(format!(
                "dataset has {} features, parameters expect {}",
                data.d(),
                self.d()
            )));
        }
        if data.k() > self.k() {
            return Err(Error::input(format!(
                "dataset has {} classes, parameters cover {}",
                data.k(),
                self.k()
            )));
        }
        if let Some(m) = metric {
            if m.k() != self.k() {
                return Err(Error::input(format!(
                    "metric has {} labels, parameters have {} classes",
                    m.k(),
                    self.k()
                )));
            }
        }
        let n = data.n();
        if n == 0 {
            return Err(Error::input("cannot evaluate on an empty dataset"));
        }
        let mut total_loss = 0.0;
        let mut hits = 0usize;
        let mut similarity = 0.0;
        for (x, &y) in data.features().axis_iter(Axis(0)).zip(data.labels()) {
            let scores = self.scores_unchecked(x);
            total_loss += log_sum_exp(scores.view()) - scores[y];
            let guess = argmax(scores.view());
            if guess == y {
                hits += 1;
            }
            if let Some(m) = metric {
                similarity += 1.0 - m.distance(guess, y);
            }
        }
        Ok(Evaluation {
            mean_loss: total_loss / n as f64,
            top1: hits as f64 / n as f64,
            similarity_accuracy: metric.map(|_| similarity / n as f64),
        })
    }

    fn check_features(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::input(format!(
                "feature vector has dimension {}, expected {}",
                x.len(),
                self.d()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("feature vector has non-finite entries"));
        }
        Ok(())
    }

    fn check_sample(&self, x: ArrayView1<f64>, y: usize) -> Result<()> {
        self.check_features(x)?;
        if y >= self.k() {
            return Err(Error::input(format!("label {y} outside [0, {})", self.k())));
        }
        Ok(())
    }
}

/// U parameters of a class weight matrix: `u_i = w_i - w_parent(i)` for
/// non-root classes and `u_root = w_root`, so that summing along each path
/// telescopes back to `w_i`.
pub fn decompose_w(w: ArrayView2<f64>, paths: Arc<PathTable>) -> Result<ParamMatrix> {
    if paths.variant() != TreeVariant::U {
        return Err(Error::input("decomposition needs a U path table"));
    }
    if w.nrows() != paths.k() {
        return Err(Error::input(format!(
            "W has {} rows, path table has {} classes",
            w.nrows(),
            paths.k()
        )));
    }
    let mut u = w.to_owned();
    for class in 0..paths.k() {
        if let Some(p) = paths.class_parent(class) {
            u.row_mut(class).scaled_add(-1.0, &w.row(p));
        }
    }
    ParamMatrix::tree(u, paths)
}

pub fn frobenius_norm(m: ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn log_sum_exp(v: ArrayView1<f64>) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, s) in v.iter().enumerate() {
        if *s > v[best] {
            best = i;
        }
    }
    best
}

fn check_finite(m: &Array2<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::input("parameter matrix has non-finite entries"))
    }
}
