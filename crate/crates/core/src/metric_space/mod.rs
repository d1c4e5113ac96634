//! Distance metrics over class labels.
//!
//! A [`LabelMetric`] is a dense `k x k` distance matrix. Constructors that
//! derive distances from vectors (embeddings, parameter rows) normalize the
//! result so the largest pairwise distance is 1, which lets a cover tree
//! rooted at depth 0 cover every label.

mod doubling;
pub mod word2vec;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use doubling::DoublingEstimate;

/// Relative slack used when comparing distances that went through
/// floating-point sums.
const AXIOM_TOLERANCE: f64 = 1e-12;

/// Seed for the triple sampler of [`LabelMetric::verify_axioms`].
const TRIPLE_SAMPLER_SEED: u64 = 0x7269_706c_6573;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetric {
    distances: Array2<f64>,
}

/// Outcome of [`LabelMetric::verify_axioms`] and [`LabelMetric::report`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    /// Triples `(i, j, m)` with `d(i, j) > d(i, m) + d(m, j)`.
    pub triangle_violations: Vec<(usize, usize, usize)>,
    /// Pairs `(i, j)`, `i < j`, with `d(i, j) != d(j, i)`.
    pub symmetry_violations: Vec<(usize, usize)>,
    /// Labels with a nonzero self-distance.
    pub diagonal_violations: Vec<usize>,
    pub doubling: Option<DoublingEstimate>,
}

impl MetricReport {
    pub fn is_valid(&self) -> bool {
        self.triangle_violations.is_empty()
            && self.symmetry_violations.is_empty()
            && self.diagonal_violations.is_empty()
    }
}

impl LabelMetric {
    /// Wraps a raw distance matrix without normalizing it.
    ///
    /// Only shape, finiteness and sign are checked here; symmetry and the
    /// triangle inequality are reported by [`LabelMetric::verify_axioms`].
    pub fn from_distances(distances: Array2<f64>) -> Result<Self> {
        let (rows, cols) = distances.dim();
        if rows != cols {
            return Err(Error::input(format!(
                "distance matrix must be square, got {rows}x{cols}"
            )));
        }
        if rows == 0 {
            return Err(Error::input("distance matrix has no labels"));
        }
        if let Some(((i, j), v)) = distances
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::input(format!(
                "distance ({i}, {j}) = {v} is not a finite nonnegative number"
            )));
        }
        Ok(LabelMetric { distances })
    }

    /// Euclidean metric over embedding vectors, normalized to max 1.
    pub fn from_embeddings(embeddings: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = embeddings.first() else {
            return Err(Error::input("no embeddings supplied"));
        };
        let m = first.len();
        if m == 0 {
            return Err(Error::input("embedding dimension must be at least 1"));
        }
        let mut rows = Array2::zeros((embeddings.len(), m));
        for (i, v) in embeddings.iter().enumerate() {
            if v.len() != m {
                return Err(Error::input(format!(
                    "embedding {i} has dimension {}, expected {m}",
                    v.len()
                )));
            }
            for (c, x) in v.iter().enumerate() {
                rows[[i, c]] = *x;
            }
        }
        Self::from_rows(rows.view())
    }

    /// Euclidean metric over the rows of `rows`, normalized to max 1.
    pub fn from_rows(rows: ArrayView2<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::input("embedding matrix must be non-empty"));
        }
        if let Some(((i, j), _)) = rows.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::input(format!(
                "embedding {i} has a non-finite entry at position {j}"
            )));
        }
        Ok(Self::from_distances(pairwise_euclidean(rows))?.normalized())
    }

    /// Metric over the rows `(1 - eps) * w_star + eps * w_bad`, normalized.
    pub fn mix_epsilon(
        w_star: ArrayView2<f64>,
        w_bad: ArrayView2<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let mixed = mix_rows(w_star, w_bad, epsilon)?;
        Self::from_rows(mixed.view())
    }

    /// Divides every distance by the largest one. A metric whose distances
    /// are all zero is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let max = self.max_distance();
        if max > 0.0 {
            self.distances.mapv_inplace(|v| v / max);
        }
        self
    }

    pub fn k(&self) -> usize {
        self.distances.nrows()
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[[i, j]]
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    pub fn distances(&self) -> ArrayView2<'_, f64> {
        self.distances.view()
    }

    /// Checks the zero diagonal and symmetry exhaustively, and the triangle
    /// inequality exhaustively when `k^3 <= triple_budget`, otherwise on
    /// `triple_budget` uniformly sampled triples.
    pub fn verify_axioms(&self, triple_budget: usize) -> MetricReport {
        let k = self.k();
        let d = &self.distances;
        let mut report = MetricReport::default();

        for i in 0..k {
            if d[[i, i]] != 0.0 {
                report.diagonal_violations.push(i);
            }
            for j in (i + 1)..k {
                let scale = d[[i, j]].abs().max(d[[j, i]].abs()).max(1.0);
                if (d[[i, j]] - d[[j, i]]).abs() > AXIOM_TOLERANCE * scale {
                    report.symmetry_violations.push((i, j));
                }
            }
        }

        let violates = |i: usize, j: usize, m: usize| {
            let detour = d[[i, m]] + d[[m, j]];
            d[[i, j]] > detour + AXIOM_TOLERANCE * detour.max(1.0)
        };
        let exhaustive = (k as u128).pow(3) <= triple_budget as u128;
        if exhaustive {
            for i in 0..k {
                for j in 0..k {
                    for m in 0..k {
                        if violates(i, j, m) {
                            report.triangle_violations.push((i, j, m));
                        }
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(TRIPLE_SAMPLER_SEED);
            for _ in 0..triple_budget {
                let (i, j, m) = (
                    rng.random_range(0..k),
                    rng.random_range(0..k),
                    rng.random_range(0..k),
                );
                if violates(i, j, m) && !report.triangle_violations.contains(&(i, j, m)) {
                    report.triangle_violations.push((i, j, m));
                }
            }
        }
        report
    }

    /// Empirical doubling constant; see [`DoublingEstimate`].
    pub fn estimate_doubling_constant(&self) -> DoublingEstimate {
        doubling::estimate(self)
    }

    /// Axiom check plus doubling estimate in one report.
    pub fn report(&self, triple_budget: usize) -> MetricReport {
        let mut report = self.verify_axioms(triple_budget);
        report.doubling = Some(self.estimate_doubling_constant());
        report
    }
}

/// Unnormalized Euclidean distances between the rows of `rows`.
pub fn pairwise_euclidean(rows: ArrayView2<f64>) -> Array2<f64> {
    let k = rows.nrows();
    let mut out = Array2::zeros((k, k));
    for i in 0..k {
        for j in (i + 1)..k {
            let dist = rows
                .row(i)
                .iter()
                .zip(rows.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            out[[i, j]] = dist;
            out[[j, i]] = dist;
        }
    }
    out
}

/// Row-wise convex mix `(1 - eps) * w_star + eps * w_bad`.
pub fn mix_rows(
    w_star: ArrayView2<f64>,
    w_bad: ArrayView2<f64>,
    epsilon: f64,
) -> Result<Array2<f64>> {
    if w_star.dim() != w_bad.dim() {
        return Err(Error::input(format!(
            "parameter matrices differ in shape: {:?} vs {:?}",
            w_star.dim(),
            w_bad.dim()
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::input(format!("epsilon {epsilon} outside [0, 1]")));
    }
    Ok(&w_star * (1.0 - epsilon) + &w_bad * epsilon)
}
