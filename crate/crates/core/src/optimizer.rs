//! Single-sample stochastic gradient descent with iterate averaging.
//!
//! The averaged iterate is `(1/T) * sum_{t=1..T} theta_t` where `theta_1`
//! is the initial point and `theta_{t+1} = theta_t - eta * grad_t`.

use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cover_tree::PathTable;
use crate::error::{Error, Result};
use crate::tree_loss::{Dataset, ParamMatrix};

/// Upper bound on stored trajectory points.
const TRAJECTORY_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `eta = sqrt(bound^2 / (rho^2 T))`, the rate of the averaged-SGD
    /// convergence theorem for a `rho`-Lipschitz loss and optimum within
    /// norm `bound`.
    Theory { bound: f64, rho: f64 },
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub iterations: usize,
    pub step: StepSize,
    pub averaging: bool,
    pub seed: u64,
    /// Cycle through reshuffled epochs instead of sampling with replacement.
    pub shuffle: bool,
}

impl SgdConfig {
    pub fn theory(iterations: usize, bound: f64, rho: f64, seed: u64) -> Self {
        SgdConfig {
            iterations,
            step: StepSize::Theory { bound, rho },
            averaging: true,
            seed,
            shuffle: false,
        }
    }

    pub fn constant(iterations: usize, eta: f64, seed: u64) -> Self {
        SgdConfig {
            iterations,
            step: StepSize::Constant(eta),
            averaging: true,
            seed,
            shuffle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("SGD needs at least one iteration"));
        }
        match self.step {
            StepSize::Theory { bound, rho } if !(bound > 0.0 && rho > 0.0) => Err(
                Error::config(format!("theory step needs B > 0 and rho > 0, got {bound}, {rho}")),
            ),
            StepSize::Constant(eta) if !(eta > 0.0 && eta.is_finite()) => {
                Err(Error::config(format!("step size must be positive, got {eta}")))
            }
            _ => Ok(()),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self.step {
            StepSize::Theory { bound, rho } => {
                (bound * bound / (rho * rho * self.iterations as f64)).sqrt()
            }
            StepSize::Constant(eta) => eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Averaged iterate when averaging is on, last iterate otherwise.
    pub params: ParamMatrix,
    /// `(iteration, loss)` on the sample drawn at that iteration, recorded
    /// every `max(1, T / 1000)` steps.
    pub loss_trajectory: Vec<(usize, f64)>,
    pub suboptimality_estimate: Option<f64>,
}

impl TrainResult {
    /// CSV `iteration,loss`.
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["iteration", "loss"])?;
        for (t, loss) in &self.loss_trajectory {
            wtr.write_record([t.to_string(), loss.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn sgd_train(initial: &ParamMatrix, data: &Dataset, config: &SgdConfig) -> Result<TrainResult> {
    sgd_train_observed(initial, data, config, |_, _| {})
}

/// [`sgd_train`] that hands every iterate `theta_t`, `t = 1..=T`, to
/// `observe` before it is updated.
pub fn sgd_train_observed<F>(
    initial: &ParamMatrix,
    data: &Dataset,
    config: &SgdConfig,
    mut observe: F,
) -> Result<TrainResult>
where
    F: FnMut(usize, &ParamMatrix),
{
    config.validate()?;
    if data.d() != initial.d() {
        return Err(Error::input(format!(
            "dataset has {} features, parameters expect {}",
            data.d(),
            initial.d()
        )));
    }
    if data.k() > initial.k() {
        return Err(Error::input(format!(
            "dataset has {} classes, parameters cover {}",
            data.k(),
            initial.k()
        )));
    }
    let n = data.n();
    if n == 0 {
        return Err(Error::input("cannot train on an empty dataset"));
    }

    let eta = config.learning_rate();
    let total = config.iterations;
    let record_every = (total / TRAJECTORY_POINTS).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;

    let mut theta = initial.clone();
    let mut sum = config.averaging.then(|| Array2::<f64>::zeros(theta.entries().raw_dim()));
    let mut trajectory = Vec::with_capacity(total / record_every + 1);

    for t in 1..=total {
        observe(t, &theta);
        if let Some(sum) = sum.as_mut() {
            *sum += &theta.entries();
        }
        let i = if config.shuffle {
            if cursor == n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            cursor += 1;
            order[cursor - 1]
        } else {
            rng.random_range(0..n)
        };
        let (x, y) = data.sample(i);
        let loss = theta.sgd_step(x, y, eta);
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: t });
        }
        if t % record_every == 0 {
            trajectory.push((t, loss));
        }
    }
    if theta.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iteration: total });
    }

    let params = match sum {
        Some(sum) => theta.with_entries(sum / total as f64)?,
        None => theta,
    };
    Ok(TrainResult {
        params,
        loss_trajectory: trajectory,
        suboptimality_estimate: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    Zeros,
    /// Entries i.i.d. normal with standard deviation `scale`.
    Gaussian { scale: f64 },
}

/// Parameter rows for a layout: `paths = None` gives a flat `k x d`
/// matrix, otherwise one row per path-table row.
pub fn initialize_params(
    k: usize,
    paths: Option<Arc<PathTable>>,
    d: usize,
    scheme: InitScheme,
    seed: u64,
) -> Result<ParamMatrix> {
    let rows = paths.as_ref().map_or(k, |p| p.k_prime());
    if let Some(p) = &paths {
        if p.k() != k {
            return Err(Error::input(format!(
                "path table has {} classes, requested {k}",
                p.k()
            )));
        }
    }
    if rows == 0 || d == 0 {
        return Err(Error::input("parameter dimensions must be positive"));
    }
    let entries = match scheme {
        InitScheme::Zeros => Array2::zeros((rows, d)),
        InitScheme::Gaussian { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Array2::from_shape_simple_fn((rows, d), || {
                scale * rng.sample::<f64, _>(StandardNormal)
            })
        }
    };
    match paths {
        None => ParamMatrix::flat(entries),
        Some(p) => ParamMatrix::tree(entries, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn separable_1d() -> Dataset {
        let xs = [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0];
        let features = Array2::from_shape_fn((xs.len(), 1), |(i, _)| xs[i]);
        let labels = xs.iter().map(|x| usize::from(*x > 0.0)).collect();
        Dataset::new(features, labels, 2).unwrap()
    }

    #[test]
    fn theory_learning_rate() {
        let cfg = SgdConfig::theory(100, 3.0, 2.0, 0);
        assert_relative_eq!(cfg.learning_rate(), 0.15, epsilon = 1e-15);
    }

    #[test]
    fn rejects_invalid_config() {
        let init = initialize_params(2, None, 1, InitScheme::Zeros, 0).unwrap();
        let data = separable_1d();
        assert!(sgd_train(&init, &data, &SgdConfig::constant(0, 0.1, 0)).is_err());
        assert!(sgd_train(&init, &data, &SgdConfig::theory(10, 0.0, 1.0, 0)).is_err());
        assert!(sgd_train(&init, &data, &SgdConfig::constant(10, -1.0, 0)).is_err());
    }

    #[test]
    fn zero_features_are_a_fixpoint() {
        let data = Dataset::new(Array2::zeros((4, 3)), vec![0, 1, 2, 1], 3).unwrap();
        let init = initialize_params(3, None, 3, InitScheme::Gaussian { scale: 1.0 }, 5).unwrap();
        let out = sgd_train(&init, &data, &SgdConfig::constant(1, 0.5, 1)).unwrap();
        assert_eq!(out.params, init);
    }

    #[test]
    fn separates_two_classes() {
        let data = separable_1d();
        let init = initialize_params(2, None, 1, InitScheme::Zeros, 0).unwrap();
        let out = sgd_train(&init, &data, &SgdConfig::constant(1000, 0.1, 3)).unwrap();
        assert_eq!(out.params.evaluate(&data, None).unwrap().top1, 1.0);
    }

    #[test]
    fn averaging_matches_explicit_mean() {
        let data = separable_1d();
        let init = initialize_params(2, None, 1, InitScheme::Gaussian { scale: 0.3 }, 2).unwrap();
        for shuffle in [false, true] {
            let mut cfg = SgdConfig::constant(7, 0.2, 11);
            cfg.shuffle = shuffle;
            let mut iterates = Vec::new();
            let out = sgd_train_observed(&init, &data, &cfg, |_, p| {
                iterates.push(p.entries().to_owned())
            })
            .unwrap();
            assert_eq!(iterates.len(), 7);
            let mean = iterates.iter().fold(Array2::zeros((2, 1)), |a, b| a + b) / 7.0;
            for (a, b) in out.params.entries().iter().zip(mean.iter()) {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let data = separable_1d();
        let init = initialize_params(2, None, 1, InitScheme::Zeros, 0).unwrap();
        let cfg = SgdConfig::constant(200, 0.3, 9);
        let a = sgd_train(&init, &data, &cfg).unwrap();
        let b = sgd_train(&init, &data, &cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 10;
        assert_ne!(a, sgd_train(&init, &data, &other).unwrap());
    }

    #[test]
    fn divergence_reports_iteration() {
        let features = array![[1e200], [-1e200]];
        let data = Dataset::new(features, vec![0, 1], 2).unwrap();
        let init = initialize_params(2, None, 1, InitScheme::Zeros, 0).unwrap();
        let err = sgd_train(&init, &data, &SgdConfig::constant(50, 1e200, 0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn trajectory_is_subsampled() {
        let data = separable_1d();
        let init = initialize_params(2, None, 1, InitScheme::Zeros, 0).unwrap();
        let out = sgd_train(&init, &data, &SgdConfig::constant(5000, 0.01, 0)).unwrap();
        assert_eq!(out.loss_trajectory.len(), 1000);
        assert_eq!(out.loss_trajectory[0].0, 5);
        let mut buf = Vec::new();
        out.write_trajectory_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"iteration,loss\n5,"));
    }

    #[test]
    fn initialization_schemes() {
        let zeros = initialize_params(3, None, 4, InitScheme::Zeros, 0).unwrap();
        assert_eq!(zeros.frobenius_norm(), 0.0);
        let g = InitScheme::Gaussian { scale: 1.0 };
        let a = initialize_params(100, None, 100, g, 42).unwrap();
        let norm = a.frobenius_norm();
        assert!((80.0..=120.0).contains(&norm), "{norm}");
        assert_eq!(a, initialize_params(100, None, 100, g, 42).unwrap());
    }
}
