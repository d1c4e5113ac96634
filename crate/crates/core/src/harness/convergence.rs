//! Empirical check of the averaged-SGD rate `B rho / sqrt(T)` on the flat
//! loss.

use crate::error::Result;
use crate::optimizer::{initialize_params, sgd_train, InitScheme, SgdConfig};
use crate::synthetic::{sample_dataset, sample_test_dataset, sample_true_params, SynthConfig};
use crate::tree_loss::{frobenius_norm, ParamMatrix};

/// Iteration budget of the long-run reference relative to the checked run.
const REFERENCE_FACTOR: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub seed: u64,
    pub iterations: usize,
    /// Test loss of the averaged iterate.
    pub averaged_loss: f64,
    /// Test loss of the long-run reference.
    pub reference_loss: f64,
    /// Test loss of `W = -W*`, which scores `w*_i . x`.
    pub star_loss: f64,
    /// `averaged_loss` minus the better of the two comparators.
    pub gap: f64,
    /// `‖W*‖_F rho / sqrt(T)`.
    pub bound: f64,
    pub passed: bool,
}

/// Trains the flat loss with the theory step for `iterations` steps from
/// zero and compares its test loss against the best available estimate of
/// the optimum.
pub fn convergence_trial(
    config: &SynthConfig,
    iterations: usize,
    test_size: usize,
) -> Result<ConvergenceRecord> {
    let w_star = sample_true_params(config)?;
    let train = sample_dataset(&w_star, config)?;
    let test = sample_test_dataset(&w_star, config, test_size)?;
    let b = frobenius_norm(w_star.view());
    let rho = train.rho();
    let init = initialize_params(config.k, None, config.d, InitScheme::Zeros, config.seed)?;

    let sgd = SgdConfig::theory(iterations, b, rho, config.seed);
    let averaged = sgd_train(&init, &train, &sgd)?.params;
    let reference_cfg = SgdConfig::theory(iterations * REFERENCE_FACTOR, b, rho, config.seed ^ 1);
    let reference = sgd_train(&init, &train, &reference_cfg)?.params;
    let star = ParamMatrix::flat(-&w_star)?;

    let averaged_loss = averaged.evaluate(&test, None)?.mean_loss;
    let reference_loss = reference.evaluate(&test, None)?.mean_loss;
    let star_loss = star.evaluate(&test, None)?.mean_loss;
    let gap = averaged_loss - reference_loss.min(star_loss);
    let bound = b * rho / (iterations as f64).sqrt();
    Ok(ConvergenceRecord {
        seed: config.seed,
        iterations,
        averaged_loss,
        reference_loss,
        star_loss,
        gap,
        bound,
        passed: gap <= bound,
    })
}
