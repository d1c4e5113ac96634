//! Gaussian class-center data.
//!
//! True weights `W*` have i.i.d. standard normal entries; a sample draws a
//! uniform label `y` and features `x = w*_y + sigma * z` with `z` standard
//! normal. Every random quantity comes from its own ChaCha stream of the
//! configured seed, so changing `n` leaves `W*` untouched and the test set
//! never overlaps the training draws.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tree_loss::Dataset;

/// Size of the held-out test sets used by the experiments.
pub const TEST_SET_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    TrueParams = 1,
    TrainLabels = 2,
    TrainNoise = 3,
    TestLabels = 4,
    TestNoise = 5,
    BadParams = 6,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.k == 0 {
            return Err(Error::config(format!(
                "n, d and k must be positive, got n={} d={} k={}",
                self.n, self.d, self.k
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// `k x d` true parameter matrix.
pub fn sample_true_params(config: &SynthConfig) -> Result<Array2<f64>> {
    config.validate()?;
    Ok(gaussian_matrix(&mut config.rng(Stream::TrueParams), config.k, config.d))
}

/// An independent `k x d` standard normal matrix, unrelated to `W*`.
pub fn sample_bad_params(config: &SynthConfig) -> Result<Array2<f64>> {
    config.validate()?;
    Ok(gaussian_matrix(&mut config.rng(Stream::BadParams), config.k, config.d))
}

/// Training set of `config.n` samples.
pub fn sample_dataset(w_star: &Array2<f64>, config: &SynthConfig) -> Result<Dataset> {
    sample_from(w_star, config, config.n, Stream::TrainLabels, Stream::TrainNoise)
}

/// Held-out set of `n` samples from streams disjoint from the training set.
pub fn sample_test_dataset(w_star: &Array2<f64>, config: &SynthConfig, n: usize) -> Result<Dataset> {
    sample_from(w_star, config, n, Stream::TestLabels, Stream::TestNoise)
}

fn sample_from(
    w_star: &Array2<f64>,
    config: &SynthConfig,
    n: usize,
    labels: Stream,
    noise: Stream,
) -> Result<Dataset> {
    config.validate()?;
    if w_star.dim() != (config.k, config.d) {
        return Err(Error::input(format!(
            "W* is {:?}, config expects ({}, {})",
            w_star.dim(),
            config.k,
            config.d
        )));
    }
    let mut label_rng = config.rng(labels);
    let ys: Vec<usize> = (0..n).map(|_| label_rng.random_range(0..config.k)).collect();
    let mut features = gaussian_matrix(&mut config.rng(noise), n, config.d);
    features *= config.sigma;
    for (mut row, &y) in features.rows_mut().into_iter().zip(&ys) {
        row += &w_star.row(y);
    }
    Dataset::new(features, ys, config.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_loss::{frobenius_norm, ParamMatrix};

    fn config(n: usize, d: usize, k: usize, sigma: f64, seed: u64) -> SynthConfig {
        SynthConfig { n, d, k, sigma, seed }
    }

    #[test]
    fn deterministic_and_stream_separated() {
        let a = config(50, 3, 4, 1.0, 7);
        let b = SynthConfig { n: 500, ..a };
        let w = sample_true_params(&a).unwrap();
        assert_eq!(w, sample_true_params(&b).unwrap());
        assert_ne!(w, sample_bad_params(&a).unwrap());
        let single = sample_true_params(&config(1, 1, 1, 1.0, 3)).unwrap();
        assert_eq!(single, sample_true_params(&config(1, 1, 1, 1.0, 3)).unwrap());

        let train = sample_dataset(&w, &a).unwrap();
        assert_eq!(train, sample_dataset(&w, &a).unwrap());
        let longer = sample_dataset(&w, &b).unwrap();
        assert_eq!(train.labels(), &longer.labels()[..50]);
        let test = sample_test_dataset(&w, &a, 50).unwrap();
        assert_ne!(train.labels(), test.labels());
    }

    #[test]
    fn zero_noise_hits_centers() {
        let cfg = config(30, 64, 6, 0.0, 1);
        let w = sample_true_params(&cfg).unwrap();
        let data = sample_dataset(&w, &cfg).unwrap();
        for i in 0..data.n() {
            let (x, y) = data.sample(i);
            assert_eq!(x, w.row(y));
        }
        // scores -w_i . x with W = -W* pick the true center
        let params = ParamMatrix::flat(-&w).unwrap();
        assert_eq!(params.evaluate(&data, None).unwrap().top1, 1.0);
    }

    #[test]
    fn true_param_norm_concentrates() {
        for seed in 0..50 {
            let w = sample_true_params(&config(1, 100, 100, 1.0, seed)).unwrap();
            let norm = frobenius_norm(w.view());
            assert!((80.0..=120.0).contains(&norm), "seed {seed}: {norm}");
        }
    }

    #[test]
    fn center_distances_scale_with_sqrt_d() {
        let d = 64;
        let w = sample_true_params(&config(1, d, 20, 1.0, 4)).unwrap();
        let mut total = 0.0;
        let mut pairs = 0;
        for i in 0..20 {
            for j in (i + 1)..20 {
                let diff = &w.row(i) - &w.row(j);
                total += diff.dot(&diff).sqrt() / (2.0 * d as f64).sqrt();
                pairs += 1;
            }
        }
        let mean = total / pairs as f64;
        assert!((0.8..=1.2).contains(&mean), "{mean}");
    }

    #[test]
    fn labels_are_uniform() {
        let cfg = config(10_000, 2, 10, 1.0, 5);
        let w = sample_true_params(&cfg).unwrap();
        let data = sample_dataset(&w, &cfg).unwrap();
        let mut counts = [0usize; 10];
        for &y in data.labels() {
            counts[y] += 1;
        }
        assert!(counts.iter().all(|c| (800..=1200).contains(c)), "{counts:?}");
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(sample_true_params(&config(1, 0, 1, 1.0, 0)).is_err());
        assert!(sample_true_params(&config(1, 1, 1, -1.0, 0)).is_err());
        let w = Array2::zeros((2, 2));
        assert!(sample_dataset(&w, &config(5, 3, 2, 1.0, 0)).is_err());
    }
}
