//! Experiment runners behind the command line tool.
//!
//! Every synthetic trial follows the same pipeline: sample `W*`, build a
//! label metric and cover tree from it, draw paired train and test sets, then
//! train each requested loss from the same zero initialization with the same
//! SGD seed. Trials are independent and run on the rayon pool; results are
//! collected in `(sweep value, seed)` order so output never depends on
//! scheduling.

mod bounds;
mod convergence;
mod norms;
mod output;
mod train;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::cover_tree::CoverTree;
use crate::error::{Error, Result};
use crate::metric_space::LabelMetric;
use crate::optimizer::{initialize_params, sgd_train, InitScheme, SgdConfig};
use crate::synthetic::{
    sample_bad_params, sample_dataset, sample_test_dataset, sample_true_params, SynthConfig,
    TEST_SET_SIZE,
};
use crate::tree_loss::frobenius_norm;

pub use bounds::{check_bounds, run_bounds, TheoryReport};
pub use convergence::{convergence_trial, ConvergenceRecord};
pub use norms::{min_norm_v, run_norms, NormRecord};
pub use output::{
    write_bounds_csv, write_bounds_summary_csv, write_norms_csv, write_norms_summary_csv,
    write_summary_csv, write_trials_csv,
};
pub use train::{run_train, TrainOptions, TrainOutcome};

/// Trials per sweep point by default and in CI mode.
pub const DEFAULT_TRIALS: usize = 50;
pub const CI_TRIALS: usize = 10;

/// Multiplier on `n` giving the SGD iteration budget of a trial.
pub const ITERATIONS_PER_SAMPLE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Accuracy as data size, dimension, class count or noise vary.
    I,
    /// Norm growth of trained parameters in `k`.
    II,
    /// Accuracy as the cover tree base varies.
    III,
    /// Accuracy under an epsilon-corrupted label metric.
    IV,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::I => "exp1",
            Experiment::II => "exp2",
            Experiment::III => "exp3",
            Experiment::IV => "exp4",
        }
    }

    pub fn allows(self, param: SweepParam) -> bool {
        use SweepParam::*;
        match self {
            Experiment::I => matches!(param, N | D | K | Sigma),
            Experiment::II => param == K,
            Experiment::III => param == Base,
            Experiment::IV => param == Epsilon,
        }
    }

    /// Baseline settings and sweep used when the command line gives none.
    pub fn defaults(self) -> (Settings, Sweep) {
        let base = Settings {
            n: 100,
            d: 64,
            k: 10,
            sigma: 1.0,
            base: 2.0,
            epsilon: 0.0,
        };
        match self {
            Experiment::I => (base, Sweep::new(SweepParam::N, vec![10.0, 100.0, 1000.0])),
            Experiment::II => (
                Settings { n: 1000, d: 10, ..base },
                Sweep::new(SweepParam::K, vec![10.0, 50.0, 100.0, 500.0]),
            ),
            Experiment::III => (
                Settings { n: 1000, d: 10, k: 100, ..base },
                Sweep::new(SweepParam::Base, vec![1.1, 1.3, 2.0, 4.0]),
            ),
            Experiment::IV => (
                base,
                Sweep::new(SweepParam::Epsilon, vec![0.0, 0.25, 0.5, 0.75, 1.0]),
            ),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    N,
    D,
    K,
    Sigma,
    Base,
    Epsilon,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::D => "d",
            SweepParam::K => "k",
            SweepParam::Sigma => "sigma",
            SweepParam::Base => "base",
            SweepParam::Epsilon => "epsilon",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n" => SweepParam::N,
            "d" => SweepParam::D,
            "k" => SweepParam::K,
            "sigma" => SweepParam::Sigma,
            "base" => SweepParam::Base,
            "epsilon" => SweepParam::Epsilon,
            other => {
                return Err(Error::config(format!(
                    "unknown sweep parameter {other:?}; expected n, d, k, sigma, base or epsilon"
                )))
            }
        })
    }
}

/// A hyperparameter and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn new(param: SweepParam, values: Vec<f64>) -> Self {
        Sweep { param, values }
    }
}

impl FromStr for Sweep {
    type Err = Error;

    /// `name=v1,v2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("sweep {s:?} is not of the form name=v1,v2")))?;
        let param = name.trim().parse()?;
        let values = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("bad sweep value {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::config("sweep needs at least one value"));
        }
        Ok(Sweep { param, values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// V-tree parameterization built from the trial's cover tree.
    Tree,
    /// Flat cross entropy.
    Xent,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Tree => "tree",
            LossKind::Xent => "xent",
        }
    }

    /// Comma-separated list such as `tree,xent`.
    pub fn parse_list(s: &str) -> Result<Vec<LossKind>> {
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim) {
            let kind = match name {
                "tree" => LossKind::Tree,
                "xent" => LossKind::Xent,
                other => return Err(Error::config(format!("unknown loss {other:?}"))),
            };
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        if out.is_empty() {
            return Err(Error::config("no losses selected"));
        }
        Ok(out)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Synthetic problem and tree settings of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub sigma: f64,
    pub base: f64,
    pub epsilon: f64,
}

impl Settings {
    /// Copy with `param` set to `value`.
    pub fn with(self, param: SweepParam, value: f64) -> Result<Self> {
        let count = |v: f64| {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::config(format!("{param} must be a positive integer, got {v}")))
            }
        };
        let mut s = self;
        match param {
            SweepParam::N => s.n = count(value)?,
            SweepParam::D => s.d = count(value)?,
            SweepParam::K => s.k = count(value)?,
            SweepParam::Sigma => s.sigma = value,
            SweepParam::Base => s.base = value,
            SweepParam::Epsilon => s.epsilon = value,
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.k == 0 {
            return Err(Error::config("n, d and k must be positive"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.base > 1.0 && self.base.is_finite()) {
            return Err(Error::config(format!("base must be > 1, got {}", self.base)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        Ok(())
    }

    fn synth(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            n: self.n,
            d: self.d,
            k: self.k,
            sigma: self.sigma,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub settings: Settings,
    pub sweep: Sweep,
    pub trials: usize,
    /// Trial `t` uses seed `seed + t`.
    pub seed: u64,
    pub losses: Vec<LossKind>,
    /// Size of each trial's held-out set.
    pub test_size: usize,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        let (settings, sweep) = experiment.defaults();
        ExperimentSpec {
            experiment,
            settings,
            sweep,
            trials: DEFAULT_TRIALS,
            seed: 0,
            losses: vec![LossKind::Tree, LossKind::Xent],
            test_size: TEST_SET_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.experiment.allows(self.sweep.param) {
            return Err(Error::config(format!(
                "{} cannot sweep {}",
                self.experiment, self.sweep.param
            )));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.test_size == 0 {
            return Err(Error::config("test set must be non-empty"));
        }
        if self.losses.is_empty() {
            return Err(Error::config("no losses selected"));
        }
        for &v in &self.sweep.values {
            self.settings.with(self.sweep.param, v)?;
        }
        Ok(())
    }
}

/// One trained model of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: Experiment,
    pub sweep: SweepParam,
    pub value: f64,
    pub seed: u64,
    pub loss: LossKind,
    /// Test top-1 accuracy.
    pub accuracy: f64,
    /// Test similarity accuracy under the exact parameter metric.
    pub similarity_accuracy: f64,
    /// Mean test cross entropy.
    pub mean_loss: f64,
    /// Frobenius norm of the trained parameter rows (`V` for the tree loss).
    pub param_norm: f64,
    pub tree_height: usize,
    pub k_prime: usize,
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        if v.is_empty() {
            return Stat { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / n;
        let stderr = if v.len() < 2 {
            0.0
        } else {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Stat { mean, stderr }
    }
}

/// Aggregate over trials of one sweep value and loss.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: Experiment,
    pub sweep: SweepParam,
    pub value: f64,
    pub loss: LossKind,
    pub trials: usize,
    pub accuracy: Stat,
    pub similarity_accuracy: Stat,
    pub mean_loss: Stat,
    pub param_norm: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn row(&self, value: f64, loss: LossKind) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.value == value && r.loss == loss)
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let jobs: Vec<(f64, u64)> = spec
        .sweep
        .values
        .iter()
        .flat_map(|&v| (0..spec.trials as u64).map(move |t| (v, spec.seed.wrapping_add(t))))
        .collect();
    let per_job: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let settings = spec.settings.with(spec.sweep.param, value)?;
            run_trial(spec, &settings, value, seed)
        })
        .collect::<Result<_>>()?;
    let trials: Vec<TrialRecord> = per_job.into_iter().flatten().collect();

    let mut summary = Vec::new();
    for &value in &spec.sweep.values {
        for &loss in &spec.losses {
            let group: Vec<&TrialRecord> = trials
                .iter()
                .filter(|r| r.value == value && r.loss == loss)
                .collect();
            summary.push(SummaryRow {
                experiment: spec.experiment,
                sweep: spec.sweep.param,
                value,
                loss,
                trials: group.len(),
                accuracy: Stat::of(group.iter().map(|r| r.accuracy)),
                similarity_accuracy: Stat::of(group.iter().map(|r| r.similarity_accuracy)),
                mean_loss: Stat::of(group.iter().map(|r| r.mean_loss)),
                param_norm: Stat::of(group.iter().map(|r| r.param_norm)),
            });
        }
    }
    Ok(ExperimentOutput { trials, summary })
}

/// Runs every loss of `spec` on one seed at one sweep point.
pub fn run_trial(
    spec: &ExperimentSpec,
    settings: &Settings,
    value: f64,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let synth = settings.synth(seed);
    let w_star = sample_true_params(&synth)?;
    let true_metric = LabelMetric::from_rows(w_star.view())?;
    let tree_metric = if spec.experiment == Experiment::IV {
        let w_bad = sample_bad_params(&synth)?;
        LabelMetric::mix_epsilon(w_star.view(), w_bad.view(), settings.epsilon)?
    } else {
        true_metric.clone()
    };
    let tree = CoverTree::build(&tree_metric, settings.base)?;
    let paths = Arc::new(tree.derive_v_tree());
    let train = sample_dataset(&w_star, &synth)?;
    let test = sample_test_dataset(&w_star, &synth, spec.test_size)?;
    let sgd = SgdConfig::theory(
        ITERATIONS_PER_SAMPLE * settings.n,
        frobenius_norm(w_star.view()),
        train.rho(),
        seed,
    );

    spec.losses
        .iter()
        .map(|&loss| {
            let layout = match loss {
                LossKind::Tree => Some(paths.clone()),
                LossKind::Xent => None,
            };
            let init = initialize_params(settings.k, layout, settings.d, InitScheme::Zeros, seed)?;
            let trained = sgd_train(&init, &train, &sgd)?.params;
            let eval = trained.evaluate(&test, Some(&true_metric))?;
            Ok(TrialRecord {
                experiment: spec.experiment,
                sweep: spec.sweep.param,
                value,
                seed,
                loss,
                accuracy: eval.top1,
                similarity_accuracy: eval.similarity_accuracy.unwrap_or(f64::NAN),
                mean_loss: eval.mean_loss,
                param_norm: trained.frobenius_norm(),
                tree_height: tree.height(),
                k_prime: paths.k_prime(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}
