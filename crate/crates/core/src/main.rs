use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use treeloss::harness::{
    self, Experiment, ExperimentSpec, LossKind, Sweep, SweepParam, TrainOptions,
};
use treeloss::{Error, Result};

#[derive(Parser)]
#[command(name = "treeloss", version, about = "Cover-tree loss experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accuracy as n, d, k or sigma vary.
    Exp1(ExpArgs),
    /// Trained parameter norms as k varies.
    Exp2(ExpArgs),
    /// Accuracy as the cover tree base varies.
    Exp3(ExpArgs),
    /// Accuracy under an epsilon-corrupted label metric.
    Exp4(ExpArgs),
    /// Norms of W*, its U decomposition and the minimum-norm V.
    Norms(NormsArgs),
    /// Check the U-norm bounds on random W*.
    Bounds(BoundsArgs),
    /// Train on a labeled CSV with word2vec label embeddings.
    Train(TrainArgs),
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    base: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `name=v1,v2,...`
    #[arg(long)]
    sweep: Option<String>,
    /// Results CSV; per-trial rows go to `<stem>.trials.csv`. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "tree,xent")]
    loss: String,
    #[arg(long)]
    test_size: Option<usize>,
    /// Fewer trials for quick runs.
    #[arg(long)]
    ci_mode: bool,
}

#[derive(Args)]
struct NormsArgs {
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 2.0)]
    base: f64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Must sweep `k`.
    #[arg(long, default_value = "k=10,50,100,500")]
    sweep: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ci_mode: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 2.0)]
    base: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    base: f64,
    #[arg(long, default_value = "tree")]
    loss: String,
    #[arg(long)]
    iterations: Option<usize>,
    /// Constant step size instead of the theory step.
    #[arg(long)]
    eta: Option<f64>,
    /// Norm bound used by the theory step.
    #[arg(long)]
    bound: Option<f64>,
    /// Return the last iterate instead of the average.
    #[arg(long)]
    no_averaging: bool,
    #[arg(long)]
    shuffle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn trials_or_default(trials: Option<usize>, ci_mode: bool) -> usize {
    trials.unwrap_or(if ci_mode {
        harness::CI_TRIALS
    } else {
        harness::DEFAULT_TRIALS
    })
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Writes the results table to `out` (stdout when absent) and the raw
/// table beside it.
fn emit(
    out: Option<&Path>,
    results: impl FnOnce(&mut dyn Write) -> Result<()>,
    raw: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            results(&mut w)?;
            w.flush()?;
            let mut w = BufWriter::new(File::create(with_suffix(path, "trials.csv"))?);
            raw(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            results(&mut lock)?;
        }
    }
    Ok(())
}

fn run_experiment(experiment: Experiment, args: ExpArgs) -> Result<()> {
    let mut spec = ExperimentSpec::new(experiment);
    let s = &mut spec.settings;
    if let Some(v) = args.n {
        s.n = v;
    }
    if let Some(v) = args.d {
        s.d = v;
    }
    if let Some(v) = args.k {
        s.k = v;
    }
    if let Some(v) = args.sigma {
        s.sigma = v;
    }
    if let Some(v) = args.base {
        s.base = v;
    }
    if let Some(v) = args.epsilon {
        s.epsilon = v;
    }
    s.validate()?;
    if let Some(sweep) = &args.sweep {
        spec.sweep = sweep.parse()?;
    }
    spec.trials = trials_or_default(args.trials, args.ci_mode);
    spec.seed = args.seed;
    spec.losses = LossKind::parse_list(&args.loss)?;
    if let Some(t) = args.test_size {
        spec.test_size = t;
    }
    let output = harness::run_experiment(&spec)?;
    emit(
        args.out.as_deref(),
        |w| harness::write_summary_csv(&output.summary, spec.seed, w),
        |w| harness::write_trials_csv(&output.trials, w),
    )
}

fn run_norms(args: NormsArgs) -> Result<()> {
    let sweep: Sweep = args.sweep.parse()?;
    if sweep.param != SweepParam::K {
        return Err(Error::InvalidConfig("norms can only sweep k".into()));
    }
    let ks = sweep
        .values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!("k must be a positive integer, got {v}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let trials = trials_or_default(args.trials, args.ci_mode);
    let records = harness::run_norms(&ks, args.d, trials, args.seed, args.base)?;
    emit(
        args.out.as_deref(),
        |w| harness::write_norms_summary_csv(&records, w),
        |w| harness::write_norms_csv(&records, w),
    )
}

fn run_bounds(args: BoundsArgs) -> Result<()> {
    let reports = harness::run_bounds(args.k, args.d, args.trials, args.seed, args.base, args.lambda)?;
    emit(
        args.out.as_deref(),
        |w| harness::write_bounds_summary_csv(&reports, w),
        |w| harness::write_bounds_csv(&reports, w),
    )
}

fn run_train(args: TrainArgs) -> Result<()> {
    let loss = match LossKind::parse_list(&args.loss)?.as_slice() {
        [one] => *one,
        _ => return Err(Error::InvalidConfig("train takes a single loss".into())),
    };
    let opts = TrainOptions {
        dataset: args.dataset,
        embeddings: args.embeddings,
        out: args.out,
        test: args.test,
        base: args.base,
        loss,
        iterations: args.iterations,
        eta: args.eta,
        bound: args.bound,
        averaging: !args.no_averaging,
        shuffle: args.shuffle,
        seed: args.seed,
    };
    let outcome = harness::run_train(&opts)?;
    let e = outcome.evaluation;
    eprintln!(
        "top1 {} similarity {} loss {} (k' = {}, height {})",
        e.top1,
        e.similarity_accuracy.unwrap_or(f64::NAN),
        e.mean_loss,
        outcome.k_prime,
        outcome.tree_height
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Exp1(a) => run_experiment(Experiment::I, a),
        Command::Exp2(a) => run_experiment(Experiment::II, a),
        Command::Exp3(a) => run_experiment(Experiment::III, a),
        Command::Exp4(a) => run_experiment(Experiment::IV, a),
        Command::Norms(a) => run_norms(a),
        Command::Bounds(a) => run_bounds(a),
        Command::Train(a) => run_train(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
