//! CSV tables written by the command line tool.

use std::io::Write;

use super::{NormRecord, SummaryRow, TheoryReport, TrialRecord};
use crate::error::Result;

fn seed_range(first: u64, trials: usize) -> String {
    format!("{first}..{}", first.wrapping_add(trials as u64))
}

/// One row per sweep value and loss. `seeds` is the half-open range of
/// trial seeds the row aggregates.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], first_seed: u64, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "experiment",
        "sweep",
        "value",
        "loss",
        "trials",
        "seeds",
        "mean_accuracy",
        "stderr_accuracy",
        "mean_similarity_accuracy",
        "stderr_similarity_accuracy",
        "mean_test_loss",
        "stderr_test_loss",
        "mean_param_norm",
        "stderr_param_norm",
    ])?;
    for r in rows {
        wtr.write_record([
            r.experiment.to_string(),
            r.sweep.to_string(),
            r.value.to_string(),
            r.loss.to_string(),
            r.trials.to_string(),
            seed_range(first_seed, r.trials),
            r.accuracy.mean.to_string(),
            r.accuracy.stderr.to_string(),
            r.similarity_accuracy.mean.to_string(),
            r.similarity_accuracy.stderr.to_string(),
            r.mean_loss.mean.to_string(),
            r.mean_loss.stderr.to_string(),
            r.param_norm.mean.to_string(),
            r.param_norm.stderr.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trials_csv<W: Write>(rows: &[TrialRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "experiment",
        "sweep",
        "value",
        "seed",
        "loss",
        "accuracy",
        "similarity_accuracy",
        "test_loss",
        "param_norm",
        "tree_height",
        "k_prime",
    ])?;
    for r in rows {
        wtr.write_record([
            r.experiment.to_string(),
            r.sweep.to_string(),
            r.value.to_string(),
            r.seed.to_string(),
            r.loss.to_string(),
            r.accuracy.to_string(),
            r.similarity_accuracy.to_string(),
            r.mean_loss.to_string(),
            r.param_norm.to_string(),
            r.tree_height.to_string(),
            r.k_prime.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_bounds_csv<W: Write>(rows: &[TheoryReport], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "seed",
        "k",
        "b",
        "lambda",
        "c_estimate",
        "u_norm",
        "w_norm",
        "bound_lemma2",
        "bound_lemma3",
        "lemma2_satisfied",
        "lemma3_satisfied",
        "w_bound_satisfied",
    ])?;
    for r in rows {
        wtr.write_record([
            r.seed.map_or(String::new(), |s| s.to_string()),
            r.k.to_string(),
            r.b.to_string(),
            r.lambda.to_string(),
            r.c_estimate.to_string(),
            r.u_norm.to_string(),
            r.w_norm.to_string(),
            r.bound_lemma2.to_string(),
            r.bound_lemma3.to_string(),
            r.lemma2_satisfied.to_string(),
            r.lemma3_satisfied.to_string(),
            r.w_bound_satisfied.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_norms_csv<W: Write>(rows: &[NormRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["k", "seed", "k_prime", "w_norm", "u_norm", "v_norm"])?;
    for r in rows {
        wtr.write_record([
            r.k.to_string(),
            r.seed.to_string(),
            r.k_prime.to_string(),
            r.w_norm.to_string(),
            r.u_norm.to_string(),
            r.v_norm.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Means per class count of the raw norm records.
pub fn write_norms_summary_csv<W: Write>(rows: &[NormRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "k",
        "trials",
        "mean_k_prime",
        "mean_w_norm",
        "mean_u_norm",
        "mean_v_norm",
    ])?;
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.dedup();
    for k in ks {
        let group: Vec<&NormRecord> = rows.iter().filter(|r| r.k == k).collect();
        let n = group.len() as f64;
        let mean = |f: fn(&NormRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
        wtr.write_record([
            k.to_string(),
            group.len().to_string(),
            mean(|r| r.k_prime as f64).to_string(),
            mean(|r| r.w_norm).to_string(),
            mean(|r| r.u_norm).to_string(),
            mean(|r| r.v_norm).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Satisfaction rates and mean norms over all reports.
pub fn write_bounds_summary_csv<W: Write>(rows: &[TheoryReport], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "trials",
        "lemma2_rate",
        "lemma3_rate",
        "w_bound_rate",
        "mean_u_norm",
        "mean_w_norm",
        "mean_bound_lemma2",
        "mean_bound_lemma3",
        "mean_c_estimate",
    ])?;
    let n = rows.len() as f64;
    let rate = |f: fn(&TheoryReport) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / n;
    let mean = |f: fn(&TheoryReport) -> f64| rows.iter().map(f).sum::<f64>() / n;
    wtr.write_record([
        rows.len().to_string(),
        rate(|r| r.lemma2_satisfied).to_string(),
        rate(|r| r.lemma3_satisfied).to_string(),
        rate(|r| r.w_bound_satisfied).to_string(),
        mean(|r| r.u_norm).to_string(),
        mean(|r| r.w_norm).to_string(),
        mean(|r| r.bound_lemma2).to_string(),
        mean(|r| r.bound_lemma3).to_string(),
        mean(|r| r.c_estimate).to_string(),
    ])?;
    wtr.flush()?;
    Ok(())
}
