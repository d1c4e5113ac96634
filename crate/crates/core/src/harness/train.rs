//! Training on user files: labeled features plus word2vec label embeddings.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;

use super::LossKind;
use crate::cover_tree::CoverTree;
use crate::error::{Error, Result};
use crate::metric_space::word2vec::Embeddings;
use crate::metric_space::LabelMetric;
use crate::optimizer::{initialize_params, sgd_train, InitScheme, SgdConfig, StepSize};
use crate::tree_loss::{Dataset, Evaluation};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    /// CSV whose first column names a label of the embeddings file.
    pub dataset: PathBuf,
    pub embeddings: PathBuf,
    /// Evaluation CSV; model files are written next to it.
    pub out: PathBuf,
    /// Held-out CSV in the same format; the training set is scored when absent.
    pub test: Option<PathBuf>,
    pub base: f64,
    pub loss: LossKind,
    /// Defaults to 20 passes worth of samples.
    pub iterations: Option<usize>,
    /// Constant step size; the theory step is used when absent.
    pub eta: Option<f64>,
    /// Assumed bound on the optimal parameter norm for the theory step;
    /// defaults to `sqrt(k)`, i.e. unit-norm class vectors.
    pub bound: Option<f64>,
    pub averaging: bool,
    pub shuffle: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub evaluation: Evaluation,
    pub params_path: PathBuf,
    pub tree_path: PathBuf,
    pub trajectory_path: PathBuf,
    pub k_prime: usize,
    pub tree_height: usize,
}

/// `<dir>/<stem>.<suffix>` next to `out`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Reads a CSV of `label,x1,..,xd` rows, mapping label names through
/// `embeddings`. A first row whose feature fields are not all numbers is a
/// header. Every label absent from the embeddings is reported at once.
pub fn read_named_dataset<R: Read>(reader: R, source: &Path, embeddings: &Embeddings) -> Result<Dataset> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line: line as usize,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut missing = BTreeSet::new();
    let mut d = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Option<f64>> = record
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if let Some(bad) = parsed.iter().position(Option::is_none) {
            if idx == 0 {
                continue;
            }
            return Err(parse_err(line, format!("invalid feature value {:?}", &record[bad + 1])));
        }
        match d {
            None => d = Some(parsed.len()),
            Some(d) if d != parsed.len() => {
                return Err(parse_err(line, format!("expected {d} features, found {}", parsed.len())))
            }
            _ => {}
        }
        values.extend(parsed.into_iter().flatten());
        let name = &record[0];
        match embeddings.index_of(name) {
            Some(i) => labels.push(i),
            None => {
                missing.insert(name.to_string());
                labels.push(0);
            }
        }
    }
    if !missing.is_empty() {
        let names: Vec<String> = missing.into_iter().collect();
        return Err(Error::InvalidInput(format!(
            "{}: labels missing from the embeddings: {}",
            source.display(),
            names.join(", ")
        )));
    }
    let d = match d {
        Some(d) if d > 0 => d,
        _ => return Err(Error::input(format!("{}: no samples", source.display()))),
    };
    let features = Array2::from_shape_vec((labels.len(), d), values)
        .map_err(|e| Error::input(format!("{}: {e}", source.display())))?;
    Dataset::new(features, labels, embeddings.len())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Embeddings, metric, cover tree, SGD and evaluation in one pass. Writes
/// the evaluation CSV to `out` and `<stem>.params.txt`, `<stem>.tree.txt`
/// and `<stem>.trajectory.csv` beside it.
pub fn run_train(opts: &TrainOptions) -> Result<TrainOutcome> {
    let embeddings = Embeddings::read_path(&opts.embeddings)?;
    let train = read_named_dataset(File::open(&opts.dataset)?, &opts.dataset, &embeddings)?;
    let test = match &opts.test {
        Some(p) => read_named_dataset(File::open(p)?, p, &embeddings)?,
        None => train.clone(),
    };
    let k = embeddings.len();
    let metric = LabelMetric::from_embeddings(&embeddings.vectors)?;
    let tree = CoverTree::build(&metric, opts.base)?;
    let paths = Arc::new(tree.derive_v_tree());
    let layout = match opts.loss {
        LossKind::Tree => Some(paths.clone()),
        LossKind::Xent => None,
    };
    let init = initialize_params(k, layout, train.d(), InitScheme::Zeros, opts.seed)?;

    let iterations = opts.iterations.unwrap_or(super::ITERATIONS_PER_SAMPLE * train.n());
    let step = match opts.eta {
        Some(eta) => StepSize::Constant(eta),
        None => StepSize::Theory {
            bound: opts.bound.unwrap_or((k as f64).sqrt()),
            // All-zero features leave nothing to learn; any positive rho works.
            rho: if train.rho() > 0.0 { train.rho() } else { 1.0 },
        },
    };
    let config = SgdConfig {
        iterations,
        step,
        averaging: opts.averaging,
        seed: opts.seed,
        shuffle: opts.shuffle,
    };
    let result = sgd_train(&init, &train, &config)?;
    let evaluation = result.params.evaluate(&test, Some(&metric))?;

    let params_path = sibling(&opts.out, "params.txt");
    let tree_path = sibling(&opts.out, "tree.txt");
    let trajectory_path = sibling(&opts.out, "trajectory.csv");
    let mut w = create(&params_path)?;
    result.params.write_text(&mut w)?;
    w.flush()?;
    let mut w = create(&tree_path)?;
    tree.write_text(&mut w)?;
    w.flush()?;
    result.write_trajectory_csv(create(&trajectory_path)?)?;

    let mut wtr = csv::Writer::from_writer(create(&opts.out)?);
    wtr.write_record(["loss", "n", "k", "k_prime", "tree_height", "test_loss", "top1", "similarity_accuracy"])?;
    wtr.write_record([
        opts.loss.to_string(),
        test.n().to_string(),
        k.to_string(),
        paths.k_prime().to_string(),
        tree.height().to_string(),
        evaluation.mean_loss.to_string(),
        evaluation.top1.to_string(),
        evaluation.similarity_accuracy.unwrap_or(f64::NAN).to_string(),
    ])?;
    wtr.flush()?;

    Ok(TrainOutcome {
        evaluation,
        params_path,
        tree_path,
        trajectory_path,
        k_prime: paths.k_prime(),
        tree_height: tree.height(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb() -> Embeddings {
        Embeddings {
            labels: vec!["cat".into(), "dog".into()],
            vectors: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        }
    }

    #[test]
    fn named_labels_map_to_embedding_rows() {
        let text = "label,x\ndog,1.0\ncat,-2\n";
        let data = read_named_dataset(text.as_bytes(), Path::new("d.csv"), &emb()).unwrap();
        assert_eq!(data.labels(), &[1, 0]);
        assert_eq!(data.k(), 2);
    }

    #[test]
    fn missing_labels_are_named() {
        let text = "dog,1\nbird,2\nfish,3\nbird,4\n";
        let err = read_named_dataset(text.as_bytes(), Path::new("d.csv"), &emb()).unwrap_err();
        assert!(err.to_string().contains("bird, fish"), "{err}");
    }

    #[test]
    fn bad_values_carry_line_numbers() {
        let text = "dog,1\ncat,oops\n";
        let err = read_named_dataset(text.as_bytes(), Path::new("d.csv"), &emb()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("/tmp/run/eval.csv"), "tree.txt"), PathBuf::from("/tmp/run/eval.tree.txt"));
    }
}
