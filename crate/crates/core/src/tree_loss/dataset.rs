use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Labeled feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    k: usize,
    rho: f64,
}

impl Dataset {
    /// `features` is `n x d`; every label must lie in `0..k`.
    pub fn new(features: Array2<f64>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::input(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.ncols() == 0 {
            return Err(Error::input("features need at least one dimension"));
        }
        if let Some((i, y)) = labels.iter().enumerate().find(|(_, y)| **y >= k) {
            return Err(Error::input(format!("sample {i} has label {y} outside [0, {k})")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("features contain non-finite values"));
        }
        let rho = features
            .axis_iter(Axis(0))
            .map(|x| x.dot(&x).sqrt())
            .fold(0.0, f64::max);
        Ok(Dataset {
            features,
            labels,
            k,
            rho,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    /// Number of classes the labels range over.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Largest Euclidean feature norm.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> (ArrayView1<'_, f64>, usize) {
        (self.features.row(i), self.labels[i])
    }

    pub fn read_csv_path(path: &Path, k: Option<usize>) -> Result<Self> {
        Self::read_csv(File::open(path)?, path, k)
    }

    /// CSV with the class index in column 0 and the features after it. A
    /// header row is detected by a non-integer first field. Without `k` the
    /// class count is one past the largest label.
    pub fn read_csv<R: Read>(reader: R, source: &Path, k: Option<usize>) -> Result<Self> {
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
        let mut d = None;
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            let line = record.position().map_or(idx as u64 + 1, |p| p.line());
            let Some(first) = record.get(0) else { continue };
            let Ok(label) = first.parse::<usize>() else {
                if idx == 0 {
                    continue;
                }
                return Err(parse_err(line, format!("invalid class index {first:?}")));
            };
            let width = record.len() - 1;
            match d {
                None => d = Some(width),
                Some(d) if d != width => {
                    return Err(parse_err(line, format!("expected {d} features, found {width}")))
                }
                _ => {}
            }
            for field in record.iter().skip(1) {
                let v = field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("invalid feature value {field:?}")))?;
                values.push(v);
            }
            labels.push(label);
        }
        let d = d.ok_or_else(|| Error::input(format!("{}: no samples", source.display())))?;
        let n = labels.len();
        let max_label = labels.iter().copied().max().unwrap_or(0);
        let k = k.unwrap_or(max_label + 1);
        let features = Array2::from_shape_vec((n, d), values)
            .map_err(|e| Error::input(format!("{}: {e}", source.display())))?;
        Self::new(features, labels, k)
    }

    /// Writes a header `label,f0,..` and one row per sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string()];
        header.extend((0..self.d()).map(|j| format!("f{j}")));
        wtr.write_record(&header)?;
        for (x, y) in self.features.axis_iter(Axis(0)).zip(&self.labels) {
            let mut row = vec![y.to_string()];
            row.extend(x.iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
