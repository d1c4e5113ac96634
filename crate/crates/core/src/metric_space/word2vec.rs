//! Reader and writer for the word2vec text format.
//!
//! The first line holds `k m`; each following line is a label token and
//! `m` whitespace-separated floats. Line order defines class indices.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub labels: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl Embeddings {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Self::read(BufReader::new(file), path)
    }

    /// Parses embeddings; `source` is only used in error messages.
    pub fn read<R: BufRead>(reader: R, source: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            msg,
        };
        let mut lines = reader.lines().enumerate();

        let (k, m) = loop {
            let Some((idx, line)) = lines.next() else {
                return Err(parse_err(1, "missing header line \"k m\"".into()));
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [k, m] => k.parse::<usize>().ok().zip(m.parse::<usize>().ok()),
                _ => None,
            };
            match parsed {
                Some((k, m)) if k >= 1 && m >= 1 => break (k, m),
                _ => {
                    return Err(parse_err(
                        idx + 1,
                        format!("expected header \"k m\" with positive counts, got {line:?}"),
                    ))
                }
            }
        };

        let mut labels = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            if labels.len() == k {
                return Err(parse_err(lineno, format!("more than {k} embeddings")));
            }
            let mut fields = line.split_whitespace();
            let label = fields.next().expect("non-empty line has a token");
            let values = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(lineno, format!("invalid float {f:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != m {
                return Err(parse_err(
                    lineno,
                    format!("expected {m} values for {label:?}, found {}", values.len()),
                ));
            }
            if labels.iter().any(|l| l == label) {
                return Err(parse_err(lineno, format!("duplicate label {label:?}")));
            }
            labels.push(label.to_string());
            vectors.push(values);
        }
        if labels.len() != k {
            return Err(parse_err(
                0,
                format!("header declares {k} embeddings, found {}", labels.len()),
            ));
        }
        Ok(Embeddings { labels, vectors })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim())?;
        for (label, v) in self.labels.iter().zip(&self.vectors) {
            write!(out, "{label}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
