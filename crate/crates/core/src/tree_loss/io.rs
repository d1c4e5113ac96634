//! Text serialization of parameter matrices: a `variant rows cols` header,
//! one line of space-separated values per row, and for U/V matrices the
//! path table in its own text format.

use std::io::{BufRead, Write};
use std::sync::Arc;

use ndarray::Array2;

use super::{ParamMatrix, Variant};
use crate::cover_tree::PathTable;
use crate::error::{Error, Result};

impl ParamMatrix {
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.variant(), self.rows(), self.d())?;
        for row in self.entries.rows() {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        if let Some(paths) = &self.paths {
            paths.write_text(&mut out)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [variant, rows, cols] = fields.as_slice() else {
            return Err(Error::input(format!("bad parameter header {:?}", line.trim())));
        };
        let variant = match *variant {
            "FLAT" => Variant::Flat,
            "U" => Variant::U,
            "V" => Variant::V,
            other => return Err(Error::input(format!("unknown variant {other:?}"))),
        };
        let dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::input(format!("bad dimension {s:?}")))
        };
        let (rows, cols) = (dim(rows)?, dim(cols)?);
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            line.clear();
            reader.read_line(&mut line)?;
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::input(format!("row {r}: bad value {tok:?}")))?,
                );
            }
            if values.len() - before != cols {
                return Err(Error::input(format!(
                    "row {r}: expected {cols} values, found {}",
                    values.len() - before
                )));
            }
        }
        let entries = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::input(e.to_string()))?;
        if variant == Variant::Flat {
            return ParamMatrix::flat(entries);
        }
        let paths = PathTable::read_text(&mut reader)?;
        let declared = match paths.variant() {
            crate::cover_tree::TreeVariant::U => Variant::U,
            crate::cover_tree::TreeVariant::V => Variant::V,
        };
        if declared != variant {
            return Err(Error::input(format!(
                "{variant} parameters carry a {declared} path table"
            )));
        }
        ParamMatrix::tree(entries, Arc::new(paths))
    }
}
