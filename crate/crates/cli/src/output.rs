//! Time-series files. Floats are written as `{:.16e}` (17 significant
//! digits) so identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A table of numbers with named columns; `failure` marks a series that was
/// cut short by an error.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Series {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        match format {
            Format::Csv => {
                writeln!(w, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
                if let Some(f) = &self.failure {
                    writeln!(w, "# FAILED: {}", f.replace('\n', " "))?;
                }
            }
            Format::Json => {
                serde_json::to_writer(&mut w, self)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Column names `prefix_i_j` of a `rows x cols` matrix in row-major order.
pub fn matrix_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| format!("{prefix}_{i}_{j}")))
        .collect()
}

pub fn vector_columns(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn row_major(m: &gaussdyn::Mat) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_float_format() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }

    #[test]
    fn column_names() {
        assert_eq!(matrix_columns("a", 1, 2), vec!["a_0_0", "a_0_1"]);
        assert_eq!(vector_columns("m", 2), vec!["m_0", "m_1"]);
    }
}
