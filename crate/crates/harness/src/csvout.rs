//! Rectangular tables and deterministic CSV emission.
//!
//! Floats print with 17 significant digits so every value round-trips
//! exactly through parse; re-emitting an identical table yields an
//! identical file byte for byte.

use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Int(v) => v.len(),
            Column::Float(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Column::Int(v) => v[row].to_string(),
            Column::Float(v) => format_float17(v[row]),
            Column::Text(v) => v[row].clone(),
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<(String, Column)>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, name: &str, column: Column) -> Self {
        self.columns.push((name.to_string(), column));
        self
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map(|(_, c)| c.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_rows();
        for (name, column) in &self.columns {
            if column.len() != n {
                return Err(HarnessError::Usage(format!(
                    "column {name} has {} rows, expected {n}",
                    column.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        self.validate()?;
        let mut out = String::new();
        let headers: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        out.push_str(&headers.join(","));
        out.push('\n');
        for row in 0..self.n_rows() {
            let cells: Vec<String> = self.columns.iter().map(|(_, c)| c.cell(row)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// 17 significant digits: exact f64 round-trip.
pub fn format_float17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a table as UTF-8 CSV with `\n` line endings.
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let body = table.to_csv_string()?;
    fs::write(path, body).map_err(|e| HarnessError::io(path.display().to_string(), e))
}
