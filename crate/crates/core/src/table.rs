//! Tabular results with a metadata header, written as CSV.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Column {
    Real(Vec<f64>),
    Int(Vec<i64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Real(v) => v.len(),
            Column::Int(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Real(v) => fmt_f64(v[i]),
            Column::Int(v) => v[i].to_string(),
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResultTable {
    pub columns: Vec<(String, Column)>,
    pub metadata: Vec<(String, String)>,
    pub summary: Vec<(String, f64)>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_real(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        self.push(name, Column::Real(values))
    }

    pub fn push_int(&mut self, name: &str, values: Vec<i64>) -> Result<()> {
        self.push(name, Column::Int(values))
    }

    fn push(&mut self, name: &str, col: Column) -> Result<()> {
        if let Some((_, first)) = self.columns.first() {
            if first.len() != col.len() {
                return domain(format!(
                    "column {name} has length {} but table has {}",
                    col.len(),
                    first.len()
                ));
            }
        }
        self.columns.push((name.to_string(), col));
        Ok(())
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn add_summary(&mut self, key: &str, value: f64) {
        self.summary.push((key.to_string(), value));
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map(|(_, c)| c.len()).unwrap_or(0)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn real(&self, name: &str) -> Option<&[f64]> {
        match self.column(name) {
            Some(Column::Real(v)) => Some(v),
            _ => None,
        }
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let v = v.replace('\n', " ");
            let _ = writeln!(s, "# {k}: {v}");
        }
        for (k, v) in &self.summary {
            let _ = writeln!(s, "# summary {k}: {}", fmt_f64(*v));
        }
        let names: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        let _ = writeln!(s, "{}", names.join(","));
        for i in 0..self.n_rows() {
            let row: Vec<String> = self.columns.iter().map(|(_, c)| c.cell(i)).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
