//! CSV tables with round-trippable numbers.

use std::fmt::Write as _;

/// Numeric table written with a header row and 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Builds a table from equal-length columns.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Self {
        let n = columns.first().map_or(0, |c| c.1.len());
        let mut t = Self::new(columns.iter().map(|c| c.0.clone()));
        for k in 0..n {
            t.push(columns.iter().map(|c| c.1[k]).collect());
        }
        t
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.header.join(","));
        s.push_str("\r\n");
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                // normalise −0 so that equal values render identically
                let _ = write!(s, "{:.16e}", if *v == 0.0 { 0.0 } else { *v });
            }
            s.push_str("\r\n");
        }
        s
    }
}

/// Table of named scalars (`quantity,value`), for closed-form results.
pub fn named_values(values: &[(&str, f64)]) -> String {
    let mut s = String::from("quantity,value\r\n");
    for (name, v) in values {
        let _ = write!(s, "{name},{v:.16e}\r\n");
    }
    s
}
