//! Tabular sweep records and their CSV serialization. Every table carries a
//! header row; cell formatting uses shortest round-trip decimals so identical
//! runs serialize to identical bytes.

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Grid results: one row per grid point per seed.
#[derive(Debug, Clone)]
pub struct SweepResult {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl SweepResult {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        SweepResult {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// RFC 4180 CSV with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}

/// Key tuples already present in an existing sweep CSV, for `--resume`.
/// Keys are the rendered values of the named columns, in the order given.
pub fn existing_keys<R: Read>(reader: R, key_columns: &[&str]) -> Result<HashSet<Vec<String>>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    let mut positions = Vec::with_capacity(key_columns.len());
    for &key in key_columns {
        let pos = header
            .iter()
            .position(|h| h == key)
            .ok_or_else(|| Error::Validation(format!("resume file lacks column '{key}'")))?;
        positions.push(pos);
    }
    let mut keys = HashSet::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        keys.insert(
            positions
                .iter()
                .map(|&p| record.get(p).unwrap_or("").to_string())
                .collect(),
        );
    }
    Ok(keys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_quoting() {
        let mut t = SweepResult::new(vec!["k", "tau", "note"]);
        t.push_row(vec![10usize.into(), 0.05.into(), "plain".into()]);
        t.push_row(vec![20usize.into(), (1.0 / 3.0).into(), "with, comma".into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,tau,note\n"));
        assert!(text.contains("\"with, comma\""));
        assert!(text.contains("0.3333333333333333"));

        let keys = existing_keys(&buf[..], &["k"]).unwrap();
        assert!(keys.contains(&vec!["10".to_string()]));
        assert!(keys.contains(&vec!["20".to_string()]));
        assert_eq!(keys.len(), 2);
    }

    #[test]
    fn identical_tables_serialize_identically() {
        let build = || {
            let mut t = SweepResult::new(vec!["a", "b"]);
            t.push_row(vec![1usize.into(), 0.1f64.into()]);
            t
        };
        let mut b1 = Vec::new();
        let mut b2 = Vec::new();
        build().write_csv(&mut b1).unwrap();
        build().write_csv(&mut b2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn missing_key_column_is_an_error() {
        let mut t = SweepResult::new(vec!["a"]);
        t.push_row(vec![1usize.into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(existing_keys(&buf[..], &["missing"]).is_err());
    }
}
