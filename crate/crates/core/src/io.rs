//! Plain-text artifact formats: CSV with a header row and numbers printed
//! with 17 significant digits, and pretty-printed JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest form that always round-trips: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")),
    }
}

/// Numeric table: named columns, row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: usize,
    pub data: Vec<f64>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: 0,
            data: Vec::new(),
        }
    }

    pub fn cols(&self) -> usize {
        self.header.len()
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols(), "row width must match header");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols()..(i + 1) * self.cols()]
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(
            (0..self.rows)
                .map(|i| self.data[i * self.cols() + j])
                .collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::parse(path, "empty CSV file"))?
            .split(',')
            .map(|h| h.trim().to_string())
            .collect();
        let mut table = Table::new(header);
        for (lineno, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(parse_f64)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, format!("row {}: {e}", lineno + 1)))?;
            if row.len() != table.cols() {
                return Err(Error::parse(
                    path,
                    format!(
                        "row {} has {} fields, header has {}",
                        lineno + 1,
                        row.len(),
                        table.cols()
                    ),
                ));
            }
            table.push(&row);
        }
        Ok(table)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    write_text(path, &table.to_csv())
}

pub fn read_table(path: &Path) -> Result<Table> {
    Table::from_csv(&read_text(path)?, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

/// Deserialize JSON; errors name the offending field path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::parse(path, format!("field `{field}`: {}", e.into_inner()))
    })
}

/// Column names `prefix_1..prefix_n`.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}
