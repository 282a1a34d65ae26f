//! CSV tables and the run manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::Resolved;
use super::ExpError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
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

/// 17 significant digits, so the text round-trips to the same `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Float(v) => format_float(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Bool(v) => v.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Float value of column `name` in row `i`.
    pub fn float(&self, i: usize, name: &str) -> Option<f64> {
        match self.rows.get(i)?.get(self.column(name)?)? {
            Cell::Float(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn text(&self, i: usize, name: &str) -> Option<String> {
        Some(format_cell(self.rows.get(i)?.get(self.column(name)?)?))
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(format_cell).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentManifest {
    pub experiment: String,
    pub artifact: String,
    pub version: String,
    pub timestamp_unix: u64,
    pub seed: u64,
    /// Half-open range of stream ids used under `seed`.
    pub streams: (u64, u64),
    pub threads: usize,
    pub config: Resolved,
    pub files: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `results.csv` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, table: &Table, mut manifest: ExperimentManifest) -> Result<ExperimentManifest, ExpError> {
    std::fs::create_dir_all(dir)?;
    let csv = table.to_csv();
    std::fs::write(dir.join("results.csv"), &csv)?;
    manifest.files = vec![FileDigest { name: "results.csv".into(), bytes: csv.len() as u64, sha256: sha256_hex(csv.as_bytes()) }];
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| ExpError::Io(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}
