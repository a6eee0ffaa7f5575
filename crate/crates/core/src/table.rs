//! Tabulated results and their CSV/JSON forms.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedQuantities, SystemParams};
use crate::steady::SteadyState;
use crate::sweep::SweepSpec;

/// Marker written in place of values that could not be computed.
pub const UNSTABLE: &str = "unstable";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn unstable() -> Cell {
        Cell::Text(UNSTABLE.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn is_unstable(&self) -> bool {
        matches!(self, Cell::Text(t) if t == UNSTABLE)
    }

    fn write_csv(&self, out: &mut String) {
        match self {
            // Debug is the shortest representation that parses back exactly
            Cell::Num(v) => write!(out, "{v:?}").unwrap(),
            Cell::Text(t) => out.push_str(&csv_field(t)),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledSteadyState {
    pub label: String,
    /// `None` when no operating point exists for this variant.
    pub steady: Option<SteadyState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub params: SystemParams,
    pub derived: DerivedQuantities,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub steady: Vec<LabelledSteadyState>,
}

impl Metadata {
    pub fn new(params: SystemParams, derived: DerivedQuantities, timestamp: bool) -> Metadata {
        Metadata {
            version: version_string(),
            timestamp: timestamp.then(|| chrono::Utc::now().to_rfc3339()),
            params,
            derived,
            sweep: None,
            steady: Vec::new(),
        }
    }
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub metadata: Metadata,
    pub columns: Vec<Column>,
}

impl SpectrumTable {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn headers(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Header line plus one line per row; the metadata is not part of the CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let headers: Vec<String> = self.columns.iter().map(|c| csv_field(&c.name)).collect();
        out.push_str(&headers.join(","));
        out.push('\n');
        for r in 0..self.rows() {
            for (i, c) in self.columns.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                c.values[r].write_csv(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<SpectrumTable> {
        serde_json::from_str(text).map_err(|e| Error::Io(format!("cannot parse table: {e}")))
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Writes to `path` through a temporary file in the same directory, so a
    /// failed run never leaves a partial table behind. `None` writes to stdout.
    pub fn emit(&self, format: Format, path: Option<&Path>) -> Result<()> {
        let text = self.render(format);
        match path {
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()?;
            }
            Some(path) => write_atomic(path, text.as_bytes())?,
        }
        Ok(())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let fail = |e: std::io::Error| Error::Io(format!("cannot write {}: {e}", path.display()));
    std::fs::write(&tmp, bytes).map_err(fail)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        fail(e)
    })
}
