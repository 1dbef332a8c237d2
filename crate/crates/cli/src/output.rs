//! Tables and their CSV/JSON encodings, with a provenance header.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v as i64)
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

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Plain decimal for ordinary magnitudes, exponent form otherwise. Both
/// are the shortest representation that round-trips.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem of the emitted artifact.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `#` lines (diagnostics, scalar results).
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// What produced an artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    pub tolerances: Vec<(String, f64)>,
    /// Seconds since the Unix epoch, only when requested.
    pub timestamp: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, canonical_config: &str, tolerances: Vec<(String, f64)>, timestamp: bool) -> Self {
        let digest = Sha256::digest(canonical_config.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let timestamp = timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Self {
            command: command.into(),
            config_sha256: hex,
            tolerances,
            timestamp,
        }
    }

    fn versions() -> String {
        format!("multifreq-cli {} / multifreq {}", env!("CARGO_PKG_VERSION"), multifreq::VERSION)
    }

    fn comment_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("# {}", Self::versions()),
            format!("# command: {}", self.command),
            format!("# config_sha256: {}", self.config_sha256),
        ];
        let tol: Vec<String> = self.tolerances.iter().map(|(k, v)| format!("{k}={}", format_f64(*v))).collect();
        out.push(format!("# tolerances: {}", tol.join(" ")));
        if let Some(ts) = self.timestamp {
            out.push(format!("# generated_unix: {ts}"));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "versions": Self::versions(),
            "command": self.command,
            "config_sha256": self.config_sha256,
            "tolerances": self.tolerances.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
        });
        if let Some(ts) = self.timestamp {
            v["generated_unix"] = json!(ts);
        }
        v
    }
}

pub fn encode_csv(table: &Table, provenance: &Provenance) -> Result<String> {
    let mut text = String::new();
    for line in provenance.comment_lines() {
        text.push_str(&line);
        text.push('\n');
    }
    for note in &table.notes {
        text.push_str("# ");
        text.push_str(note);
        text.push('\n');
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv))?;
    }
    text.push_str(std::str::from_utf8(&w.into_inner()?)?);
    Ok(text)
}

pub fn encode_json(table: &Table, provenance: &Provenance) -> Result<String> {
    let rows: Vec<Value> = table.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
    let doc = json!({
        "provenance": provenance.to_json(),
        "notes": table.notes,
        "columns": table.columns,
        "rows": rows,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Writes artifacts into one directory in one format.
#[derive(Debug, Clone)]
pub struct Writer {
    pub dir: PathBuf,
    pub format: Format,
    pub provenance: Provenance,
}

impl Writer {
    fn write_text(&self, file: &str, text: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.dir.join(file);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn table(&self, table: &Table) -> Result<PathBuf> {
        match self.format {
            Format::Csv => self.write_text(&format!("{}.csv", table.name), &encode_csv(table, &self.provenance)?),
            Format::Json => self.write_text(&format!("{}.json", table.name), &encode_json(table, &self.provenance)?),
        }
    }

    /// A JSON document with the provenance attached, e.g. a sweep sidecar.
    /// The file is `<stem>.meta.json` when tables go to JSON too.
    pub fn sidecar(&self, stem: &str, mut body: Value) -> Result<PathBuf> {
        body["provenance"] = self.provenance.to_json();
        let file = match self.format {
            Format::Csv => format!("{stem}.json"),
            Format::Json => format!("{stem}.meta.json"),
        };
        self.write_text(&file, &(serde_json::to_string_pretty(&body)? + "\n"))
    }
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}
