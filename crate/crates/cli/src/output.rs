//! Result files: CSV tables, JSON envelopes and optional `.dat` plot data.
//!
//! Every file is written to a temporary name in the target directory and
//! renamed into place, so readers never see half-written output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use zeno_core::propagator::PropagatorCounters;

pub const ENVELOPE_SCHEMA: &str = "zeno.envelope/1";
/// Bumped whenever a CSV column set or payload layout changes. New columns
/// are only ever appended.
pub const ARTIFACT_VERSION: u32 = 1;

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format_number(*v),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map(Into::into).unwrap_or(Cell::Empty)
    }
}

/// 17 significant digits, always in exponent form, '.' as separator.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    /// CSV body with the config hash as the first column.
    pub fn to_csv(&self, hash: &str) -> String {
        let mut out = String::from("config_hash");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(hash);
            for c in row {
                out.push(',');
                out.push_str(&c.csv());
            }
            out.push('\n');
        }
        out
    }

    /// Whitespace separated columns for gnuplot; text cells become `"..."`.
    pub fn to_dat(&self, hash: &str) -> String {
        let mut out = format!("# config_hash {hash}\n# {}\n", self.columns.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Text(s) => format!("\"{s}\""),
                    Cell::Empty => "?".into(),
                    other => other.csv(),
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }
}

/// What an experiment produces before it is written out.
#[derive(Clone, Debug, Default)]
pub struct Artifact {
    pub payload: Value,
    pub tables: Vec<Table>,
    /// Guard and diagnostic flags worth a second look.
    pub flags: Vec<String>,
    pub counters: Option<PropagatorCounters>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

#[derive(Serialize)]
struct TableRef<'a> {
    name: &'a str,
    file: String,
    columns: &'a [&'static str],
    rows: usize,
}

/// Hashes and options that identify one run.
pub struct RunIdentity {
    pub kind: &'static str,
    pub config: Value,
    pub config_hash: String,
    pub series_key: String,
}

/// Write envelope, CSV tables and optionally `.dat` files; returns the paths.
pub fn write_artifact(
    dir: &Path,
    id: &RunIdentity,
    artifact: &Artifact,
    wall_clock: f64,
    dat: bool,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = format!("{}-{}", id.kind, &id.config_hash[..12]);
    let mut written = Vec::new();
    let mut refs = Vec::new();
    for t in &artifact.tables {
        let file = format!("{stem}-{}.csv", t.name);
        let path = dir.join(&file);
        write_atomic(&path, t.to_csv(&id.config_hash).as_bytes())?;
        written.push(path);
        if dat {
            let path = dir.join(format!("{stem}-{}.dat", t.name));
            write_atomic(&path, t.to_dat(&id.config_hash).as_bytes())?;
            written.push(path);
        }
        refs.push(TableRef { name: t.name, file, columns: &t.columns, rows: t.rows.len() });
    }
    let envelope = json!({
        "schema": ENVELOPE_SCHEMA,
        "artifact_version": ARTIFACT_VERSION,
        "generator": format!("zeno {}", env!("CARGO_PKG_VERSION")),
        "kind": id.kind,
        "config_hash": id.config_hash,
        "series_key": id.series_key,
        "config": id.config,
        "wall_clock_seconds": wall_clock,
        "flags": artifact.flags,
        "counters": artifact.counters,
        "tables": refs,
        "payload": artifact.payload,
    });
    let path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&envelope).expect("envelope serialises");
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    written.insert(0, path);
    Ok(written)
}
