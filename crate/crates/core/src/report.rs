//! Report files: a header describing the run, followed by CSV rows or a JSON
//! body. Nothing time- or host-dependent is written, so equal inputs give
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::numerics::QuadratureConfig;

pub const SCHEMA_VERSION: &str = "bernaudit-report/1";

/// Environment variable naming the default report directory.
pub const OUTPUT_DIR_ENV: &str = "BERNAUDIT_OUTPUT_DIR";

pub fn report_schema_version() -> &'static str {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub schema: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub quadrature: QuadratureConfig,
    pub grids: BTreeMap<String, Value>,
    pub notes: Vec<String>,
}

impl Header {
    pub fn new(command: &str, quadrature: QuadratureConfig) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            quadrature,
            grids: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn grid(mut self, name: &str, values: impl Serialize) -> Self {
        self.grids
            .insert(name.to_string(), serde_json::to_value(values).unwrap_or(Value::Null));
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }
}

/// `<dir>/<stem>.<ext>`, where `dir` comes from the environment or is the
/// working directory.
pub fn default_output_path(stem: &str, format: OutputFormat) -> PathBuf {
    let dir = std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join(format!("{stem}.{}", format.extension()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `# key: value` header lines and then the rows with a column row.
pub fn write_csv<T: Serialize>(path: &Path, header: &Header, rows: &[T]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# schema: {}", header.schema)?;
    writeln!(out, "# tool_version: {}", header.tool_version)?;
    writeln!(out, "# command: {}", header.command)?;
    writeln!(out, "# quadrature: {}", serde_json::to_string(&header.quadrature)?)?;
    for (name, values) in &header.grids {
        writeln!(out, "# grid.{name}: {values}")?;
    }
    for note in &header.notes {
        writeln!(out, "# note: {note}")?;
    }
    let mut w = csv::Writer::from_writer(&mut out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    Ok(())
}

/// Writes `{"header": …, <body fields>}` as pretty JSON.
pub fn write_json(path: &Path, header: &Header, body: Value) -> Result<()> {
    let mut doc = json!({ "header": header });
    if let (Value::Object(dst), Value::Object(src)) = (&mut doc, body) {
        dst.extend(src);
    }
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
