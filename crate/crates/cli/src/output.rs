use std::io::Write;
use std::path::Path;

use fbcode_core::harness::{fmt_g9, round_g9};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::CONFIG_PREFIX;
use crate::error::{CliError, Result};

pub const TOOL: &str = concat!("fbcode ", env!("CARGO_PKG_VERSION"));

/// Comment header; its second line carries the resolved config.
pub fn header(command: &str, config: &impl Serialize) -> String {
    format!(
        "# {TOOL} {command}\n{CONFIG_PREFIX}{}\n",
        serde_json::to_string(config).expect("config serializes")
    )
}

/// Writes `text` to `path`, or to `stdout` when no path is given.
pub fn emit(path: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(CliError::from),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Rows of named cells, rendered as CSV or as JSON lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = self.columns.join(",") + "\n";
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(csv_cell).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => self
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(json_cell)).collect();
                    Value::Object(obj).to_string() + "\n"
                })
                .collect(),
        }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => fmt_g9(n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

fn json_cell(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => Value::from(round_g9(n.as_f64().unwrap_or(f64::NAN))),
        other => other.clone(),
    }
}

/// Artifact preamble: comment lines for CSV, a leading JSON object otherwise.
pub fn preamble(command: &str, config: &impl Serialize, format: Format) -> String {
    match format {
        Format::Csv => header(command, config),
        Format::Json => {
            serde_json::json!({ "tool": TOOL, "command": command, "config": config }).to_string() + "\n"
        }
    }
}
