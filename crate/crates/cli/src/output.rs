//! Tables and their CSV/JSON emission.
//!
//! CSV output starts with one `# ` line holding the resolved config and the
//! code version as JSON, then a column row, then data. JSON output is a
//! single object with the same header fields plus `columns` and `rows`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    /// Printed with this many decimals in CSV.
    Fixed(f64, usize),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => x.to_string(),
            Cell::Fixed(x, d) => format!("{x:.d$}"),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) | Cell::Fixed(x, _) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }
}

/// Header fields shared by both formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub config: RunConfig,
    pub version: String,
}

pub fn render(config: &RunConfig, table: &Table) -> Result<Vec<u8>, CliError> {
    let header = Header {
        config: config.clone(),
        version: VERSION.to_string(),
    };
    match config.format {
        Format::Csv => {
            let line = serde_json::to_string(&header).map_err(|e| CliError::Io(e.to_string()))?;
            let mut out = format!("# {line}\n").into_bytes();
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&table.columns).map_err(io)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
            drop(w);
            Ok(out)
        }
        Format::Json => {
            let rows: Vec<Vec<Value>> = table.rows.iter().map(|r| r.iter().map(Cell::json).collect()).collect();
            let doc = serde_json::json!({
                "config": header.config,
                "version": header.version,
                "columns": table.columns,
                "rows": rows,
            });
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

fn io(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Recovers the header of a CSV or JSON output.
pub fn parse_header(output: &str) -> Result<Header, CliError> {
    let bad = |e: serde_json::Error| CliError::Config(format!("bad output header: {e}"));
    match output.strip_prefix("# ") {
        Some(rest) => serde_json::from_str(rest.lines().next().unwrap_or("")).map_err(bad),
        None => serde_json::from_str(output).map_err(bad),
    }
}
