//! Versioned report documents and tabular export.
//!
//! Every JSON document carries `"schema": "dqm-report/1"` and a `kind`
//! naming the body type. Tables are plain header/rows pairs whose numeric
//! cells are rendered with 17 significant digits, enough to round-trip an
//! f64.

use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA: &str = "dqm-report/1";

/// Wraps a serializable body as `{schema, kind, version, body}`.
pub fn envelope<T: Serialize>(kind: &str, body: &T) -> Value {
    json!({
        "schema": SCHEMA,
        "kind": kind,
        "version": env!("CARGO_PKG_VERSION"),
        "body": serde_json::to_value(body).unwrap_or(Value::Null),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("missing field `{0}`")]
    Missing(&'static str),
    #[error("unsupported schema `{0}`")]
    Version(String),
    #[error("expected kind `{expected}`, found `{found}`")]
    Kind { expected: String, found: String },
}

/// Structural check of an envelope; `kind` is compared when given.
pub fn validate_envelope(doc: &Value, kind: Option<&str>) -> Result<(), SchemaError> {
    let schema = doc
        .get("schema")
        .and_then(Value::as_str)
        .ok_or(SchemaError::Missing("schema"))?;
    if schema != SCHEMA {
        return Err(SchemaError::Version(schema.to_string()));
    }
    let found = doc
        .get("kind")
        .and_then(Value::as_str)
        .ok_or(SchemaError::Missing("kind"))?;
    if doc.get("body").is_none() {
        return Err(SchemaError::Missing("body"));
    }
    match kind {
        Some(k) if k != found => Err(SchemaError::Kind {
            expected: k.to_string(),
            found: found.to_string(),
        }),
        _ => Ok(()),
    }
}

/// `v` with 17 significant digits in scientific notation; non-finite
/// values print as `NaN`, `inf`, `-inf`.
pub fn sig17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => sig17(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A header and rows of cells, rendered by the caller's CSV writer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn rendered_rows(&self) -> impl Iterator<Item = Vec<String>> + '_ {
        self.rows.iter().map(|r| r.iter().map(Cell::render).collect())
    }
}
