//! Long-format result tables written as CSV or JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{Map, Number, Value as Json};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// Rounds to 9 significant digits.
fn round9(v: f64) -> f64 {
    if v.is_finite() {
        format!("{v:.8e}").parse().unwrap_or(v)
    } else {
        v
    }
}

/// Float text with 9 significant digits; always carries a `.` or an
/// exponent so it reads back as a float.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{:?}", round9(v))
    }
}

impl Value {
    fn to_cell(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => format_float(*v),
            Value::Bool(v) => v.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn from_cell(cell: &str) -> Value {
        match cell {
            "inf" => return Value::Float(f64::INFINITY),
            "-inf" => return Value::Float(f64::NEG_INFINITY),
            "nan" => return Value::Float(f64::NAN),
            "true" => return Value::Bool(true),
            "false" => return Value::Bool(false),
            _ => {}
        }
        let numeric = cell.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-');
        if numeric {
            if cell.contains(['.', 'e', 'E']) {
                if let Ok(v) = cell.parse() {
                    return Value::Float(v);
                }
            } else if let Ok(v) = cell.parse() {
                return Value::Int(v);
            }
        }
        Value::Text(cell.to_string())
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Int(v) => Json::from(*v),
            Value::Float(v) => match Number::from_f64(round9(*v)) {
                Some(n) => Json::Number(n),
                None => Json::String(format_float(*v)),
            },
            Value::Bool(v) => Json::Bool(*v),
            Value::Text(s) => Json::String(s.clone()),
        }
    }

    fn from_json(v: &Json) -> Result<Value> {
        Ok(match v {
            Json::Bool(b) => Value::Bool(*b),
            Json::Number(n) => match (n.as_i64(), n.as_f64()) {
                (Some(i), _) if !n.is_f64() => Value::Int(i),
                (_, Some(f)) => Value::Float(f),
                _ => return Err(Error::Schema(format!("unsupported number {n}"))),
            },
            Json::String(s) => match s.as_str() {
                "inf" | "-inf" | "nan" => Value::from_cell(s),
                _ => Value::Text(s.clone()),
            },
            other => return Err(Error::Schema(format!("unsupported JSON value {other}"))),
        })
    }

    /// Float view of numeric values.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }
}

/// Rows of values under a fixed column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if the width does not match the header.
    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Float values of a column, in row order.
    pub fn column_f64(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.column(name)?;
        Some(self.rows.iter().map(|r| r[c].as_f64()).collect())
    }

    /// Same table with floats rounded as on disk.
    pub fn rounded(&self) -> Table {
        Table {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|v| match v {
                            Value::Float(f) => Value::Float(round9(*f)),
                            other => other.clone(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        // writing to memory cannot fail
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::to_cell))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn to_json_string(&self) -> String {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Json> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(r.iter().map(Value::to_json))
                    .collect();
                Json::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Json::Array(rows)).expect("json encoding");
        s.push('\n');
        s
    }
}

/// Writes a table. Column order is the table's; floats carry 9 significant
/// digits. JSON output is an array of row objects.
pub fn write_results(table: &Table, path: &Path, format: Format) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let text = match format {
        Format::Csv => table.to_csv_string(),
        Format::Json => table.to_json_string(),
    };
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`write_results`].
///
/// JSON tables carry no header, so an empty JSON array yields no columns.
pub fn read_results(path: &Path, format: Format) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Csv => {
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let columns = rdr
                .headers()
                .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
                .iter()
                .map(str::to_string)
                .collect();
            let mut table = Table {
                columns,
                rows: Vec::new(),
            };
            for rec in rdr.records() {
                let rec = rec.map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
                table.rows.push(rec.iter().map(Value::from_cell).collect());
            }
            Ok(table)
        }
        Format::Json => {
            let json: Json = serde_json::from_str(&text)
                .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
            let Json::Array(items) = json else {
                return Err(Error::Schema(format!(
                    "{}: expected a JSON array of rows",
                    path.display()
                )));
            };
            let mut table = Table::default();
            for item in items {
                let Json::Object(obj) = item else {
                    return Err(Error::Schema(format!(
                        "{}: rows must be JSON objects",
                        path.display()
                    )));
                };
                if table.columns.is_empty() {
                    table.columns = obj.keys().cloned().collect();
                }
                let row = obj.values().map(Value::from_json).collect::<Result<_>>()?;
                table.rows.push(row);
            }
            Ok(table)
        }
    }
}
