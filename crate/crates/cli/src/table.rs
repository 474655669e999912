//! Result tables and their CSV / JSON encodings.

use std::io::{self, Write};

use serde_json::{Map, Value};

use crate::CliError;

/// Non-finite floats are written as these strings in JSON.
pub const INF_SENTINEL: &str = "inf";
pub const NEG_INF_SENTINEL: &str = "-inf";
pub const NAN_SENTINEL: &str = "nan";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Count(u64),
}

impl Cell {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Cell::Float(v) => v,
            Cell::Count(v) => v as f64,
        }
    }

    fn csv(&self) -> String {
        match *self {
            Cell::Float(v) if v.is_nan() => NAN_SENTINEL.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Count(v) => v.to_string(),
        }
    }

    fn json(&self) -> Value {
        match *self {
            Cell::Float(v) if v.is_nan() => Value::from(NAN_SENTINEL),
            Cell::Float(v) if v == f64::INFINITY => Value::from(INF_SENTINEL),
            Cell::Float(v) if v == f64::NEG_INFINITY => Value::from(NEG_INF_SENTINEL),
            Cell::Float(v) => Value::from(v),
            Cell::Count(v) => Value::from(v),
        }
    }

    fn from_json(v: &Value) -> Option<Cell> {
        match v {
            Value::String(s) if s == INF_SENTINEL => Some(Cell::Float(f64::INFINITY)),
            Value::String(s) if s == NEG_INF_SENTINEL => Some(Cell::Float(f64::NEG_INFINITY)),
            Value::String(s) if s == NAN_SENTINEL => Some(Cell::Float(f64::NAN)),
            Value::Number(n) if n.is_u64() => n.as_u64().map(Cell::Count),
            Value::Number(n) => n.as_f64().map(Cell::Float),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub description: String,
}

/// A named table plus the run metadata echoed into its header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: String,
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(command: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            command: command.to_string(),
            metadata: Vec::new(),
            columns: columns
                .iter()
                .map(|(n, d)| Column {
                    name: n.to_string(),
                    description: d.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Values of one column as floats.
    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    /// Two `#` lines (metadata, then column meanings), a header row, the data.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let meta: Vec<String> = self.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(w, "# twosource {} {}", self.command, meta.join(" "))?;
        let cols: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{}: {}", c.name, c.description))
            .collect();
        writeln!(w, "# columns: {}", cols.join("; "))?;
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(w, "{}", names.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let mut meta = Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), Value::from(v.clone()));
        }
        let mut columns = Map::new();
        for c in &self.columns {
            columns.insert(c.name.clone(), Value::from(c.description.clone()));
        }
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    m.insert(c.name.clone(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let mut top = Map::new();
        top.insert("command".into(), Value::from(self.command.clone()));
        top.insert("metadata".into(), Value::Object(meta));
        top.insert("columns".into(), Value::Object(columns));
        top.insert("rows".into(), Value::Array(rows));
        Value::Object(top)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut w, &self.to_json())?;
        writeln!(w)?;
        Ok(())
    }

    pub fn from_json(v: &Value) -> Result<Self, CliError> {
        let bad = |what: &str| CliError::Format(format!("malformed result JSON: {what}"));
        let command = v["command"].as_str().ok_or_else(|| bad("command"))?.to_string();
        let metadata = v["metadata"]
            .as_object()
            .ok_or_else(|| bad("metadata"))?
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_str().ok_or_else(|| bad(k))?.to_string())))
            .collect::<Result<Vec<_>, CliError>>()?;
        let columns: Vec<Column> = v["columns"]
            .as_object()
            .ok_or_else(|| bad("columns"))?
            .iter()
            .map(|(k, d)| Column {
                name: k.clone(),
                description: d.as_str().unwrap_or_default().to_string(),
            })
            .collect();
        let rows = v["rows"]
            .as_array()
            .ok_or_else(|| bad("rows"))?
            .iter()
            .map(|r| {
                columns
                    .iter()
                    .map(|c| Cell::from_json(&r[&c.name]).ok_or_else(|| bad(&c.name)))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            command,
            metadata,
            columns,
            rows,
        })
    }
}
