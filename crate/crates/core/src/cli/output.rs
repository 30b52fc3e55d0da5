//! Tables written as CSV (17 significant digits, complex values split into
//! re/im columns) or JSON.

use serde_json::{json, Map, Value};
use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    B(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Lossless decimal form of a double.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    pub fn text(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::U(u) => u.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) if x.is_finite() => json!(x),
            Cell::F(_) | Cell::Empty => Value::Null,
            Cell::U(u) => json!(u),
            Cell::S(s) => json!(s),
            Cell::B(b) => json!(b),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Run-level results (reported on stderr for CSV, embedded for JSON).
    pub summary: Vec<(String, Cell)>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn render(table: &Table, format: Format, with_timestamp: bool) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::Csv => {
            if with_timestamp {
                writeln!(out, "# generated-unix-time {}", timestamp())?;
            }
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&table.columns)?;
            for r in &table.rows {
                w.write_record(r.iter().map(Cell::text))?;
            }
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| Value::Object(table.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect::<Map<_, _>>()))
                .collect();
            let mut doc = Map::new();
            if with_timestamp {
                doc.insert("generated_unix_time".into(), json!(timestamp()));
            }
            doc.insert("columns".into(), json!(table.columns));
            doc.insert("rows".into(), Value::Array(rows));
            let summary: Map<_, _> = table.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect();
            doc.insert("summary".into(), Value::Object(summary));
            serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubles_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_and_json_agree() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![0.1.into(), Cell::Empty, "x,y".into()]);
        let csv = String::from_utf8(render(&t, Format::Csv, false).unwrap()).unwrap();
        assert_eq!(csv, "a,b,c\n1.0000000000000001e-1,,\"x,y\"\n");
        let js: Value = serde_json::from_slice(&render(&t, Format::Json, false).unwrap()).unwrap();
        assert_eq!(js["rows"][0]["a"].as_f64(), Some(0.1));
        assert!(js["rows"][0]["b"].is_null());
    }
}
