//! Output tables and their CSV and JSON encodings.

use std::io::Write;

use serde_json::{json, Value as Json};

use crate::config::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn csv(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) | Cell::Empty => Json::Null,
            Cell::Int(i) => json!(i),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Versioned schema tag, e.g. `polaron-bounds/1`.
    pub schema: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Free-form summary lines; `#`-prefixed after the CSV body.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(schema: &'static str, columns: Vec<String>) -> Self {
        Table { schema, columns, rows: Vec::new(), notes: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// The numeric values of one column, `None` for empty cells.
    pub fn values(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column(name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn write<W: Write>(&self, format: Format, out: &mut W) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv<W: Write>(&self, out: &mut W) -> Result<(), CliError> {
        {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(&self.columns).map_err(csv_error)?;
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::csv)).map_err(csv_error)?;
            }
            w.flush()?;
        }
        for n in &self.notes {
            for line in n.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        Ok(())
    }

    fn write_json<W: Write>(&self, out: &mut W) -> Result<(), CliError> {
        let rows: Vec<Json> = self.rows.iter().map(|r| Json::Array(r.iter().map(Cell::json).collect())).collect();
        let doc = json!({
            "schema": self.schema,
            "columns": self.columns,
            "rows": rows,
            "notes": self.notes,
        });
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| CliError::Io(e.into()))?;
        writeln!(out)?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("test/1", vec!["a".into(), "b".into(), "c".into()]);
        t.rows.push(vec![Cell::Num(0.1), Cell::Empty, Cell::Text("x,y".into())]);
        t.notes.push("done".into());
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write(Format::Csv, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "a,b,c\n1.0000000000000001e-1,,\"x,y\"\n# done\n");
    }

    #[test]
    fn csv_round_trips_floats() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324] {
            let s = Cell::Num(x).csv();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_layout() {
        let mut buf = Vec::new();
        sample().write(Format::Json, &mut buf).unwrap();
        let v: Json = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["schema"], "test/1");
        assert_eq!(v["rows"][0][0], 0.1);
        assert!(v["rows"][0][1].is_null());
    }
}
