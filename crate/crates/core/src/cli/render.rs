//! Locale-free number formatting and CSV/JSON tables.

use std::str::FromStr;

use serde_json::{Map, Number, Value};

use super::config::Format;

/// Fixed decimals for magnitudes in `[1e-3, 1e15)` and zero, scientific
/// otherwise. Negative zero prints as zero.
pub fn fmt_num(v: f64, precision: usize) -> String {
    if !v.is_finite() {
        return String::new();
    }
    let v = if v == 0.0 { 0.0 } else { v };
    let mag = v.abs();
    if v == 0.0 || (1e-3..1e15).contains(&mag) {
        format!("{v:.precision$}")
    } else {
        format!("{v:.precision$e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
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
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, precision: usize) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => fmt_num(*v, precision),
                    Cell::Text(s) => s.clone(),
                    Cell::Bool(b) => b.to_string(),
                    Cell::Empty => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn row_object(&self, row: &[Cell], precision: usize) -> Value {
        let mut map = Map::new();
        for (name, cell) in self.columns.iter().zip(row) {
            let value = match cell {
                Cell::Num(v) if v.is_finite() => Value::Number(
                    Number::from_str(&fmt_num(*v, precision)).expect("formatted number parses"),
                ),
                Cell::Num(_) | Cell::Empty => Value::Null,
                Cell::Text(s) => Value::String(s.clone()),
                Cell::Bool(b) => Value::Bool(*b),
            };
            map.insert((*name).to_string(), value);
        }
        Value::Object(map)
    }

    /// A JSON array of row objects, or the lone object when `single` is set.
    pub fn to_json(&self, precision: usize, single: bool) -> String {
        let value = if single && self.rows.len() == 1 {
            self.row_object(&self.rows[0], precision)
        } else {
            Value::Array(
                self.rows
                    .iter()
                    .map(|r| self.row_object(r, precision))
                    .collect(),
            )
        };
        let mut out = serde_json::to_string_pretty(&value).expect("json values serialize");
        out.push('\n');
        out
    }

    pub fn render(&self, format: Format, precision: usize, single: bool) -> String {
        match format {
            Format::Csv => self.to_csv(precision),
            Format::Json => self.to_json(precision, single),
        }
    }
}

/// Machine-readable record for an infeasible or refused problem.
pub fn error_record(kind: &str, message: &str, format: Format) -> String {
    match format {
        Format::Csv => format!("status,kind\nerror,{kind}\n"),
        Format::Json => {
            let mut map = Map::new();
            map.insert("status".into(), Value::String("error".into()));
            map.insert("kind".into(), Value::String(kind.into()));
            map.insert("message".into(), Value::String(message.into()));
            let mut out =
                serde_json::to_string_pretty(&Value::Object(map)).expect("json values serialize");
            out.push('\n');
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_forms() {
        assert_eq!(fmt_num(1.0, 12), "1.000000000000");
        assert_eq!(fmt_num(-0.0, 3), "0.000");
        assert_eq!(fmt_num(0.0, 3), "0.000");
        assert_eq!(fmt_num(-0.5, 2), "-0.50");
        assert_eq!(fmt_num(1.5e-7, 3), "1.500e-7");
        assert_eq!(fmt_num(2e20, 2), "2.00e20");
        assert_eq!(fmt_num(f64::NAN, 2), "");
    }

    #[test]
    fn csv_and_json() {
        let mut t = Table::new(&["a", "b", "c", "d"]);
        t.push(vec![
            Cell::Num(0.25),
            "ok".into(),
            Cell::Bool(true),
            Cell::Empty,
        ]);
        assert_eq!(t.to_csv(3), "a,b,c,d\n0.250,ok,true,\n");
        let json = t.to_json(3, true);
        assert!(json.contains("\"a\": 0.250"), "{json}");
        assert!(json.contains("\"d\": null"));
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["b"], "ok");
    }
}
