//! Report rendering. Every float is emitted with 17 significant digits so
//! identical invocations produce byte-identical output files.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// One typed value in a report row.
#[derive(Clone, Debug)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    /// Present-or-empty float column (e.g. standard errors of exact checks).
    OptFloat(Option<f64>),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// An ordered list of named cells.
pub type Row = Vec<(&'static str, Cell)>;

/// A rendered command result: one row (single report) or many (tables);
/// all rows share the same column list.
pub struct Output {
    pub rows: Vec<Row>,
    /// Single reports render as a JSON object, tables as a JSON array.
    pub single: bool,
}

impl Output {
    pub fn single(row: Row) -> Self {
        Output { rows: vec![row], single: true }
    }

    pub fn table(rows: Vec<Row>) -> Self {
        Output { rows, single: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// 17 significant digits; round-trips every f64.
fn float_repr(v: f64) -> String {
    format!("{v:.16e}")
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

/// Non-finite floats have no JSON literal; they render as `null` (the
/// `finite` / `holds` columns carry the information).
fn json_cell(cell: &Cell) -> String {
    match cell {
        Cell::Float(v) | Cell::OptFloat(Some(v)) => {
            if v.is_finite() {
                float_repr(*v)
            } else {
                "null".into()
            }
        }
        Cell::OptFloat(None) => "null".into(),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => format!("\"{}\"", json_escape(s)),
        Cell::Bool(b) => b.to_string(),
    }
}

fn csv_cell(cell: &Cell) -> String {
    match cell {
        Cell::Float(v) | Cell::OptFloat(Some(v)) => float_repr(*v),
        Cell::OptFloat(None) => String::new(),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
        Cell::Bool(b) => b.to_string(),
    }
}

fn json_object(row: &Row) -> String {
    let fields: Vec<String> = row
        .iter()
        .map(|(name, cell)| format!("\"{}\": {}", json_escape(name), json_cell(cell)))
        .collect();
    format!("{{{}}}", fields.join(", "))
}

pub fn render(out: &Output, format: Format) -> String {
    match format {
        Format::Json => {
            if out.single {
                let mut text = json_object(&out.rows[0]);
                text.push('\n');
                text
            } else {
                let body: Vec<String> =
                    out.rows.iter().map(|r| format!("  {}", json_object(r))).collect();
                format!("[\n{}\n]\n", body.join(",\n"))
            }
        }
        Format::Csv => {
            let mut text = String::new();
            if let Some(first) = out.rows.first() {
                let header: Vec<&str> = first.iter().map(|(name, _)| *name).collect();
                text.push_str(&header.join(","));
                text.push('\n');
            }
            for row in &out.rows {
                let cells: Vec<String> = row.iter().map(|(_, cell)| csv_cell(cell)).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            text
        }
    }
}

pub fn write_rendered(text: &str, path: Option<&Path>) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}
