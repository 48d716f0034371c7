//! Versioned CSV tables. The first line is a comment carrying the schema and
//! the manifest hash, the second the column header. Floats are written in
//! the shortest form that parses back to the same value.

use std::io::Write;
use std::path::Path;

pub const CSV_SCHEMA: &str = "fedmr-csv/1";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::F(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::S(v.to_string())
    }
}

impl From<u8> for Cell {
    fn from(v: u8) -> Cell {
        Cell::I(v.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Cell {
        match v {
            Some(x) => Cell::F(x),
            None => Cell::S(String::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Table {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_bytes(&self, manifest_hash: &str) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "# schema={CSV_SCHEMA} manifest={manifest_hash}").unwrap();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns).unwrap();
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::render)).unwrap();
            }
            w.flush().unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path, manifest_hash: &str) -> std::io::Result<Vec<u8>> {
        let bytes = self.to_bytes(manifest_hash);
        std::fs::write(path, &bytes)?;
        Ok(bytes)
    }
}

/// Manifest hash from the first line of a result CSV.
pub fn embedded_hash(bytes: &[u8]) -> Option<String> {
    let first = bytes.split(|b| *b == b'\n').next()?;
    let line = std::str::from_utf8(first).ok()?;
    line.strip_prefix("# ")?
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("manifest="))
        .map(str::to_string)
}

/// Parsed CSV as numbers: header names and rows. Comment lines start with
/// `#`; empty or non-numeric cells (labels) read as NaN.
pub fn read_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        rows.push(rec.iter().map(|c| c.parse::<f64>().unwrap_or(f64::NAN)).collect());
    }
    Ok((header, rows))
}
