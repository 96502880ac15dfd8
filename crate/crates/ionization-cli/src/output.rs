//! Tabular output in CSV or JSON with a content digest.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::Format;

/// Named numeric columns, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// A non-finite entry, reported with its position.
#[derive(Debug, Clone, PartialEq)]
pub struct NonFiniteCell {
    pub row: usize,
    pub column: String,
    pub value: f64,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// First NaN or infinity, scanning row by row.
    pub fn check_finite(&self) -> Result<(), NonFiniteCell> {
        for (i, row) in self.rows.iter().enumerate() {
            for (c, v) in self.columns.iter().zip(row) {
                if !v.is_finite() {
                    return Err(NonFiniteCell { row: i, column: c.clone(), value: *v });
                }
            }
        }
        Ok(())
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(table: &Table) -> String {
    let mut s = table.columns.join(",");
    s.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// One array per column, keys in header order.
pub fn to_json(table: &Table) -> String {
    let mut map = serde_json::Map::new();
    for (k, name) in table.columns.iter().enumerate() {
        let col: Vec<serde_json::Value> = table.rows.iter().map(|r| serde_json::Value::from(r[k])).collect();
        map.insert(name.clone(), serde_json::Value::Array(col));
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("finite floats serialise");
    s.push('\n');
    s
}

pub fn render(table: &Table, format: Format) -> String {
    match format {
        Format::Csv => to_csv(table),
        Format::Json => to_json(table),
    }
}

/// Lower-case hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in hash {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Write the table and return the digest of the bytes written.
pub fn write_output(table: &Table, format: Format, path: &Path) -> std::io::Result<String> {
    let text = render(table, format);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text.as_bytes())?;
    Ok(digest(text.as_bytes()))
}

/// Parse CSV written by [`to_csv`].
pub fn parse_csv(text: &str) -> Option<Table> {
    let mut lines = text.lines();
    let columns: Vec<String> = lines.next()?.split(',').map(String::from).collect();
    let mut rows = Vec::new();
    for line in lines {
        let row: Option<Vec<f64>> = line.split(',').map(|c| c.parse().ok()).collect();
        rows.push(row?);
    }
    Some(Table { columns, rows })
}

/// Parse JSON written by [`to_json`].
pub fn parse_json(text: &str, columns: &[String]) -> Option<Table> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    let obj = v.as_object()?;
    let cols: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| obj.get(c)?.as_array()?.iter().map(|x| x.as_f64()).collect())
        .collect::<Option<_>>()?;
    let n = cols.first().map_or(0, Vec::len);
    let rows = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    Some(Table { columns: columns.to_vec(), rows })
}
