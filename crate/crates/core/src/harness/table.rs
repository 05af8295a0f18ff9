//! Homogeneous result rows and their CSV / JSON encodings.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::ConfigInvalid("format".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Shortest round-trip decimal; exponent form outside [1e-5, 1e16).
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(x) => f.write_str(&format_float(*x)),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Bool(b) => write!(f, "{b}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) => s.serialize_f64(*x),
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

/// Named fields in insertion order, serialized as one flat JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record(pub Vec<(String, Cell)>);

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.0.push((key.to_string(), value.into()));
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Cell>) -> Self {
        self.push(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(Cell::as_f64)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }
}

impl Serialize for Record {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// Rows sharing one column list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row; the cell count must match the header.
    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimMismatch {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Builds a table from records that all carry the same keys in the same
    /// order.
    pub fn from_records(records: &[Record]) -> Result<Self> {
        let Some(first) = records.first() else {
            return Ok(Self::default());
        };
        let mut t = Self::new(&first.keys().collect::<Vec<_>>());
        for r in records {
            if !r.keys().eq(t.columns.iter().map(String::as_str)) {
                return Err(Error::InvalidParam {
                    name: "rows".into(),
                    reason: "records do not share one set of fields".into(),
                });
            }
            t.rows.push(r.0.iter().map(|(_, v)| v.clone()).collect());
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|c| c.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let mut ser = serde_json::Serializer::pretty(w);
        self.serialize(&mut ser)?;
        Ok(())
    }

    pub fn write<W: Write>(&self, format: Format, mut w: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(&mut w),
            Format::Json => {
                self.write_json(&mut w)?;
                writeln!(w)?;
                Ok(())
            }
        }
    }
}

struct RowRef<'a>(&'a [String], &'a [Cell]);

impl Serialize for RowRef<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.rows.len()))?;
        for r in &self.rows {
            seq.serialize_element(&RowRef(&self.columns, r))?;
        }
        seq.end()
    }
}

/// Writes `table` to `path` in the given format.
pub fn export(table: &Table, format: Format, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    table.write(format, file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_string(t: &Table) -> String {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_rows_give_header_only() {
        let t = Table::new(&["dt", "leak"]);
        assert_eq!(csv_string(&t), "dt,leak\n");
    }

    #[test]
    fn one_row_two_lines() {
        let mut t = Table::new(&["dt", "leak"]);
        t.push(vec![0.01.into(), 2.0e-4.into()]).unwrap();
        assert_eq!(csv_string(&t), "dt,leak\n0.01,0.0002\n");
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-5, 9.99e-6, 1e-300, 1.2345678901234567e20, 0.1 + 0.2, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(1e-7), "1e-7");
        assert_eq!(format_float(2.0), "2");
    }

    #[test]
    fn json_matches_csv_fields() {
        let mut t = Table::new(&["name", "x", "n", "ok"]);
        t.push(vec!["a,b".into(), 0.25.into(), 3usize.into(), true.into()]).unwrap();
        t.push(vec!["\"q\"".into(), 1e-9.into(), 4usize.into(), false.into()]).unwrap();
        let mut buf = Vec::new();
        t.write_json(&mut buf).unwrap();
        let parsed: Vec<serde_json::Map<String, serde_json::Value>> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0]["name"], "a,b");
        assert_eq!(parsed[0]["x"].as_f64(), Some(0.25));
        assert_eq!(parsed[1]["x"].as_f64(), Some(1e-9));
        assert_eq!(parsed[1]["n"].as_i64(), Some(4));
        assert_eq!(parsed[1]["ok"], false);

        let text = csv_string(&t);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(&rows[0][0], "a,b");
        assert_eq!(&rows[1][0], "\"q\"");
        assert_eq!(rows[1][1].parse::<f64>().unwrap(), 1e-9);
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut t = Table::new(&["a"]);
        assert!(t.push(vec![1.0.into(), 2.0.into()]).is_err());
        let a = Record::new().with("x", 1.0);
        let b = Record::new().with("y", 1.0);
        assert!(Table::from_records(&[a.clone(), b]).is_err());
        assert_eq!(Table::from_records(&[a.clone(), a]).unwrap().len(), 2);
    }

    #[test]
    fn export_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let mut t = Table::new(&["k"]);
        t.push(vec![1usize.into()]).unwrap();
        export(&t, Format::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "k\n1\n");
        assert!(export(&t, Format::Csv, &dir.path().join("no/such/dir.csv")).is_err());
    }
}
