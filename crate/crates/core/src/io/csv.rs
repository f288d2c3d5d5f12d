//! Typed CSV tables written at full precision.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so a written table
//! reads back bit for bit. Non-finite values are refused.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Float(v) => Some(v),
            Cell::Int(v) => Some(v as f64),
            Cell::Empty => None,
        }
    }

    fn render(&self) -> String {
        match *self {
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn parse(field: &str) -> Option<Cell> {
        if field.is_empty() {
            return Some(Cell::Empty);
        }
        if field.bytes().all(|b| b.is_ascii_digit() || b == b'-') {
            return field.parse().ok().map(Cell::Int);
        }
        field.parse().ok().map(Cell::Float)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch {
                expected: self.header.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    fn check_finite(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if matches!(cell, Cell::Float(v) if !v.is_finite()) {
                    return Err(Error::NonFinite {
                        column: self.header[j].clone(),
                        row: i,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_writer<W: Write>(&self, out: W) -> Result<()> {
        self.check_finite()?;
        let mut w = ::csv::WriterBuilder::new()
            .terminator(::csv::Terminator::CRLF)
            .from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let mut r = ::csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let mut table = Table {
            header,
            rows: Vec::new(),
        };
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| {
                    Cell::parse(f).ok_or_else(|| Error::Format {
                        what: "CSV",
                        reason: format!("row {i}: bad cell `{f}`"),
                    })
                })
                .collect::<Result<Vec<Cell>>>()?;
            table.push(row)?;
        }
        table.check_finite()?;
        Ok(table)
    }
}

/// Write `table` to `path`. Nothing is created if a cell is non-finite.
pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    table.check_finite()?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    table.to_writer(std::io::BufWriter::new(file))
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Table::from_reader(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(t: &Table) -> Table {
        let mut buf = Vec::new();
        t.to_writer(&mut buf).unwrap();
        Table::from_reader(buf.as_slice()).unwrap()
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(["t", "error"]);
        let mut buf = Vec::new();
        t.to_writer(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,error\r\n");
        assert_eq!(round_trip(&t), t);
    }

    #[test]
    fn awkward_floats_round_trip() {
        let mut t = Table::new(["x", "k", "gap"]);
        for v in [
            0.1,
            -0.0,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            5e-324,
            f64::MAX,
            -2.5e-300,
            1e22,
        ] {
            t.push(vec![Cell::Float(v), Cell::Int(-7), Cell::Empty])
                .unwrap();
        }
        let back = round_trip(&t);
        for (a, b) in t.rows.iter().zip(&back.rows) {
            match (a[0], b[0]) {
                (Cell::Float(x), Cell::Float(y)) => assert_eq!(x.to_bits(), y.to_bits()),
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(back, t);
    }

    #[test]
    fn non_finite_is_refused() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![Cell::Float(1.0), Cell::Float(f64::NAN)])
            .unwrap();
        let err = t.to_writer(Vec::new()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref column, row: 0 } if column == "b"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        assert!(write_csv(&t, &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut t = Table::new(["a", "b"]);
        assert!(t.push(vec![Cell::Int(1)]).is_err());
        assert!(Table::from_reader("a,b\n1\n".as_bytes()).is_err());
        assert!(Table::from_reader("a\ninf\n".as_bytes()).is_err());
    }
}
