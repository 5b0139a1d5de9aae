//! Deterministic CSV output: fixed header rows and floats printed with 17
//! significant digits so identical configurations produce byte-identical
//! files.

use degen_core::Error;
use std::fmt::Write as _;
use std::path::Path;

pub struct Csv {
    buffer: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buffer = String::new();
        buffer.push_str(&header.join(","));
        buffer.push('\n');
        Self { buffer, columns: header.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns, "row width mismatch");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.buffer.push(',');
            }
            match c {
                Cell::Int(v) => {
                    let _ = write!(self.buffer, "{v}");
                }
                Cell::Float(v) => {
                    let _ = write!(self.buffer, "{v:.16e}");
                }
                Cell::Bool(v) => {
                    let _ = write!(self.buffer, "{v}");
                }
                Cell::Empty => {}
            }
        }
        self.buffer.push('\n');
    }

    pub fn write(self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.buffer.as_bytes())
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    }
}

pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Empty,
}

pub fn f(v: f64) -> Cell {
    Cell::Float(v)
}

pub fn i(v: usize) -> Cell {
    Cell::Int(v as i64)
}

pub fn b(v: bool) -> Cell {
    Cell::Bool(v)
}
