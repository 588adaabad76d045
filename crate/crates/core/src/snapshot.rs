//! Plain-text field snapshots: a header line
//! `snapshot v1; <dim>; <n per axis>; <lengths>; <t>; <names>` followed by one
//! CSV row per cell in row-major order.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dim: usize,
    pub n: Vec<usize>,
    pub lengths: Vec<f64>,
    pub t: f64,
    pub names: Vec<String>,
    /// One column per name, each of length `prod(n)`.
    pub columns: Vec<Vec<f64>>,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl Snapshot {
    pub fn new(grid: &Grid, t: f64, fields: &[(&str, &ScalarField)]) -> Result<Self> {
        let mut names = Vec::with_capacity(fields.len());
        let mut columns = Vec::with_capacity(fields.len());
        for (name, f) in fields {
            if name.is_empty() || name.contains([',', ';', '\n']) {
                return Err(Error::Snapshot(format!("invalid field name `{name}`")));
            }
            if f.shape() != grid.n() {
                return Err(Error::ShapeMismatch(format!("field `{name}` does not match the grid")));
            }
            names.push(name.to_string());
            columns.push(f.as_slice().to_vec());
        }
        Ok(Snapshot { dim: grid.dim(), n: grid.n().to_vec(), lengths: grid.lengths().to_vec(), t, names, columns })
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.columns[k].as_slice())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut s = String::new();
        writeln!(
            s,
            "snapshot v1; {}; {}; {}; {:e}; {}",
            self.dim,
            join(&self.n),
            self.lengths.iter().map(|l| format!("{l:e}")).collect::<Vec<_>>().join(","),
            self.t,
            self.names.join(",")
        )
        .expect("string write");
        let cells: usize = self.n.iter().product();
        for i in 0..cells {
            for (k, c) in self.columns.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                write!(s, "{:.17e}", c[i]).expect("string write");
            }
            s.push('\n');
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| Error::Snapshot("empty file".into()))??;
        let parts: Vec<&str> = header.split(';').map(str::trim).collect();
        if parts.len() != 6 || parts[0] != "snapshot v1" {
            return Err(Error::Snapshot(format!("bad header `{header}`")));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Snapshot(format!("bad number `{s}`")));
        let dim: usize = parts[1].parse().map_err(|_| Error::Snapshot("bad dimension".into()))?;
        let n = parts[2]
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Snapshot(format!("bad size `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let lengths = parts[3].split(',').map(num).collect::<Result<Vec<_>>>()?;
        let t = num(parts[4])?;
        let names: Vec<String> = parts[5].split(',').map(|s| s.trim().to_string()).collect();
        if n.len() != dim || lengths.len() != dim {
            return Err(Error::Snapshot("axis count differs from dimension".into()));
        }
        let cells: usize = n.iter().product();
        let mut columns = vec![Vec::with_capacity(cells); names.len()];
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line.split(',').map(num).collect::<Result<Vec<_>>>()?;
            if vals.len() != names.len() {
                return Err(Error::Snapshot(format!("row {row} has {} values, expected {}", vals.len(), names.len())));
            }
            for (c, v) in columns.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        if columns.iter().any(|c| c.len() != cells) {
            return Err(Error::Snapshot(format!("expected {cells} rows")));
        }
        Ok(Snapshot { dim, n, lengths, t, names, columns })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}
