//! Datasets and their CSV representation.
//!
//! A dataset CSV has a header row with `y,x` followed by either `z1..zK`
//! (dense instrument matrix) or a single `judge` column of integer labels.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruments<T> {
    Dense(DenseMatrix<T>),
    /// Judge labels compacted to `0..K`.
    Judges(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    y: Vec<T>,
    x: Vec<T>,
    instruments: Instruments<T>,
    n_instruments: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn dense(y: Vec<T>, x: Vec<T>, z: DenseMatrix<T>) -> Result<Self> {
        if z.rows() != y.len() {
            return Err(Error::Dimension(format!(
                "instrument matrix has {} rows, outcome has {}",
                z.rows(),
                y.len()
            )));
        }
        if z.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite instrument value".into()));
        }
        let k = z.cols();
        Self::validated(y, x, Instruments::Dense(z), k)
    }

    /// Judge design; labels may be arbitrary integers and are compacted to
    /// `0..K` in increasing label order.
    pub fn judges(y: Vec<T>, x: Vec<T>, labels: &[i64]) -> Result<Self> {
        if labels.len() != y.len() {
            return Err(Error::Dimension(format!(
                "{} judge labels for {} observations",
                labels.len(),
                y.len()
            )));
        }
        let mut index = BTreeMap::new();
        for &l in labels {
            index.entry(l).or_insert(0usize);
        }
        for (slot, v) in index.values_mut().enumerate() {
            *v = slot;
        }
        let compact: Vec<usize> = labels.iter().map(|l| index[l]).collect();
        let k = index.len();
        Self::validated(y, x, Instruments::Judges(compact), k)
    }

    fn validated(y: Vec<T>, x: Vec<T>, instruments: Instruments<T>, k: usize) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::Dimension(format!(
                "y has length {}, x has length {}",
                y.len(),
                x.len()
            )));
        }
        if k == 0 || y.len() <= k {
            return Err(Error::InvalidDataset(format!(
                "need N > K >= 1, got N = {}, K = {k}",
                y.len()
            )));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite y or x".into()));
        }
        Ok(Self {
            y,
            x,
            instruments,
            n_instruments: k,
        })
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn instruments(&self) -> &Instruments<T> {
        &self.instruments
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.n_instruments
    }

    /// Same data with the judge labels expanded into an indicator matrix.
    pub fn to_dense(&self) -> Self {
        match &self.instruments {
            Instruments::Dense(_) => self.clone(),
            Instruments::Judges(labels) => {
                let k = self.n_instruments;
                let mut data = vec![T::zero(); labels.len() * k];
                for (i, &l) in labels.iter().enumerate() {
                    data[i * k + l] = T::one();
                }
                Self {
                    y: self.y.clone(),
                    x: self.x.clone(),
                    instruments: Instruments::Dense(DenseMatrix {
                        rows: labels.len(),
                        cols: k,
                        data,
                    }),
                    n_instruments: k,
                }
            }
        }
    }

    /// Replaces the outcome, keeping x and the instruments.
    pub fn with_outcome(&self, y: Vec<T>) -> Result<Self> {
        Self::validated(
            y,
            self.x.clone(),
            self.instruments.clone(),
            self.n_instruments,
        )
    }

    /// Replaces the endogenous regressor, keeping y and the instruments.
    pub fn with_regressor(&self, x: Vec<T>) -> Result<Self> {
        Self::validated(
            self.y.clone(),
            x,
            self.instruments.clone(),
            self.n_instruments,
        )
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let y_col = find("y").ok_or_else(|| Error::MissingColumn("y".into()))?;
        let x_col = find("x").ok_or_else(|| Error::MissingColumn("x".into()))?;
        let judge_col = find("judge");
        let mut z_cols = Vec::new();
        if judge_col.is_none() {
            let mut k = 1;
            while let Some(c) = find(&format!("z{k}")) {
                z_cols.push(c);
                k += 1;
            }
            if z_cols.is_empty() {
                return Err(Error::MissingColumn("judge (or z1..zK)".into()));
            }
        }

        let parse = |s: &str, line: u64, col: &str| -> Result<T> {
            s.parse::<f64>().map(T::lit).map_err(|_| {
                Error::Parse(format!("line {line}, column {col}: `{s}` is not a number"))
            })
        };
        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut labels = Vec::new();
        let mut z = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |c: usize| rec.get(c).unwrap_or("");
            y.push(parse(field(y_col), line, "y")?);
            x.push(parse(field(x_col), line, "x")?);
            if let Some(j) = judge_col {
                let s = field(j);
                labels.push(s.parse::<i64>().map_err(|_| {
                    Error::Parse(format!(
                        "line {line}, column judge: `{s}` is not an integer"
                    ))
                })?);
            } else {
                for (k, &c) in z_cols.iter().enumerate() {
                    z.push(parse(field(c), line, &format!("z{}", k + 1))?);
                }
            }
        }
        if judge_col.is_some() {
            Self::judges(y, x, &labels)
        } else {
            let n = y.len();
            let m = DenseMatrix::from_row_major(n, z_cols.len(), z)?;
            Self::dense(y, x, m)
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match &self.instruments {
            Instruments::Judges(labels) => {
                writeln!(w, "y,x,judge")?;
                for i in 0..self.n() {
                    writeln!(w, "{},{},{}", self.y[i], self.x[i], labels[i])?;
                }
            }
            Instruments::Dense(z) => {
                let cols: Vec<String> = (1..=z.cols()).map(|k| format!("z{k}")).collect();
                writeln!(w, "y,x,{}", cols.join(","))?;
                for i in 0..self.n() {
                    let row: Vec<String> = z.row(i).iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{},{},{}", self.y[i], self.x[i], row.join(","))?;
                }
            }
        }
        Ok(())
    }
}
