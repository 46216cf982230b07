//! Observational dataset, validation and CSV ingestion.
//!
//! CSV layout: a mandatory header naming `y`, `t` and `x1..xp` (any order),
//! one observation per row, `.` as the decimal point. Row numbers in error
//! messages count data rows from 1 (the header is not counted).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Arm, Error, Result};

/// Dense row-major covariate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    data: Vec<f64>,
    n: usize,
    p: usize,
}

impl Covariates {
    pub fn from_row_major(data: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: data.len(),
            });
        }
        Ok(Covariates { data, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Covariates { data, n: rows.len(), p })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, idx: &[usize]) -> Covariates {
        let mut data = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Covariates {
            data,
            n: idx.len(),
            p: self.p,
        }
    }
}

/// Immutable `(X, T, Y)` sample. Invariants are checked at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationalDataset {
    x: Covariates,
    t: Vec<bool>,
    y: Vec<f64>,
    n1: usize,
    binary_outcome: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub n1: usize,
    pub n0: usize,
    pub p: usize,
    pub y_mean_treated: Option<f64>,
    pub y_mean_control: Option<f64>,
    pub binary_outcome: bool,
}

impl ObservationalDataset {
    pub fn new(x: Covariates, t: Vec<bool>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.len(),
            });
        }
        if x.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.nrows(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadCell {
                row: i + 1,
                column: "y".into(),
                value: y[i].to_string(),
            });
        }
        if let Some(k) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::BadCell {
                row: k / x.ncols() + 1,
                column: format!("x{}", k % x.ncols() + 1),
                value: x.as_slice()[k].to_string(),
            });
        }
        let n1 = t.iter().filter(|&&b| b).count();
        let binary_outcome = y.iter().all(|&v| v == 0.0 || v == 1.0);
        Ok(ObservationalDataset {
            x,
            t,
            y,
            n1,
            binary_outcome,
        })
    }

    /// Convenience constructor from a numeric treatment vector (entries must be 0 or 1).
    pub fn from_numeric(x: Covariates, t: &[f64], y: Vec<f64>) -> Result<Self> {
        let t = t
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                1.0 => Ok(true),
                0.0 => Ok(false),
                v => Err(Error::BadTreatment {
                    row: i + 1,
                    value: v.to_string(),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(x, t, y)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.n1
    }

    #[inline]
    pub fn n0(&self) -> usize {
        self.n() - self.n1
    }

    pub fn x(&self) -> &Covariates {
        &self.x
    }

    pub fn t(&self) -> &[bool] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn is_binary_outcome(&self) -> bool {
        self.binary_outcome
    }

    /// Treatment as 0.0 / 1.0.
    pub fn t_numeric(&self) -> Vec<f64> {
        self.t.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Errors unless both arms are non-empty.
    pub fn require_both_arms(&self) -> Result<()> {
        if self.n1 == 0 {
            return Err(Error::EmptyArm(Arm::Treated));
        }
        if self.n0() == 0 {
            return Err(Error::EmptyArm(Arm::Control));
        }
        Ok(())
    }

    pub fn require_binary_outcome(&self) -> Result<()> {
        if self.binary_outcome {
            Ok(())
        } else {
            Err(Error::NonBinaryOutcome)
        }
    }

    pub fn require_dim(&self, p: usize) -> Result<()> {
        if self.p() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: self.p(),
            });
        }
        Ok(())
    }

    /// Rows of one arm.
    pub fn arm_indices(&self, treated: bool) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.t[i] == treated).collect()
    }

    pub fn select(&self, idx: &[usize]) -> Result<ObservationalDataset> {
        let x = self.x.select(idx);
        let t = idx.iter().map(|&i| self.t[i]).collect();
        let y = idx.iter().map(|&i| self.y[i]).collect();
        ObservationalDataset::new(x, t, y)
    }

    pub fn summarize(&self) -> DatasetSummary {
        let (mut s1, mut s0) = (0.0, 0.0);
        for (&ti, &yi) in self.t.iter().zip(&self.y) {
            if ti {
                s1 += yi;
            } else {
                s0 += yi;
            }
        }
        let n0 = self.n0();
        DatasetSummary {
            n: self.n(),
            n1: self.n1,
            n0,
            p: self.p(),
            y_mean_treated: (self.n1 > 0).then(|| s1 / self.n1 as f64),
            y_mean_control: (n0 > 0).then(|| s0 / n0 as f64),
            binary_outcome: self.binary_outcome,
        }
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(Error::Empty("missing header row".into()));
        }

        let mut y_col = None;
        let mut t_col = None;
        let mut x_cols: Vec<(usize, usize)> = Vec::new();
        for (c, name) in headers.iter().enumerate() {
            match name {
                "y" => y_col = Some(c),
                "t" => t_col = Some(c),
                other => {
                    let k = other
                        .strip_prefix('x')
                        .and_then(|s| s.parse::<usize>().ok())
                        .filter(|&k| k >= 1)
                        .ok_or_else(|| invalid(format!("unexpected column `{other}`")))?;
                    x_cols.push((k, c));
                }
            }
        }
        let y_col = y_col.ok_or_else(|| Error::MissingColumn("y".into()))?;
        let t_col = t_col.ok_or_else(|| Error::MissingColumn("t".into()))?;
        x_cols.sort_unstable();
        let p = x_cols.len();
        for (expect, &(k, _)) in (1..=p).zip(&x_cols) {
            if k != expect {
                return Err(Error::MissingColumn(format!("x{expect}")));
            }
        }

        let mut x = Vec::new();
        let mut t = Vec::new();
        let mut y = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let row = r + 1;
            let rec = rec.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
            let cell = |c: usize, name: &str| -> Result<f64> {
                let raw = rec.get(c).unwrap_or("");
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::BadCell {
                        row,
                        column: name.to_string(),
                        value: raw.to_string(),
                    })
            };
            y.push(cell(y_col, "y")?);
            let raw_t = rec.get(t_col).unwrap_or("");
            match raw_t.parse::<f64>() {
                Ok(1.0) => t.push(true),
                Ok(0.0) => t.push(false),
                _ => {
                    return Err(Error::BadTreatment {
                        row,
                        value: raw_t.to_string(),
                    })
                }
            }
            for &(k, c) in &x_cols {
                x.push(cell(c, &format!("x{k}"))?);
            }
        }
        if y.is_empty() {
            return Err(Error::Empty("no data rows".into()));
        }
        let n = y.len();
        Self::new(Covariates::from_row_major(x, n, p)?, t, y)
    }

    /// Writes `y,t,x1..xp`. Floats use the shortest representation that
    /// parses back to the identical value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string(), "t".to_string()];
        header.extend((1..=self.p()).map(|k| format!("x{k}")));
        w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
        for i in 0..self.n() {
            let mut rec = Vec::with_capacity(self.p() + 2);
            rec.push(self.y[i].to_string());
            rec.push(if self.t[i] { "1" } else { "0" }.to_string());
            rec.extend(self.x.row(i).iter().map(f64::to_string));
            w.write_record(&rec).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(file)
    }
}
