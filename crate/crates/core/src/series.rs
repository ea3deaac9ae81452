//! Raw panels of observations and the Fourier frequency grid.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{invalid, Result, SpectestError};

/// `n` observations of a `d = p·q` dimensional real series.
///
/// Rows are time points `t = 1..n`, columns are components. Group `k`
/// (1-based) occupies columns `(k-1)p .. kp`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    data: DMatrix<f64>,
    p: usize,
    q: usize,
}

impl TimeSeriesPanel {
    pub fn new(data: DMatrix<f64>, p: usize, q: usize) -> Result<Self> {
        if p == 0 {
            return invalid("block dimension p must be positive");
        }
        if q < 2 {
            return invalid(format!("number of groups q must be at least 2, got {q}"));
        }
        if data.ncols() != p * q {
            return Err(SpectestError::DimensionMismatch(format!(
                "panel has {} columns but p·q = {}",
                data.ncols(),
                p * q
            )));
        }
        if data.nrows() < 4 {
            return invalid(format!("need at least 4 observations, got {}", data.nrows()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % data.nrows(), pos / data.nrows());
            return invalid(format!("non-finite entry at row {}, column {}", row + 1, col + 1));
        }
        Ok(Self { data, p, q })
    }

    /// Builds a panel from row-major observations.
    pub fn from_rows(rows: &[Vec<f64>], p: usize, q: usize) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(SpectestError::DimensionMismatch(format!(
                "row {} has {} columns, expected {d}",
                bad + 1,
                rows[bad].len()
            )));
        }
        let data = DMatrix::from_fn(n, d, |t, j| rows[t][j]);
        Self::new(data, p, q)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Same observations, different `(p, q)` grouping.
    pub fn regroup(self, p: usize, q: usize) -> Result<Self> {
        Self::new(self.data, p, q)
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: &self.data * c,
            p: self.p,
            q: self.q,
        }
    }

    /// Reorders the column groups: new group `k` is old group `order[k]`.
    pub fn permute_groups(&self, order: &[usize]) -> Result<Self> {
        if !is_permutation(order, self.q) {
            return invalid(format!("{order:?} is not a permutation of 0..{}", self.q));
        }
        let p = self.p;
        let data = DMatrix::from_fn(self.n(), self.d(), |t, j| {
            let (g, m) = (j / p, j % p);
            self.data[(t, order[g] * p + m)]
        });
        Ok(Self { data, p, q: self.q })
    }

    /// Reads a panel from CSV text: one row per time point, an optional
    /// header line, and `p·q` numeric columns.
    pub fn read_csv<R: Read>(reader: R, p: usize, q: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row_no = i + 1;
            let record = record.map_err(|e| SpectestError::Parse {
                row: row_no,
                column: 0,
                message: e.to_string(),
            })?;
            let parsed: Vec<std::result::Result<f64, usize>> = record
                .iter()
                .enumerate()
                .map(|(j, field)| field.parse::<f64>().map_err(|_| j + 1))
                .collect();
            if i == 0 && parsed.iter().all(|v| v.is_err()) {
                // header line
                continue;
            }
            let mut row = Vec::with_capacity(parsed.len());
            for (j, v) in parsed.into_iter().enumerate() {
                match v {
                    Ok(x) if x.is_finite() => row.push(x),
                    Ok(_) => {
                        return Err(SpectestError::Parse {
                            row: row_no,
                            column: j + 1,
                            message: "non-finite value".into(),
                        })
                    }
                    Err(col) => {
                        return Err(SpectestError::Parse {
                            row: row_no,
                            column: col,
                            message: format!("cannot parse {:?} as a number", &record[col - 1]),
                        })
                    }
                }
            }
            if row.len() != p * q {
                return Err(SpectestError::Parse {
                    row: row_no,
                    column: row.len(),
                    message: format!("expected {} columns, found {}", p * q, row.len()),
                });
            }
            rows.push(row);
        }
        Self::from_rows(&rows, p, q)
    }

    pub fn read_csv_path(path: &Path, p: usize, q: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| SpectestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, p, q)
    }

    /// Writes the panel as CSV with a `x1,...,xd` header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.d()).map(|j| format!("x{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for t in 0..self.n() {
            let row: Vec<String> = (0..self.d()).map(|j| format!("{}", self.data[(t, j)])).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn is_permutation(order: &[usize], q: usize) -> bool {
    if order.len() != q {
        return false;
    }
    let mut seen = vec![false; q];
    for &o in order {
        if o >= q || seen[o] {
            return false;
        }
        seen[o] = true;
    }
    true
}

/// Subtracts the sample mean from every column.
pub fn demean(panel: &TimeSeriesPanel) -> TimeSeriesPanel {
    let n = panel.n() as f64;
    let mut data = panel.data.clone();
    for mut col in data.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    TimeSeriesPanel {
        data,
        p: panel.p,
        q: panel.q,
    }
}

/// Fourier frequencies `ω_k = 2πk/n` for `k = -⌊(n-1)/2⌋ ..= ⌊n/2⌋`.
///
/// Positions in the grid run from 0 to `n-1`; position `i` holds index
/// `k = k_min + i`. Any integer index is resolved modulo `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyGrid {
    n: usize,
}

impl FrequencyGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn k_min(&self) -> i64 {
        -(((self.n - 1) / 2) as i64)
    }

    pub fn k_max(&self) -> i64 {
        (self.n / 2) as i64
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        self.k_min()..=self.k_max()
    }

    pub fn omega(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.n as f64
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.indices().map(|k| self.omega(k)).collect()
    }

    /// Reduces an arbitrary integer index into the grid range.
    pub fn reduce(&self, k: i64) -> i64 {
        let n = self.n as i64;
        let r = (k - self.k_min()).rem_euclid(n);
        r + self.k_min()
    }

    /// Storage position of (the periodic representative of) index `k`.
    pub fn position(&self, k: i64) -> usize {
        (self.reduce(k) - self.k_min()) as usize
    }

    pub fn index_at(&self, position: usize) -> i64 {
        self.k_min() + position as i64
    }

    /// Quadrature weight of the Riemann sum over the grid.
    pub fn weight(&self) -> f64 {
        2.0 * PI / self.n as f64
    }
}

pub fn fourier_frequencies(n: usize) -> Result<FrequencyGrid> {
    if n < 4 {
        return invalid(format!("frequency grid needs n >= 4, got {n}"));
    }
    Ok(FrequencyGrid { n })
}
