//! Discrete Fourier transforms, periodogram matrices and block access.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result, SpectestError};
use crate::series::{FrequencyGrid, TimeSeriesPanel};

/// Tolerance for the Hermitian and conjugate-symmetry invariants.
pub const FIELD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Periodogram,
    Smoothed,
    Pooled,
}

/// One complex square matrix per Fourier frequency.
///
/// Matrices are stored by grid position (see [`FrequencyGrid::position`]);
/// [`SpectralMatrixField::at`] accepts any integer frequency index and
/// resolves it periodically.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrixField {
    grid: FrequencyGrid,
    matrices: Arc<Vec<DMatrix<Complex64>>>,
    kind: FieldKind,
}

impl SpectralMatrixField {
    pub fn new(grid: FrequencyGrid, matrices: Vec<DMatrix<Complex64>>, kind: FieldKind) -> Result<Self> {
        if matrices.len() != grid.len() {
            return Err(SpectestError::DimensionMismatch(format!(
                "field has {} matrices for a grid of {} frequencies",
                matrices.len(),
                grid.len()
            )));
        }
        let dim = matrices[0].nrows();
        if dim == 0 || matrices.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(SpectestError::DimensionMismatch(
                "field matrices must be square and of one common size".into(),
            ));
        }
        Ok(Self {
            grid,
            matrices: Arc::new(matrices),
            kind,
        })
    }

    /// Builds a field from a function of the frequency index `k`.
    pub fn from_fn<F>(grid: FrequencyGrid, kind: FieldKind, mut f: F) -> Result<Self>
    where
        F: FnMut(i64) -> DMatrix<Complex64>,
    {
        let matrices = grid.indices().map(&mut f).collect();
        Self::new(grid, matrices, kind)
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    /// Matrix at frequency index `k`, reduced modulo `n`.
    pub fn at(&self, k: i64) -> &DMatrix<Complex64> {
        &self.matrices[self.grid.position(k)]
    }

    pub fn at_position(&self, position: usize) -> &DMatrix<Complex64> {
        &self.matrices[position]
    }

    pub fn with_kind(&self, kind: FieldKind) -> Self {
        Self {
            grid: self.grid,
            matrices: Arc::clone(&self.matrices),
            kind,
        }
    }

    /// `a·self + b·other`, frequency by frequency.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid || self.dim() != other.dim() {
            return Err(SpectestError::DimensionMismatch(
                "fields live on different grids or dimensions".into(),
            ));
        }
        let matrices = self
            .matrices
            .iter()
            .zip(other.matrices.iter())
            .map(|(x, y)| x * Complex64::from(a) + y * Complex64::from(b))
            .collect();
        Self::new(self.grid, matrices, self.kind)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let matrices = self.matrices.iter().map(|m| m * Complex64::from(c)).collect();
        Self {
            grid: self.grid,
            matrices: Arc::new(matrices),
            kind: self.kind,
        }
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        for (pos, m) in self.matrices.iter().enumerate() {
            let dev = max_abs_diff(m, &m.adjoint());
            if dev > tol {
                return invalid(format!(
                    "matrix at frequency index {} is not Hermitian (deviation {dev:e})",
                    self.grid.index_at(pos)
                ));
            }
        }
        Ok(())
    }

    pub fn check_conjugate_symmetry(&self, tol: f64) -> Result<()> {
        for k in self.grid.indices() {
            let dev = max_abs_diff(self.at(-k), &self.at(k).map(|z| z.conj()));
            if dev > tol {
                return invalid(format!(
                    "field is not conjugate symmetric at frequency index {k} (deviation {dev:e})"
                ));
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue of every matrix must be at least `-rel_tol·trace`.
    pub fn check_psd(&self, rel_tol: f64) -> Result<()> {
        for (pos, m) in self.matrices.iter().enumerate() {
            let trace = m.trace().re.abs();
            let min = min_eigenvalue(m);
            if min < -rel_tol * trace.max(f64::MIN_POSITIVE) {
                return invalid(format!(
                    "matrix at frequency index {} has eigenvalue {min:e}",
                    self.grid.index_at(pos)
                ));
            }
        }
        Ok(())
    }

    /// Checks every invariant that applies to this field's kind.
    pub fn validate(&self) -> Result<()> {
        self.check_hermitian(FIELD_TOLERANCE)?;
        self.check_conjugate_symmetry(FIELD_TOLERANCE)?;
        match self.kind {
            FieldKind::Periodogram => self.check_psd(FIELD_TOLERANCE),
            FieldKind::Smoothed | FieldKind::Pooled => self.check_psd(1e-8),
        }
    }
}

fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix, via its real symmetric
/// `2d×2d` embedding `[[Re, -Im], [Im, Re]]`.
pub(crate) fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let d = m.nrows();
    let h = (m + m.adjoint()) * Complex64::from(0.5);
    let real = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = h[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    real.symmetric_eigen().eigenvalues.min()
}

/// `J(ω_k) = (2πn)^{-1/2} Σ_{t=1}^n X_t e^{-itω_k}` for every grid
/// frequency, ordered by grid position.
pub fn dft(panel: &TimeSeriesPanel, grid: &FrequencyGrid) -> Result<Vec<DVector<Complex64>>> {
    let n = panel.n();
    if grid.n() != n {
        return Err(SpectestError::DimensionMismatch(format!(
            "grid has n = {} but panel has {n} observations",
            grid.n()
        )));
    }
    let d = panel.d();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let norm = 1.0 / (2.0 * PI * n as f64).sqrt();
    let mut out = vec![DVector::<Complex64>::zeros(d); n];
    let mut buffer = vec![Complex64::default(); n];
    let k_max = grid.k_max();
    let nyquist = n % 2 == 0;

    for (j, column) in panel.data().column_iter().enumerate() {
        for (slot, &x) in buffer.iter_mut().zip(column.iter()) {
            *slot = Complex64::new(x, 0.0);
        }
        fft.process(&mut buffer);
        // The transform sums over s = t - 1, so J(ω_k) = e^{-iω_k} · FFT_k.
        for k in 0..=k_max {
            let omega = grid.omega(k);
            let mut value = buffer[k as usize] * Complex64::from_polar(norm, -omega);
            if k == 0 || (nyquist && k == k_max) {
                // Both are real sums of real data.
                value = Complex64::new(direct_real_sum(column.as_slice(), omega) * norm, 0.0);
            }
            out[grid.position(k)][j] = value;
            if k != 0 && !(nyquist && k == k_max) {
                out[grid.position(-k)][j] = value.conj();
            }
        }
    }
    Ok(out)
}

/// `Σ_t x_t cos(tω)` for ω ∈ {0, π}.
fn direct_real_sum(x: &[f64], omega: f64) -> f64 {
    if omega == 0.0 {
        x.iter().sum()
    } else {
        x.iter()
            .enumerate()
            .map(|(s, v)| if s % 2 == 0 { -v } else { *v })
            .sum()
    }
}

/// Periodogram matrices `I(ω_k) = J(ω_k) J(ω_k)^H`.
///
/// The field is understood as 2π-periodic: index arithmetic is mod `n`.
pub fn periodogram(panel: &TimeSeriesPanel) -> Result<SpectralMatrixField> {
    let grid = crate::series::fourier_frequencies(panel.n())?;
    let transforms = dft(panel, &grid)?;
    let matrices = transforms.iter().map(|j| j * j.adjoint()).collect();
    SpectralMatrixField::new(grid, matrices, FieldKind::Periodogram)
}

fn check_group(index: usize, q: usize) -> Result<()> {
    if index == 0 || index > q {
        return Err(SpectestError::IndexOutOfRange(format!(
            "group index {index} outside 1..={q}"
        )));
    }
    Ok(())
}

/// The `p×p` block `(row_group, col_group)` (1-based) at every frequency.
pub fn block(
    field: &SpectralMatrixField,
    row_group: usize,
    col_group: usize,
    p: usize,
) -> Result<Vec<DMatrix<Complex64>>> {
    if p == 0 || field.dim() % p != 0 {
        return Err(SpectestError::DimensionMismatch(format!(
            "field dimension {} is not a multiple of p = {p}",
            field.dim()
        )));
    }
    let q = field.dim() / p;
    check_group(row_group, q)?;
    check_group(col_group, q)?;
    let (r0, c0) = ((row_group - 1) * p, (col_group - 1) * p);
    Ok(field
        .matrices()
        .iter()
        .map(|m| m.view((r0, c0), (p, p)).into_owned())
        .collect())
}

/// `(1/q) Σ_j M_jj` at every frequency.
pub fn pooled_diagonal(field: &SpectralMatrixField, p: usize, q: usize) -> Result<SpectralMatrixField> {
    if p * q != field.dim() {
        return Err(SpectestError::DimensionMismatch(format!(
            "field dimension {} differs from p·q = {}",
            field.dim(),
            p * q
        )));
    }
    let scale = Complex64::from(1.0 / q as f64);
    let matrices = field
        .matrices()
        .iter()
        .map(|m| {
            let mut acc = DMatrix::<Complex64>::zeros(p, p);
            for j in 0..q {
                acc += m.view((j * p, j * p), (p, p));
            }
            acc * scale
        })
        .collect();
    SpectralMatrixField::new(field.grid(), matrices, FieldKind::Pooled)
}
