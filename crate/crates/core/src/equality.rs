//! The L2 statistic, its centering and scale estimates, the asymptotic
//! test, the local-power detection shift and the exactness diagnostic.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SpectestError};
use crate::kernel::{smooth, Bandwidth, BandwidthSource, Kernel, SmoothingWeights};
use crate::quantile::normal_quantile;
use crate::randomization::{estimate_mu_hat_star, estimate_tau_hat_star_sq, DecisionRule};
use crate::reference::{mu_zero_integrand, pairwise_sum, riemann_sum, tau_zero_integrand, TraceTensor};
use crate::series::{demean, TimeSeriesPanel};
use crate::spectral::{periodogram, pooled_diagonal, SpectralMatrixField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    pub t_n: f64,
    pub n: usize,
    pub h: f64,
    pub grid_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteringEstimates {
    pub mu_hat: f64,
    pub tau_hat_sq: f64,
    pub mu_hat_star: f64,
    pub tau_hat_star_sq: f64,
}

/// Which blocks enter the plug-in estimate of the asymptotic variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauPlugIn {
    /// Diagonal blocks replaced by the pooled estimate.
    #[default]
    NullImposed,
    /// Every block taken from the smoothed estimate.
    Unrestricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Asymptotic,
    RandUncentered,
    RandCentered,
    RandStudentized,
}

impl TestKind {
    pub fn label(&self) -> &'static str {
        match self {
            TestKind::Asymptotic => "phi_n",
            TestKind::RandUncentered => "phi_n_star",
            TestKind::RandCentered => "phi_cent_star",
            TestKind::RandStudentized => "phi_stud_star",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "phi_n" | "asymptotic" => Ok(TestKind::Asymptotic),
            "phi_n_star" | "uncentered" => Ok(TestKind::RandUncentered),
            "phi_cent_star" | "centered" => Ok(TestKind::RandCentered),
            "phi_stud_star" | "studentized" => Ok(TestKind::RandStudentized),
            other => invalid(format!("unknown test {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Reject,
    Retain,
}

impl Decision {
    pub fn from_reject(reject: bool) -> Self {
        if reject {
            Decision::Reject
        } else {
            Decision::Retain
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    /// `T_n`.
    pub statistic: f64,
    /// The quantity compared with the critical value or the draws.
    pub observed: f64,
    pub mu_hat: f64,
    pub tau_hat_sq: f64,
    pub mu_hat_star: f64,
    pub tau_hat_star_sq: f64,
    pub critical_value: Option<f64>,
    pub p_value: Option<f64>,
    pub decision: Decision,
    pub alpha: f64,
    pub h: f64,
    pub bandwidth: BandwidthSource,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub seed: Option<u64>,
    #[serde(rename = "B")]
    pub draws: Option<usize>,
    pub decision_rule: Option<DecisionRule>,
}

impl TestReport {
    pub fn rejects(&self) -> bool {
        self.decision == Decision::Reject
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

fn check_groups(field: &SpectralMatrixField, p: usize, q: usize) -> Result<()> {
    if p == 0 || q < 2 || field.dim() != p * q {
        return Err(SpectestError::DimensionMismatch(format!(
            "field dimension {} does not match p = {p}, q = {q}",
            field.dim()
        )));
    }
    Ok(())
}

/// `T_n = n·h^{1/2}·(2π/n)·Σ_k Σ_r ‖F̂_rr(ω_k) − F̃(ω_k)‖²` from smoothed
/// diagonal blocks and their pooled average.
pub fn compute_tn(diagonal: &[SpectralMatrixField], pooled: &SpectralMatrixField, h: f64) -> Result<StatisticValue> {
    if diagonal.len() < 2 {
        return invalid("need at least two diagonal blocks");
    }
    if !(h > 0.0) {
        return invalid(format!("bandwidth must be positive, got {h}"));
    }
    let grid = pooled.grid();
    for block in diagonal {
        if block.grid() != grid || block.dim() != pooled.dim() {
            return Err(SpectestError::DimensionMismatch(
                "diagonal blocks and pooled estimate live on different grids".into(),
            ));
        }
    }
    let n = grid.n();
    let terms: Vec<f64> = (0..n)
        .map(|i| {
            let center = pooled.at_position(i);
            diagonal
                .iter()
                .map(|b| (b.at_position(i) - center).iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum()
        })
        .collect();
    let t_n = n as f64 * h.sqrt() * grid.weight() * pairwise_sum(&terms);
    Ok(StatisticValue {
        t_n,
        n,
        h,
        grid_size: n,
    })
}

/// Replaces the diagonal blocks of `m` by their average.
fn with_pooled_diagonal(m: &DMatrix<Complex64>, p: usize, q: usize) -> DMatrix<Complex64> {
    let mut pooled = DMatrix::<Complex64>::zeros(p, p);
    for j in 0..q {
        pooled += m.view((j * p, j * p), (p, p));
    }
    pooled /= Complex64::from(q as f64);
    let mut out = m.clone();
    for j in 0..q {
        out.view_mut((j * p, j * p), (p, p)).copy_from(&pooled);
    }
    out
}

/// `μ̂ = A_K ∫ [(q−1)|tr F̃|² − (1/q) Σ_{j1≠j2} |tr F̂_{j1j2}|²]`.
pub fn estimate_mu_hat(smoothed: &SpectralMatrixField, kernel: &Kernel, p: usize, q: usize) -> Result<f64> {
    check_groups(smoothed, p, q)?;
    Ok(kernel.a_k() * riemann_sum(smoothed, |m| mu_zero_integrand(&with_pooled_diagonal(m, p, q), p, q)))
}

/// Plug-in of the asymptotic null variance, clamped at zero.
pub fn estimate_tau_hat_sq(
    smoothed: &SpectralMatrixField,
    kernel: &Kernel,
    p: usize,
    q: usize,
    plug_in: TauPlugIn,
) -> Result<f64> {
    check_groups(smoothed, p, q)?;
    let raw = kernel.b_k()
        * riemann_sum(smoothed, |m| match plug_in {
            TauPlugIn::NullImposed => tau_zero_integrand(&with_pooled_diagonal(m, p, q), p, q),
            TauPlugIn::Unrestricted => tau_zero_integrand(m, p, q),
        });
    Ok(clamp_nonnegative(raw, "tau_hat_sq"))
}

pub(crate) fn clamp_nonnegative(value: f64, label: &str) -> f64 {
    if value < 0.0 {
        log::warn!("{label} = {value:e} is negative; clamped to 0");
        0.0
    } else {
        value
    }
}

/// `φ_n`: reject iff `(T_n − h^{−1/2}μ̂)/τ̂ > u_{1−α}`.
pub fn asymptotic_test(statistic: &StatisticValue, centering: &CenteringEstimates, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    if !(centering.tau_hat_sq > 0.0) {
        return Err(SpectestError::DegenerateScale(format!(
            "tau_hat_sq = {} leaves the asymptotic test undefined",
            centering.tau_hat_sq
        )));
    }
    let z = (statistic.t_n - centering.mu_hat / statistic.h.sqrt()) / centering.tau_hat_sq.sqrt();
    let critical = normal_quantile(1.0 - alpha)?;
    Ok(TestReport {
        kind: TestKind::Asymptotic,
        statistic: statistic.t_n,
        observed: z,
        mu_hat: centering.mu_hat,
        tau_hat_sq: centering.tau_hat_sq,
        mu_hat_star: centering.mu_hat_star,
        tau_hat_star_sq: centering.tau_hat_star_sq,
        critical_value: Some(critical),
        p_value: None,
        decision: Decision::from_reject(z > critical),
        alpha,
        h: statistic.h,
        bandwidth: BandwidthSource::Fixed,
        n: statistic.n,
        p: 0,
        q: 0,
        seed: None,
        draws: None,
        decision_rule: None,
    })
}

/// Options for [`Analysis::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub demean: bool,
    pub tau_plug_in: TauPlugIn,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            demean: true,
            tau_plug_in: TauPlugIn::NullImposed,
        }
    }
}

/// Everything the tests need from one panel: periodogram, smoothed
/// estimate, `T_n`, and the four centering and scale estimates.
#[derive(Debug, Clone)]
pub struct Analysis {
    p: usize,
    q: usize,
    kernel: Kernel,
    bandwidth: Bandwidth,
    periodogram: SpectralMatrixField,
    smoothed: SpectralMatrixField,
    weights: SmoothingWeights,
    /// `I_rr(ω_k) − Ĩ(ω_k)`, laid out `[(r·n + position)·p² + entry]`.
    deviations: Vec<Complex64>,
    statistic: StatisticValue,
    centering: CenteringEstimates,
}

impl Analysis {
    pub fn new(panel: &TimeSeriesPanel, kernel: &Kernel, bandwidth: Bandwidth, options: &AnalysisOptions) -> Result<Self> {
        let field = if options.demean {
            periodogram(&demean(panel))?
        } else {
            periodogram(panel)?
        };
        if bandwidth.source() == BandwidthSource::Fixed {
            bandwidth.warn_if_unusual(panel.n());
        }
        Self::from_periodogram(field, kernel, bandwidth, panel.p(), panel.q(), options.tau_plug_in)
    }

    pub fn from_periodogram(
        periodogram: SpectralMatrixField,
        kernel: &Kernel,
        bandwidth: Bandwidth,
        p: usize,
        q: usize,
        tau_plug_in: TauPlugIn,
    ) -> Result<Self> {
        check_groups(&periodogram, p, q)?;
        let grid = periodogram.grid();
        let n = grid.n();
        let h = bandwidth.h();
        let weights = SmoothingWeights::new(kernel, h, n)?;
        let smoothed = smooth(&periodogram, kernel, &bandwidth, &grid)?;
        let pooled = pooled_diagonal(&periodogram, p, q)?;

        let pp = p * p;
        let mut deviations = vec![Complex64::default(); q * n * pp];
        for r in 0..q {
            for pos in 0..n {
                let m = periodogram.at_position(pos);
                let center = pooled.at_position(pos);
                let base = (r * n + pos) * pp;
                for x in 0..p {
                    for y in 0..p {
                        deviations[base + x * p + y] = m[(r * p + x, r * p + y)] - center[(x, y)];
                    }
                }
            }
        }

        let centering = CenteringEstimates {
            mu_hat: estimate_mu_hat(&smoothed, kernel, p, q)?,
            tau_hat_sq: estimate_tau_hat_sq(&smoothed, kernel, p, q, tau_plug_in)?,
            mu_hat_star: estimate_mu_hat_star(&smoothed, kernel, p, q)?,
            tau_hat_star_sq: estimate_tau_hat_star_sq(&smoothed, kernel, p, q)?,
        };
        let mut analysis = Self {
            p,
            q,
            kernel: kernel.clone(),
            bandwidth,
            periodogram,
            smoothed,
            weights,
            deviations,
            statistic: StatisticValue {
                t_n: 0.0,
                n,
                h,
                grid_size: n,
            },
            centering,
        };
        let identity: Vec<usize> = (0..n).flat_map(|_| 0..q).collect();
        analysis.statistic.t_n = analysis.permuted_statistic(&identity);
        Ok(analysis)
    }

    /// The statistic with group `table[position·q + r]` in place of group
    /// `r` at each frequency position.
    pub(crate) fn permuted_statistic(&self, table: &[usize]) -> f64 {
        let n = self.statistic.n;
        let (p, q) = (self.p, self.q);
        let pp = p * p;
        let offsets = self.weights.offsets();
        let mut acc = vec![Complex64::default(); pp];
        let terms: Vec<f64> = (0..n)
            .map(|i| {
                let mut term = 0.0;
                for r in 0..q {
                    acc.iter_mut().for_each(|z| *z = Complex64::default());
                    for &(m, w) in offsets {
                        let j = self.weights.source_position(i, m);
                        let g = table[j * q + r];
                        let base = (g * n + j) * pp;
                        for (slot, dev) in acc.iter_mut().zip(&self.deviations[base..base + pp]) {
                            *slot += dev.scale(w);
                        }
                    }
                    term += acc.iter().map(|z| z.norm_sqr()).sum::<f64>();
                }
                term
            })
            .collect();
        2.0 * PI * self.statistic.h.sqrt() * pairwise_sum(&terms)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.statistic.n
    }

    pub fn h(&self) -> f64 {
        self.statistic.h
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    pub fn periodogram(&self) -> &SpectralMatrixField {
        &self.periodogram
    }

    pub fn smoothed(&self) -> &SpectralMatrixField {
        &self.smoothed
    }

    pub fn statistic(&self) -> StatisticValue {
        self.statistic
    }

    pub fn centering(&self) -> CenteringEstimates {
        self.centering
    }

    /// `T_n − h^{−1/2}μ̂`.
    pub fn centered(&self) -> f64 {
        self.statistic.t_n - self.centering.mu_hat / self.h().sqrt()
    }

    /// `(T_n − h^{−1/2}μ̂)/τ̂`.
    pub fn studentized(&self) -> Result<f64> {
        if !(self.centering.tau_hat_sq > 0.0) {
            return Err(SpectestError::DegenerateScale("tau_hat_sq is zero".into()));
        }
        Ok(self.centered() / self.centering.tau_hat_sq.sqrt())
    }

    pub fn asymptotic_test(&self, alpha: f64) -> Result<TestReport> {
        let mut report = asymptotic_test(&self.statistic, &self.centering, alpha)?;
        self.fill_metadata(&mut report);
        Ok(report)
    }

    pub(crate) fn fill_metadata(&self, report: &mut TestReport) {
        report.bandwidth = self.bandwidth.source();
        report.p = self.p;
        report.q = self.q;
    }
}

/// Per-frequency values of the exactness condition and their `L1` aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessDiagnostic {
    pub values: Vec<f64>,
    pub aggregate: f64,
}

/// The three-sum expression whose vanishing characterizes asymptotic
/// exactness of the uncentered and centered randomization tests.
pub fn exactness_value(m: &DMatrix<Complex64>, p: usize, q: usize) -> f64 {
    let t = TraceTensor::new(m, p, q);
    let qf = q as f64;
    let mut first = 0.0;
    let mut second = 0.0;
    let mut third = 0.0;
    for j1 in 0..q {
        for j3 in 0..q {
            if j1 == j3 {
                continue;
            }
            first += t.get(j1, j3, j1, j3).norm_sqr();
            for j4 in 0..q {
                if j4 != j1 && j4 != j3 {
                    second += t.get(j1, j3, j1, j4).norm_sqr();
                }
            }
            for j2 in 0..q {
                for j4 in 0..q {
                    if j2 != j4 && j1 != j2 && j3 != j4 {
                        third += t.get(j1, j3, j2, j4).norm_sqr();
                    }
                }
            }
        }
    }
    ((qf - 1.0).powi(3) - 1.0) * first - 2.0 * ((qf - 1.0).powi(2) + 1.0) * second + (qf - 2.0) * third
}

pub fn exactness_condition(field: &SpectralMatrixField, p: usize, q: usize) -> Result<ExactnessDiagnostic> {
    check_groups(field, p, q)?;
    let values: Vec<f64> = field.matrices().iter().map(|m| exactness_value(m, p, q)).collect();
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let aggregate = field.grid().weight() * pairwise_sum(&abs);
    Ok(ExactnessDiagnostic { values, aggregate })
}

/// How the `−1/q` entries of the detection-shift matrix are placed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GammaRule {
    /// Both index pairs must lie in the diagonal blocks; `Γ` is symmetric.
    #[default]
    DiagonalBlocks,
    /// Only the row pair is required to lie in the diagonal blocks.
    RowOnly,
}

fn in_diagonal_blocks(i: usize, j: usize, p: usize) -> bool {
    i / p == j / p
}

/// The `d²×d²` matrix `Γ`, indexed by column-major `vec` positions
/// `i + j·d` (0-based).
pub fn detection_gamma(p: usize, q: usize, rule: GammaRule) -> DMatrix<f64> {
    let d = p * q;
    let qf = q as f64;
    DMatrix::from_fn(d * d, d * d, |row, col| {
        let (i, j) = (row % d, row / d);
        let (k, l) = (col % d, col / d);
        if !in_diagonal_blocks(i, j, p) {
            return 0.0;
        }
        if rule == GammaRule::DiagonalBlocks && !in_diagonal_blocks(k, l, p) {
            return 0.0;
        }
        let (di, dj) = (i.abs_diff(k), j.abs_diff(l));
        if di == 0 && dj == 0 {
            (qf - 1.0) / qf
        } else if di == dj && di % p == 0 {
            -1.0 / qf
        } else {
            0.0
        }
    })
}

/// `ν = ∫ vec(ḡ)ᵀ Γ vec(g) dω` as a Riemann sum over the supplied values.
pub fn detection_shift(g: &[DMatrix<Complex64>], p: usize, q: usize) -> Result<f64> {
    if g.is_empty() {
        return invalid("perturbation has no frequencies");
    }
    let d = p * q;
    for (pos, m) in g.iter().enumerate() {
        if m.nrows() != d || m.ncols() != d {
            return Err(SpectestError::DimensionMismatch(format!(
                "perturbation at position {pos} is {}×{}, expected {d}×{d}",
                m.nrows(),
                m.ncols()
            )));
        }
        let dev = m.iter().zip(m.adjoint().iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if dev > 1e-10 {
            return invalid(format!("perturbation at position {pos} is not Hermitian"));
        }
    }
    let gamma = detection_gamma(p, q, GammaRule::DiagonalBlocks).map(Complex64::from);
    let terms: Vec<f64> = g
        .iter()
        .map(|m| {
            let v = DMatrix::from_column_slice(d * d, 1, m.as_slice());
            let form = v.map(|z| z.conj()).transpose() * &gamma * &v;
            form[(0, 0)].re
        })
        .collect();
    Ok(2.0 * PI / g.len() as f64 * pairwise_sum(&terms))
}
