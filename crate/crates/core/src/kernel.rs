//! Smoothing kernels, kernel spectral estimates and bandwidth selection.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SpectestError};
use crate::series::{FrequencyGrid, TimeSeriesPanel};
use crate::spectral::{periodogram, FieldKind, SpectralMatrixField};

type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A symmetric, nonnegative weight function on `[-π, π]` integrating to `2π`.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    eval: KernelFn,
    a_k: f64,
    b_k: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("a_k", &self.a_k)
            .field("b_k", &self.b_k)
            .finish()
    }
}

impl Kernel {
    /// Builds a kernel with known constants and checks them numerically.
    pub fn new<F>(name: impl Into<String>, eval: F, a_k: f64, b_k: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let kernel = Self {
            name: name.into(),
            eval: Arc::new(eval),
            a_k,
            b_k,
        };
        kernel.check_shape()?;
        let (a_num, b_num) = kernel.numeric_constants();
        for (label, closed, numeric) in [("A_K", a_k, a_num), ("B_K", b_k, b_num)] {
            if ((closed - numeric) / closed).abs() > 1e-6 {
                return invalid(format!(
                    "kernel {}: {label} = {closed} disagrees with quadrature value {numeric}",
                    kernel.name
                ));
            }
        }
        Ok(kernel)
    }

    /// Builds a kernel whose constants are computed by quadrature.
    pub fn custom<F>(name: impl Into<String>, eval: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut kernel = Self {
            name: name.into(),
            eval: Arc::new(eval),
            a_k: f64::NAN,
            b_k: f64::NAN,
        };
        kernel.check_shape()?;
        let (a_k, b_k) = kernel.numeric_constants();
        kernel.a_k = a_k;
        kernel.b_k = b_k;
        Ok(kernel)
    }

    /// Looks up a built-in kernel: `bartlett-priestley` or `daniell`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "bartlett-priestley" | "bartlett_priestley" | "bp" => Ok(bartlett_priestley()),
            "daniell" | "rectangular" => Ok(daniell()),
            other => invalid(format!("unknown kernel {other:?}")),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a_k(&self) -> f64 {
        self.a_k
    }

    pub fn b_k(&self) -> f64 {
        self.b_k
    }

    /// `K(ω)`, zero outside `[-π, π]`.
    pub fn evaluate(&self, omega: f64) -> f64 {
        if omega.abs() > PI {
            0.0
        } else {
            (self.eval)(omega)
        }
    }

    /// `K_h(x) = K(x/h)/h`.
    pub fn scaled(&self, x: f64, h: f64) -> f64 {
        self.evaluate(x / h) / h
    }

    /// `(∫K, A_K, B_K)` by composite Gauss–Legendre quadrature.
    pub fn numeric_integrals(&self) -> (f64, f64, f64) {
        let rule = GaussLegendre::new(16);
        let mass = rule.integrate(|v| self.evaluate(v), &[-PI, 0.0, PI], 16);
        let (a, b) = self.numeric_constants();
        (mass, a, b)
    }

    fn numeric_constants(&self) -> (f64, f64) {
        let rule = GaussLegendre::new(16);
        let k = |v: f64| self.evaluate(v);
        let a = rule.integrate(|v| k(v).powi(2), &[-PI, 0.0, PI], 16) / (2.0 * PI);
        let autocorr = |z: f64| {
            let lo = (-PI).max(-PI - z);
            let hi = PI.min(PI - z);
            if hi <= lo {
                return 0.0;
            }
            let mut breaks = vec![lo, hi];
            for c in [0.0, -z] {
                if c > lo && c < hi {
                    breaks.push(c);
                }
            }
            breaks.sort_by(f64::total_cmp);
            rule.integrate(|v| k(v) * k(v + z), &breaks, 4)
        };
        let b = rule.integrate(|z| autocorr(z).powi(2), &[-2.0 * PI, -PI, 0.0, PI, 2.0 * PI], 8) / (PI * PI);
        (a, b)
    }

    fn check_shape(&self) -> Result<()> {
        for i in 0..=400 {
            let w = PI * i as f64 / 400.0;
            let (plus, minus) = (self.evaluate(w), self.evaluate(-w));
            if !(plus.is_finite() && plus >= 0.0) {
                return invalid(format!("kernel {} is negative or non-finite at {w}", self.name));
            }
            if (plus - minus).abs() > 1e-12 * plus.abs().max(1.0) {
                return invalid(format!("kernel {} is not symmetric at {w}", self.name));
            }
        }
        let (mass, _, _) = self.numeric_integrals();
        if (mass - 2.0 * PI).abs() > 1e-6 {
            return invalid(format!("kernel {} integrates to {mass}, expected 2π", self.name));
        }
        Ok(())
    }
}

/// `K(ω) = (3/2)(1 − (ω/π)²)` on `[-π, π]`.
pub fn bartlett_priestley() -> Kernel {
    Kernel::new(
        "bartlett-priestley",
        |w: f64| 1.5 * (1.0 - (w / PI).powi(2)),
        6.0 / 5.0,
        2672.0 * PI / 385.0,
    )
    .expect("closed-form constants of the Bartlett–Priestley kernel")
}

/// The flat kernel `K ≡ 1` on `[-π, π]`.
pub fn daniell() -> Kernel {
    Kernel::new("daniell", |_| 1.0, 1.0, 16.0 * PI / 3.0).expect("closed-form constants of the Daniell kernel")
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub(crate) fn new(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order as f64;
        for i in 0..order {
            let mut x = (PI * (i as f64 + 0.75) / (m + 0.5)).cos();
            let mut deriv = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=order {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                deriv = m * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / deriv;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * deriv * deriv);
        }
        Self { nodes, weights }
    }

    /// Integrates over consecutive `breaks`, each piece split into `panels`.
    pub(crate) fn integrate<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64], panels: usize) -> f64 {
        let mut total = 0.0;
        for piece in breaks.windows(2) {
            let width = (piece[1] - piece[0]) / panels as f64;
            for s in 0..panels {
                let a = piece[0] + s as f64 * width;
                let (mid, half) = (a + width / 2.0, width / 2.0);
                total += half
                    * self
                        .nodes
                        .iter()
                        .zip(&self.weights)
                        .map(|(x, w)| w * f(mid + half * x))
                        .sum::<f64>();
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum BandwidthSource {
    Fixed,
    CrossValidated { multiplier: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    h: f64,
    source: BandwidthSource,
}

impl Bandwidth {
    pub fn fixed(h: f64) -> Result<Self> {
        Self::validated(h, BandwidthSource::Fixed)
    }

    fn validated(h: f64, source: BandwidthSource) -> Result<Self> {
        if !(h > 0.0 && h <= PI) {
            return invalid(format!("bandwidth must lie in (0, π], got {h}"));
        }
        Ok(Self { h, source })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn source(&self) -> BandwidthSource {
        self.source
    }

    /// Multiplies a cross-validated bandwidth by `c`.
    pub fn with_multiplier(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return invalid(format!("bandwidth multiplier must be positive, got {c}"));
        }
        match self.source {
            BandwidthSource::CrossValidated { multiplier } => Self::validated(
                self.h / multiplier * c,
                BandwidthSource::CrossValidated { multiplier: c },
            ),
            BandwidthSource::Fixed => Self::validated(self.h * c, BandwidthSource::Fixed),
        }
    }

    /// Logs a warning when `h` is far outside the asymptotic rate window.
    pub fn warn_if_unusual(&self, n: usize) {
        let n = n as f64;
        if self.h * self.h * n < 1.0 {
            log::warn!("bandwidth h = {} is small for n = {n}: h²n < 1", self.h);
        }
        if self.h.powf(4.5) * n >= 10.0 {
            log::warn!("bandwidth h = {} is large for n = {n}: h^(9/2)·n ≥ 10", self.h);
        }
    }
}

/// Circular smoothing weights on a Fourier grid of size `n`.
///
/// `weights[m] = K_h(ω_m)/n` with the frequency difference `2πm/n`
/// wrapped into `(-π, π]`; only nonzero entries are stored.
#[derive(Debug, Clone)]
pub struct SmoothingWeights {
    n: usize,
    offsets: Vec<(usize, f64)>,
}

impl SmoothingWeights {
    pub fn new(kernel: &Kernel, h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0) {
            return invalid(format!("bandwidth must be positive, got {h}"));
        }
        let offsets = (0..n)
            .filter_map(|m| {
                let w = kernel.scaled(wrapped_difference(m as i64, n), h) / n as f64;
                (w != 0.0).then_some((m, w))
            })
            .collect();
        Ok(Self { n, offsets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nonzero `(offset, weight)` pairs; the estimate at position `i`
    /// is `Σ weight·I[(i - offset) mod n]`.
    pub fn offsets(&self) -> &[(usize, f64)] {
        &self.offsets
    }

    pub(crate) fn source_position(&self, target: usize, offset: usize) -> usize {
        (target + self.n - offset) % self.n
    }
}

/// `2πm/n` reduced into `(-π, π]`.
fn wrapped_difference(m: i64, n: usize) -> f64 {
    let n_i = n as i64;
    let mut r = m.rem_euclid(n_i);
    if 2 * r > n_i {
        r -= n_i;
    }
    2.0 * PI * r as f64 / n as f64
}

/// Wraps an angle into `(-π, π]`.
fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x.rem_euclid(two_pi);
    if y > PI {
        y -= two_pi;
    }
    y
}

/// `f̂(ω) = (1/n) Σ_k K_h(ω − ω_k) I(ω_k)` at every frequency of `eval_grid`.
pub fn smooth(
    field: &SpectralMatrixField,
    kernel: &Kernel,
    bandwidth: &Bandwidth,
    eval_grid: &FrequencyGrid,
) -> Result<SpectralMatrixField> {
    let h = bandwidth.h();
    let source = field.grid();
    let n = source.n();
    let dim = field.dim();
    let matrices = if eval_grid.n() == n {
        let weights = SmoothingWeights::new(kernel, h, n)?;
        (0..n)
            .map(|i| {
                let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
                for &(m, w) in weights.offsets() {
                    acc += field.at_position(weights.source_position(i, m)) * Complex64::from(w);
                }
                acc
            })
            .collect()
    } else {
        eval_grid
            .indices()
            .map(|k| {
                let omega = eval_grid.omega(k);
                let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
                for j in source.indices() {
                    let w = kernel.scaled(wrap_angle(omega - source.omega(j)), h) / n as f64;
                    if w != 0.0 {
                        acc += field.at(j) * Complex64::from(w);
                    }
                }
                acc
            })
            .collect()
    };
    SpectralMatrixField::new(*eval_grid, matrices, FieldKind::Smoothed)
}

/// 15 log-spaced bandwidths in `[4π/n, π/2]`.
pub fn default_candidates(n: usize) -> Vec<f64> {
    let hi = PI / 2.0;
    let lo = (4.0 * PI / n as f64).min(hi);
    let count = 15;
    (0..count)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Leave-two-out Whittle criterion for one bandwidth.
pub fn cv_criterion(diagonals: &[Vec<f64>], kernel: &Kernel, h: f64) -> f64 {
    let n = diagonals[0].len();
    let grid_half = (n - 1) / 2;
    let weights: Vec<f64> = (0..n)
        .map(|m| kernel.scaled(wrapped_difference(m as i64, n), h))
        .collect();
    let mut total = 0.0;
    for series in diagonals {
        // `series` is indexed by residue k mod n.
        for k in 1..=grid_half {
            let minus_k = n - k;
            let (mut num, mut den) = (0.0, 0.0);
            for l in 0..n {
                if l == k || l == minus_k {
                    continue;
                }
                let w = weights[(k + n - l) % n];
                num += w * series[l];
                den += w;
            }
            if !(den > 0.0) {
                return f64::INFINITY;
            }
            let estimate = num / den;
            if !(estimate > 0.0) {
                return f64::INFINITY;
            }
            total += estimate.ln() + series[k] / estimate;
        }
    }
    total
}

/// Chooses `h` among `candidates` by minimizing the leave-two-out Whittle
/// criterion summed over all diagonal periodogram ordinates.
pub fn cross_validate_bandwidth(panel: &TimeSeriesPanel, kernel: &Kernel, candidates: &[f64]) -> Result<Bandwidth> {
    if candidates.is_empty() {
        return invalid("bandwidth candidate list is empty");
    }
    if let Some(bad) = candidates.iter().find(|h| !(**h > 0.0 && **h <= PI)) {
        return invalid(format!("bandwidth candidate {bad} outside (0, π]"));
    }
    let field = periodogram(panel)?;
    let grid = field.grid();
    let n = grid.n();
    let diagonals: Vec<Vec<f64>> = (0..panel.d())
        .map(|j| (0..n as i64).map(|r| field.at(r)[(j, j)].re).collect())
        .collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&h| cv_criterion(&diagonals, kernel, h))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for (&h, &score) in candidates.iter().zip(&scores) {
        best = match best {
            None => Some((h, score)),
            Some((bh, bs)) if score < bs || (score == bs && h < bh) => Some((h, score)),
            keep => keep,
        };
    }
    let (h, score) = best.expect("non-empty candidates");
    if !score.is_finite() {
        return Err(SpectestError::DegenerateScale(
            "every bandwidth candidate produced a nonpositive leave-out estimate".into(),
        ));
    }
    Bandwidth::validated(h, BandwidthSource::CrossValidated { multiplier: 1.0 })
}
