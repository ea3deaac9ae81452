//! Seeded simulators for the linear and non-linear benchmark models.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::rng_for;
use crate::series::TimeSeriesPanel;

pub const DEFAULT_BURN_IN: usize = 500;

/// Innovation law; every sampler is standardized to unit variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Innovation {
    #[default]
    Gaussian,
    Logistic,
    DoubleExponential,
}

impl Innovation {
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" | "normal" => Ok(Innovation::Gaussian),
            "logistic" => Ok(Innovation::Logistic),
            "double-exponential" | "double_exponential" | "laplace" => Ok(Innovation::DoubleExponential),
            other => invalid(format!("unknown innovation law {other:?}")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Innovation::Gaussian => "gaussian",
            Innovation::Logistic => "logistic",
            Innovation::DoubleExponential => "double-exponential",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Innovation::Gaussian => StandardNormal.sample(rng),
            Innovation::Logistic => {
                let u = open_unit(rng);
                (u / (1.0 - u)).ln() / (PI / 3f64.sqrt())
            }
            Innovation::DoubleExponential => {
                let v = open_unit(rng) - 0.5;
                -v.signum() * (1.0 - 2.0 * v.abs()).ln() / 2f64.sqrt()
            }
        }
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFamily {
    /// `X_t = A X_{t−1} + e_t`, `e_t ~ (0, Σ)`.
    Var1 { a: DMatrix<f64>, sigma: DMatrix<f64> },
    /// `X_t = B e_{t−1} + e_t`, `e_t ~ (0, Σ)`.
    Vma1 { b: DMatrix<f64>, sigma: DMatrix<f64> },
    /// Independent components `X = σ e`, `σ² = ω + a X²_{t−1} + b σ²_{t−1}`.
    Garch11 { omega: Vec<f64>, a: Vec<f64>, b: Vec<f64> },
    /// Independent threshold components: coefficient `below` when the
    /// previous value is negative, `above` otherwise.
    Tar1 { below: Vec<f64>, above: Vec<f64> },
    /// Independent components `X_t = a_t X_{t−1} + e_t`, `a_t ~ N(0, σ²)`.
    Rca1 { coefficient_sd: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    family: ModelFamily,
    innovation: Innovation,
    burn_in: usize,
    /// Lower Cholesky factor of Σ for the linear families.
    factor: Option<DMatrix<f64>>,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, innovation: Innovation, burn_in: usize) -> Result<Self> {
        let factor = match &family {
            ModelFamily::Var1 { a, sigma } => {
                check_square(a, "A")?;
                let radius = spectral_radius(a);
                if !(radius < 1.0) {
                    return invalid(format!("VAR coefficient matrix has spectral radius {radius} >= 1"));
                }
                Some(cholesky_factor(sigma, a.nrows())?)
            }
            ModelFamily::Vma1 { b, sigma } => {
                check_square(b, "B")?;
                Some(cholesky_factor(sigma, b.nrows())?)
            }
            ModelFamily::Garch11 { omega, a, b } => {
                if omega.is_empty() || omega.len() != a.len() || a.len() != b.len() {
                    return invalid("GARCH parameter vectors must be non-empty and of equal length");
                }
                for i in 0..omega.len() {
                    if !(omega[i] > 0.0 && a[i] >= 0.0 && b[i] >= 0.0) {
                        return invalid(format!("GARCH component {i}: need ω > 0, a ≥ 0, b ≥ 0"));
                    }
                    if !(a[i] + b[i] < 1.0) {
                        return invalid(format!("GARCH component {i}: a + b = {} is not below 1", a[i] + b[i]));
                    }
                }
                None
            }
            ModelFamily::Tar1 { below, above } => {
                if below.is_empty() || below.len() != above.len() {
                    return invalid("TAR coefficient vectors must be non-empty and of equal length");
                }
                None
            }
            ModelFamily::Rca1 { coefficient_sd } => {
                if coefficient_sd.is_empty() || coefficient_sd.iter().any(|s| !(*s >= 0.0)) {
                    return invalid("RCA coefficient standard deviations must be nonnegative");
                }
                None
            }
        };
        Ok(Self {
            family,
            innovation,
            burn_in,
            factor,
        })
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    pub fn innovation(&self) -> Innovation {
        self.innovation
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            ModelFamily::Var1 { a, .. } => a.nrows(),
            ModelFamily::Vma1 { b, .. } => b.nrows(),
            ModelFamily::Garch11 { omega, .. } => omega.len(),
            ModelFamily::Tar1 { below, .. } => below.len(),
            ModelFamily::Rca1 { coefficient_sd } => coefficient_sd.len(),
        }
    }
}

fn check_square(m: &DMatrix<f64>, label: &str) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return invalid(format!("{label} must be a non-empty square matrix"));
    }
    Ok(())
}

fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn cholesky_factor(sigma: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    if sigma.nrows() != d || sigma.ncols() != d {
        return invalid(format!("Σ must be {d}×{d}"));
    }
    if (sigma - sigma.transpose()).abs().max() > 1e-12 {
        return invalid("Σ must be symmetric");
    }
    match sigma.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => invalid("Σ must be positive definite"),
    }
}

fn draw_vector(rng: &mut ChaCha8Rng, law: Innovation, factor: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(factor.nrows(), |_, _| law.sample(rng));
    factor * z
}

/// Generates `burn_in + n` steps and keeps the last `n` as a panel with
/// `p = 1` and one group per component.
pub fn simulate(spec: &ModelSpec, n: usize, seed: u64) -> Result<TimeSeriesPanel> {
    if n < 4 {
        return invalid(format!("need n >= 4, got {n}"));
    }
    let d = spec.dim();
    if d < 2 {
        return invalid("simulated panels need at least two components");
    }
    let mut rng = rng_for(seed, &[]);
    let law = spec.innovation;
    let total = spec.burn_in + n;
    let mut data = DMatrix::<f64>::zeros(n, d);
    let keep = |t: usize| t.checked_sub(spec.burn_in);

    match &spec.family {
        ModelFamily::Var1 { a, .. } => {
            let factor = spec.factor.as_ref().expect("linear family has a factor");
            let mut x = DVector::<f64>::zeros(d);
            for t in 0..total {
                x = a * &x + draw_vector(&mut rng, law, factor);
                if let Some(row) = keep(t) {
                    data.row_mut(row).copy_from(&x.transpose());
                }
            }
        }
        ModelFamily::Vma1 { b, .. } => {
            let factor = spec.factor.as_ref().expect("linear family has a factor");
            let mut previous = draw_vector(&mut rng, law, factor);
            for row in 0..n {
                let current = draw_vector(&mut rng, law, factor);
                let x = b * &previous + &current;
                data.row_mut(row).copy_from(&x.transpose());
                previous = current;
            }
        }
        ModelFamily::Garch11 { omega, a, b } => {
            let mut x = vec![0.0; d];
            let mut var: Vec<f64> = (0..d).map(|i| omega[i] / (1.0 - a[i] - b[i])).collect();
            for t in 0..total {
                for i in 0..d {
                    var[i] = omega[i] + a[i] * x[i] * x[i] + b[i] * var[i];
                    x[i] = var[i].sqrt() * law.sample(&mut rng);
                }
                if let Some(row) = keep(t) {
                    for i in 0..d {
                        data[(row, i)] = x[i];
                    }
                }
            }
        }
        ModelFamily::Tar1 { below, above } => {
            let mut x = vec![0.0; d];
            for t in 0..total {
                for i in 0..d {
                    let coef = if x[i] < 0.0 { below[i] } else { above[i] };
                    x[i] = coef * x[i] + law.sample(&mut rng);
                }
                if let Some(row) = keep(t) {
                    for i in 0..d {
                        data[(row, i)] = x[i];
                    }
                }
            }
            for mut col in data.column_iter_mut() {
                let mean = col.mean();
                col.add_scalar_mut(-mean);
            }
        }
        ModelFamily::Rca1 { coefficient_sd } => {
            let mut x = vec![0.0; d];
            for t in 0..total {
                for i in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let coef = coefficient_sd[i] * z;
                    x[i] = coef * x[i] + law.sample(&mut rng);
                }
                if let Some(row) = keep(t) {
                    for i in 0..d {
                        data[(row, i)] = x[i];
                    }
                }
            }
        }
    }
    TimeSeriesPanel::new(data, 1, d)
}

fn diag2(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
}

fn sym2(a: f64, off: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, off, off, b])
}

/// The named benchmark models with Gaussian innovations.
pub fn preset(name: &str) -> Result<ModelSpec> {
    preset_with(name, Innovation::Gaussian)
}

/// Names accepted by [`preset`].
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for family in ["AR", "MA", "GARCH", "TAR"] {
        names.extend((1..=6).map(|i| format!("{family}{i}")));
    }
    names.extend((1..=3).map(|i| format!("RCA{i}")));
    names
}

pub fn preset_with(name: &str, innovation: Innovation) -> Result<ModelSpec> {
    let upper = name.to_ascii_uppercase();
    let split = upper.find(|c: char| c.is_ascii_digit()).unwrap_or(upper.len());
    let (family, index) = upper.split_at(split);
    let index: usize = index
        .parse()
        .map_err(|_| crate::error::SpectestError::InvalidInput(format!("unknown model preset {name:?}")))?;
    let sigma_2 = sym2(1.0, 0.5, 1.0);
    let model = match (family, index) {
        ("AR", 1..=6) => {
            let (a1, a2) = [(0.1, 0.1), (0.5, 0.5), (0.9, 0.9), (0.9, 0.8), (0.9, 0.7), (0.9, 0.6)][index - 1];
            ModelFamily::Var1 {
                a: diag2(a1, a2),
                sigma: DMatrix::identity(2, 2),
            }
        }
        ("MA", 1..=6) => {
            let (b11, b22) = [(0.1, 0.1), (0.5, 0.5), (0.9, 0.9), (0.5, 0.7), (0.5, 0.8), (0.5, 0.9)][index - 1];
            ModelFamily::Vma1 {
                b: sym2(b11, 0.5, b22),
                sigma: sigma_2,
            }
        }
        ("GARCH", 1..=6) => {
            let (b1, b2) = [(0.2, 0.2), (0.3, 0.3), (0.4, 0.4), (0.2, 0.3), (0.2, 0.4), (0.2, 0.5)][index - 1];
            ModelFamily::Garch11 {
                omega: vec![0.01; 2],
                a: vec![0.1; 2],
                b: vec![b1, b2],
            }
        }
        ("TAR", 1..=6) => {
            let coefficients = [(-0.2, 0.1), (-0.3, 0.2), (-0.4, 0.3), (-0.5, 0.4)];
            let (first, second) = match index {
                1..=3 => (coefficients[index - 1], coefficients[index - 1]),
                _ => (coefficients[0], coefficients[index - 3]),
            };
            ModelFamily::Tar1 {
                below: vec![first.0, second.0],
                above: vec![first.1, second.1],
            }
        }
        ("RCA", 1..=3) => ModelFamily::Rca1 {
            coefficient_sd: vec![[0.1, 0.2, 0.3][index - 1]; 2],
        },
        _ => return invalid(format!("unknown model preset {name:?}")),
    };
    ModelSpec::new(model, innovation, DEFAULT_BURN_IN)
}
