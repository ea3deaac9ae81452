//! Pointwise integrands of the centering and scale constants, and their
//! population (integrated) counterparts.
//!
//! Every function takes a full `d×d` spectral matrix with `d = p·q`.
//! The integrated forms use the Riemann sum over the field's grid.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::kernel::Kernel;
use crate::spectral::SpectralMatrixField;

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `tr(M_ab)` of the `p×p` block `(a, b)`.
pub fn block_trace(m: &DMatrix<Complex64>, p: usize, a: usize, b: usize) -> Complex64 {
    (0..p).map(|i| m[(a * p + i, b * p + i)]).sum()
}

/// `tr(M_ab · M_cd^H)`.
pub fn block_trace_product(m: &DMatrix<Complex64>, p: usize, ab: (usize, usize), cd: (usize, usize)) -> Complex64 {
    let (r0, c0) = (ab.0 * p, ab.1 * p);
    let (r1, c1) = (cd.0 * p, cd.1 * p);
    let mut acc = Complex64::default();
    for x in 0..p {
        for y in 0..p {
            acc += m[(r0 + x, c0 + y)] * m[(r1 + x, c1 + y)].conj();
        }
    }
    acc
}

/// All `tr(M_{j1j3} M_{j2j4}^H)`, indexed `[((j1·q + j3)·q + j2)·q + j4]`.
pub(crate) struct TraceTensor {
    q: usize,
    values: Vec<Complex64>,
}

impl TraceTensor {
    pub(crate) fn new(m: &DMatrix<Complex64>, p: usize, q: usize) -> Self {
        let mut values = vec![Complex64::default(); q * q * q * q];
        for j1 in 0..q {
            for j3 in 0..q {
                for j2 in 0..q {
                    for j4 in 0..q {
                        values[((j1 * q + j3) * q + j2) * q + j4] = block_trace_product(m, p, (j1, j3), (j2, j4));
                    }
                }
            }
        }
        Self { q, values }
    }

    /// `tr(M_{j1j3} M_{j2j4}^H)`.
    pub(crate) fn get(&self, j1: usize, j3: usize, j2: usize, j4: usize) -> Complex64 {
        let q = self.q;
        self.values[((j1 * q + j3) * q + j2) * q + j4]
    }
}

/// `(1/q) Σ_{j1,j2} (−1 + qδ_{j1j2}) |tr M_{j1j2}|²`.
pub fn mu_zero_integrand(m: &DMatrix<Complex64>, p: usize, q: usize) -> f64 {
    let qf = q as f64;
    let mut acc = 0.0;
    for j1 in 0..q {
        for j2 in 0..q {
            acc += (-1.0 + qf * delta(j1, j2)) * block_trace(m, p, j1, j2).norm_sqr();
        }
    }
    acc / qf
}

/// `(1/q²) Σ (−1 + qδ_{j1j2})(−1 + qδ_{j3j4}) |tr(M_{j1j3} M_{j2j4}^H)|²`.
pub fn tau_zero_integrand(m: &DMatrix<Complex64>, p: usize, q: usize) -> f64 {
    let qf = q as f64;
    let t = TraceTensor::new(m, p, q);
    let mut acc = 0.0;
    for j1 in 0..q {
        for j2 in 0..q {
            let w12 = -1.0 + qf * delta(j1, j2);
            for j3 in 0..q {
                for j4 in 0..q {
                    let w34 = -1.0 + qf * delta(j3, j4);
                    acc += w12 * w34 * t.get(j1, j3, j2, j4).norm_sqr();
                }
            }
        }
    }
    acc / (qf * qf)
}

/// `(1/q) Σ (−1 + qδ_{j1j2}) {|tr M_{j1j2}|² + tr(M_{j1j1} M_{j2j2}^H)}`, real part.
pub fn mu_star_integrand(m: &DMatrix<Complex64>, p: usize, q: usize) -> f64 {
    let qf = q as f64;
    let mut acc = 0.0;
    for j1 in 0..q {
        for j2 in 0..q {
            let w = -1.0 + qf * delta(j1, j2);
            let cross = block_trace(m, p, j1, j2).norm_sqr();
            let diag = block_trace_product(m, p, (j1, j1), (j2, j2)).re;
            acc += w * (cross + diag);
        }
    }
    acc / qf
}

/// Weight `−1 + qδ_{j1j3}δ_{j2j4} + (q/(q−1))(1−δ_{j1j3})(1−δ_{j2j4})`.
pub fn star_weight(q: usize, j1: usize, j2: usize, j3: usize, j4: usize) -> f64 {
    let qf = q as f64;
    let (d13, d24) = (delta(j1, j3), delta(j2, j4));
    -1.0 + qf * d13 * d24 + qf / (qf - 1.0) * (1.0 - d13) * (1.0 - d24)
}

/// Integrand of the conditional variance constant, real part.
pub fn tau_star_integrand(m: &DMatrix<Complex64>, p: usize, q: usize) -> f64 {
    let qf = q as f64;
    let t = TraceTensor::new(m, p, q);
    let mut acc = 0.0;
    for j1 in 0..q {
        for j2 in 0..q {
            let t12 = t.get(j1, j1, j2, j2);
            for j3 in 0..q {
                for j4 in 0..q {
                    let w = star_weight(q, j1, j2, j3, j4);
                    let t34 = t.get(j3, j3, j4, j4);
                    acc += w * ((t12 * t34.conj()).re + t.get(j1, j3, j2, j4).norm_sqr());
                }
            }
        }
    }
    acc / (qf * qf)
}

/// Integrand of the conditional variance constant under equal diagonal blocks.
pub fn tau_star_zero_integrand(m: &DMatrix<Complex64>, p: usize, q: usize) -> f64 {
    let qf = q as f64;
    let t = TraceTensor::new(m, p, q);
    let mut acc = 0.0;
    for j1 in 0..q {
        for j2 in 0..q {
            for j3 in 0..q {
                for j4 in 0..q {
                    acc += star_weight(q, j1, j2, j3, j4) * t.get(j1, j3, j2, j4).norm_sqr();
                }
            }
        }
    }
    acc / (qf * qf)
}

/// `(2π/n) Σ_k f(M(ω_k))`, summed pairwise.
pub(crate) fn riemann_sum<F>(field: &SpectralMatrixField, f: F) -> f64
where
    F: Fn(&DMatrix<Complex64>) -> f64,
{
    let terms: Vec<f64> = field.matrices().iter().map(f).collect();
    field.grid().weight() * pairwise_sum(&terms)
}

/// Pairwise summation with a fixed split, so the result does not depend
/// on how terms were produced.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len if len <= 8 => values.iter().sum(),
        len => {
            let (a, b) = values.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `μ0 = A_K ∫ (1/q) Σ (−1 + qδ) |tr F_{j1j2}|²`.
pub fn mu_zero(field: &SpectralMatrixField, kernel: &Kernel, p: usize, q: usize) -> f64 {
    kernel.a_k() * riemann_sum(field, |m| mu_zero_integrand(m, p, q))
}

pub fn tau_zero_sq(field: &SpectralMatrixField, kernel: &Kernel, p: usize, q: usize) -> f64 {
    kernel.b_k() * riemann_sum(field, |m| tau_zero_integrand(m, p, q))
}

pub fn mu_star(field: &SpectralMatrixField, kernel: &Kernel, p: usize, q: usize) -> f64 {
    kernel.a_k() * riemann_sum(field, |m| mu_star_integrand(m, p, q))
}

pub fn tau_star_sq(field: &SpectralMatrixField, kernel: &Kernel, p: usize, q: usize) -> f64 {
    kernel.b_k() * riemann_sum(field, |m| tau_star_integrand(m, p, q))
}

pub fn tau_star_zero_sq(field: &SpectralMatrixField, kernel: &Kernel, p: usize, q: usize) -> f64 {
    kernel.b_k() * riemann_sum(field, |m| tau_star_zero_integrand(m, p, q))
}
