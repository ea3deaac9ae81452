#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spectest::{fourier_frequencies, FieldKind, FrequencyPermutationFamily, Kernel, SpectralMatrixField, TimeSeriesPanel};

pub fn gaussian_panel(n: usize, p: usize, q: usize, seed: u64) -> TimeSeriesPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = DMatrix::from_fn(n, p * q, |_, _| rng.sample::<f64, _>(StandardNormal));
    TimeSeriesPanel::new(data, p, q).unwrap()
}

/// `J(ω) = (2πn)^{-1/2} Σ_{t=1}^n X_t e^{-itω}` by direct summation.
pub fn direct_dft(data: &DMatrix<f64>, omega: f64) -> DVector<Complex64> {
    let (n, d) = data.shape();
    let norm = 1.0 / (2.0 * PI * n as f64).sqrt();
    DVector::from_fn(d, |c, _| {
        let mut acc = Complex64::default();
        for t in 0..n {
            acc += Complex64::from_polar(data[(t, c)], -((t + 1) as f64) * omega);
        }
        acc * norm
    })
}

/// Column-demeaned copy of `data`.
pub fn demeaned(data: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = data.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

/// Periodogram matrices by direct summation, indexed by grid position.
pub fn direct_periodogram(data: &DMatrix<f64>) -> Vec<DMatrix<Complex64>> {
    let grid = fourier_frequencies(data.nrows()).unwrap();
    (0..grid.n())
        .map(|pos| {
            let j = direct_dft(data, grid.omega(grid.index_at(pos)));
            &j * j.adjoint()
        })
        .collect()
}

/// `K_h(ω_i − ω_k)/n` with the difference wrapped into `(-π, π]`.
pub fn weight(kernel: &Kernel, h: f64, n: usize, pos_i: usize, pos_k: usize) -> f64 {
    let grid = fourier_frequencies(n).unwrap();
    let mut x = grid.omega(grid.index_at(pos_i)) - grid.omega(grid.index_at(pos_k));
    while x > PI {
        x -= 2.0 * PI;
    }
    while x <= -PI {
        x += 2.0 * PI;
    }
    kernel.scaled(x, h) / n as f64
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + a.adjoint()) * Complex64::from(0.5)
}

/// Random positive semidefinite Hermitian matrix.
pub fn random_psd(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    &a * a.adjoint()
}

/// A conjugate-symmetric field on the grid of size `n` built from `make`,
/// which is called once per nonnegative index.
pub fn symmetric_field<F>(n: usize, kind: FieldKind, mut make: F) -> SpectralMatrixField
where
    F: FnMut(i64) -> DMatrix<Complex64>,
{
    let grid = fourier_frequencies(n).unwrap();
    let half: Vec<DMatrix<Complex64>> = (0..=(n as i64) / 2).map(&mut make).collect();
    SpectralMatrixField::from_fn(grid, kind, |k| {
        let m = &half[k.unsigned_abs() as usize];
        let edge = k == 0 || (n % 2 == 0 && k == n as i64 / 2);
        if edge {
            m.map(|z| Complex64::new(z.re, 0.0))
        } else if k < 0 {
            m.map(|z| z.conj())
        } else {
            m.clone()
        }
    })
    .unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// All permutations of `0..q` in lexicographic order.
pub fn permutations(q: usize) -> Vec<Vec<usize>> {
    if q == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for first in 0..q {
        for rest in permutations(q - 1) {
            let mut perm = vec![first];
            perm.extend(rest.into_iter().map(|x| if x >= first { x + 1 } else { x }));
            out.push(perm);
        }
    }
    out
}

/// Every family of `⌊n/2⌋ + 1` permutations of `q` labels.
pub fn all_families(n: usize, q: usize) -> Vec<FrequencyPermutationFamily> {
    let perms = permutations(q);
    let slots = n / 2 + 1;
    let total = perms.len().pow(slots as u32);
    (0..total)
        .map(|mut code| {
            let base = (0..slots)
                .map(|_| {
                    let perm = perms[code % perms.len()].clone();
                    code /= perms.len();
                    perm
                })
                .collect();
            FrequencyPermutationFamily::new(n, base).unwrap()
        })
        .collect()
}

/// `|k|` folded into `0..=⌊n/2⌋` for the index stored at `pos`.
pub fn folded_index(n: usize, pos: usize) -> usize {
    let grid = fourier_frequencies(n).unwrap();
    let k = grid.index_at(pos).rem_euclid(n as i64);
    k.min(n as i64 - k) as usize
}

/// Exact conditional mean of `T_n*` over uniform families, assembled from
/// the per-pair weight `Σ_r E*[(1 − qδ_{j1,π_{k1}(r)})(1 − qδ_{j2,π_{k2}(r)})]
/// = (−q + q²δ_{j1j2})·1{|k1| = |k2|}`.
///
/// Returns the `k1 = k2` part and the `k1 = −k2 ≠ k2` part separately.
pub fn conditional_mean_parts(
    field: &SpectralMatrixField,
    kernel: &Kernel,
    h: f64,
    p: usize,
    q: usize,
) -> (f64, f64) {
    let n = field.len();
    let blk = |pos: usize, j: usize| field.at_position(pos).view((j * p, j * p), (p, p)).into_owned();
    let (mut kept, mut dropped) = (0.0, 0.0);
    for i in 0..n {
        for k1 in 0..n {
            for k2 in 0..n {
                if folded_index(n, k1) != folded_index(n, k2) {
                    continue;
                }
                let ww = weight(kernel, h, n, i, k1) * weight(kernel, h, n, i, k2);
                if ww == 0.0 {
                    continue;
                }
                let mut s = 0.0;
                for j1 in 0..q {
                    for j2 in 0..q {
                        let lemma = -(q as f64) + if j1 == j2 { (q * q) as f64 } else { 0.0 };
                        let (a, b) = (blk(k1, j1), blk(k2, j2));
                        let tr: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum();
                        s += lemma * tr.re;
                    }
                }
                let term = ww * s / (q * q) as f64;
                if k1 == k2 {
                    kept += term;
                } else {
                    dropped += term;
                }
            }
        }
    }
    let scale = 2.0 * PI * h.sqrt();
    (scale * kept, scale * dropped)
}

/// `T_n*` for one family by brute force over `(ω_i, ω_k)`.
pub fn brute_force_t_star(
    field: &SpectralMatrixField,
    family: &FrequencyPermutationFamily,
    kernel: &Kernel,
    h: f64,
    p: usize,
    q: usize,
) -> f64 {
    let n = field.len();
    let grid = field.grid();
    let blk = |pos: usize, j: usize| field.at_position(pos).view((j * p, j * p), (p, p)).into_owned();
    let pooled = |pos: usize| (0..q).map(|j| blk(pos, j)).fold(DMatrix::zeros(p, p), |a, b| a + b) / Complex64::from(q as f64);
    let mut total = 0.0;
    for i in 0..n {
        for r in 0..q {
            let mut acc = DMatrix::<Complex64>::zeros(p, p);
            for k in 0..n {
                let g = family.at(grid.index_at(k))[r];
                acc += (blk(k, g) - pooled(k)) * Complex64::from(weight(kernel, h, n, i, k));
            }
            total += acc.norm_squared();
        }
    }
    2.0 * PI * h.sqrt() * total
}
