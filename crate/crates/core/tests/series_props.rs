mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{demeaned, direct_dft, direct_periodogram, gaussian_panel, random_hermitian, rel_diff, symmetric_field};
use spectest::{block, demean, dft, fourier_frequencies, periodogram, pooled_diagonal, FieldKind, TimeSeriesPanel};

fn panel_from(values: &[f64], n: usize, p: usize, q: usize) -> TimeSeriesPanel {
    TimeSeriesPanel::new(DMatrix::from_row_slice(n, p * q, values), p, q).unwrap()
}

#[test]
fn grid_examples() {
    let g4 = fourier_frequencies(4).unwrap();
    assert_eq!(g4.indices().collect::<Vec<_>>(), vec![-1, 0, 1, 2]);
    let expected = [-PI / 2.0, 0.0, PI / 2.0, PI];
    for (w, e) in g4.omegas().iter().zip(expected) {
        assert!((w - e).abs() < 1e-15);
    }
    assert_eq!(fourier_frequencies(5).unwrap().indices().collect::<Vec<_>>(), vec![-2, -1, 0, 1, 2]);
    let g100 = fourier_frequencies(100).unwrap();
    assert_eq!(g100.len(), 100);
    assert_eq!(g100.omegas().last().copied(), Some(PI));
    assert!(fourier_frequencies(3).is_err());
}

#[test]
fn grid_reduction_is_periodic() {
    let grid = fourier_frequencies(7).unwrap();
    for k in -30..30 {
        assert_eq!(grid.reduce(k), grid.reduce(k + 7));
        assert!(grid.indices().any(|j| j == grid.reduce(k)));
    }
}

#[test]
fn dft_matches_direct_sum_oracle() {
    let panel = gaussian_panel(8, 1, 2, 11);
    let grid = fourier_frequencies(8).unwrap();
    let fast = dft(&panel, &grid).unwrap();
    for (pos, k) in grid.indices().enumerate() {
        let slow = direct_dft(panel.data(), grid.omega(k));
        for c in 0..2 {
            assert!((fast[pos][c] - slow[c]).norm() < 1e-12, "k = {k}, c = {c}");
        }
    }
}

#[test]
fn dft_of_zero_and_impulse() {
    let n = 9;
    let grid = fourier_frequencies(n).unwrap();
    let zero = panel_from(&vec![0.0; 2 * n], n, 1, 2);
    assert!(dft(&zero, &grid).unwrap().iter().all(|v| v.iter().all(|z| z.norm() == 0.0)));

    let mut values = vec![0.0; 2 * n];
    values[0] = 1.0;
    values[1] = 1.0;
    let impulse = panel_from(&values, n, 1, 2);
    let j = dft(&impulse, &grid).unwrap();
    let norm = 1.0 / (2.0 * PI * n as f64).sqrt();
    for (pos, k) in grid.indices().enumerate() {
        let expected = Complex64::from_polar(norm, -grid.omega(k));
        assert!((j[pos][0] - expected).norm() < 1e-15);
    }
}

#[test]
fn dft_conjugate_symmetry() {
    let panel = gaussian_panel(12, 2, 2, 3);
    let grid = fourier_frequencies(12).unwrap();
    let j = dft(&panel, &grid).unwrap();
    for k in 1..6 {
        let (a, b) = (&j[grid.position(k)], &j[grid.position(-k)]);
        for c in 0..4 {
            assert!((a[c] - b[c].conj()).norm() < 1e-14);
        }
    }
    assert!(j[grid.position(0)].iter().all(|z| z.im == 0.0));
}

#[test]
fn zero_panel_gives_zero_periodogram() {
    let field = periodogram(&panel_from(&[0.0; 12], 6, 1, 2)).unwrap();
    assert!(field.matrices().iter().all(|m| m.iter().all(|z| z.norm() == 0.0)));
}

#[test]
fn cosine_periodogram_concentrates_at_its_frequency() {
    let n = 16;
    let values: Vec<f64> = (1..=n)
        .flat_map(|t| {
            let x = (2.0 * PI * t as f64 / n as f64).cos();
            [x, x]
        })
        .collect();
    let field = periodogram(&panel_from(&values, n, 1, 2)).unwrap();
    let peak = n as f64 / (8.0 * PI);
    for k in field.grid().indices() {
        let v = field.at(k)[(0, 0)].re;
        if k.abs() == 1 {
            assert!((v - peak).abs() < 1e-12, "k = {k}: {v}");
        } else {
            assert!(v.abs() <= 1e-12, "k = {k}: {v}");
        }
    }
}

#[test]
fn block_matches_submatrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let field = symmetric_field(10, FieldKind::Smoothed, |_| random_hermitian(4, &mut rng));
    for a in 1..=2 {
        for b in 1..=2 {
            let blocks = block(&field, a, b, 2).unwrap();
            for (pos, m) in blocks.iter().enumerate() {
                let full = field.at_position(pos);
                for x in 0..2 {
                    for y in 0..2 {
                        assert_eq!(m[(x, y)], full[(2 * (a - 1) + x, 2 * (b - 1) + y)]);
                    }
                }
            }
        }
    }
    let b12 = block(&field, 1, 2, 2).unwrap();
    let b21 = block(&field, 2, 1, 2).unwrap();
    for (x, y) in b12.iter().zip(&b21) {
        assert!((x - y.adjoint()).norm() < 1e-14);
    }
    assert!(block(&field, 3, 1, 2).is_err());
    assert!(block(&field, 0, 1, 2).is_err());
}

#[test]
fn scalar_blocks_are_diagonal_entries() {
    let field = periodogram(&gaussian_panel(10, 1, 3, 1)).unwrap();
    let b = block(&field, 2, 2, 1).unwrap();
    for (pos, m) in b.iter().enumerate() {
        assert_eq!(m[(0, 0)], field.at_position(pos)[(1, 1)]);
    }
}

#[test]
fn pooled_diagonal_matches_mean_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (p, q) = (2, 3);
    let field = symmetric_field(9, FieldKind::Smoothed, |_| random_hermitian(p * q, &mut rng));
    let pooled = pooled_diagonal(&field, p, q).unwrap();
    for pos in 0..9 {
        let full = field.at_position(pos);
        for x in 0..p {
            for y in 0..p {
                let mean = (0..q).map(|j| full[(j * p + x, j * p + y)]).sum::<Complex64>() / q as f64;
                assert!((pooled.at_position(pos)[(x, y)] - mean).norm() < 1e-15);
            }
        }
    }
}

#[test]
fn pooled_diagonal_scalar_example() {
    let grid = fourier_frequencies(4).unwrap();
    let field = spectest::SpectralMatrixField::from_fn(grid, FieldKind::Periodogram, |_| {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::from(2.0), Complex64::from(4.0)]))
    })
    .unwrap();
    let pooled = pooled_diagonal(&field, 1, 2).unwrap();
    assert!(pooled.matrices().iter().all(|m| m[(0, 0)] == Complex64::from(3.0)));
}

#[test]
fn demean_examples() {
    let fives = panel_from(&[5.0; 20], 10, 1, 2);
    assert!(demean(&fives).data().iter().all(|x| *x == 0.0));

    let ramp = panel_from(&[1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0, 0.0], 4, 1, 2);
    let centered = demean(&ramp);
    let column: Vec<f64> = centered.data().column(0).iter().copied().collect();
    assert_eq!(column, vec![-1.5, -0.5, 0.5, 1.5]);

    let once = demean(&gaussian_panel(50, 1, 2, 4));
    let twice = demean(&once);
    for (a, b) in once.data().iter().zip(twice.data().iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    for col in once.data().column_iter() {
        assert!(col.mean().abs() < 1e-12);
    }
}

#[test]
fn panel_validation() {
    assert!(TimeSeriesPanel::new(DMatrix::zeros(3, 2), 1, 2).is_err());
    assert!(TimeSeriesPanel::new(DMatrix::zeros(10, 3), 1, 2).is_err());
    assert!(TimeSeriesPanel::new(DMatrix::zeros(10, 2), 2, 1).is_err());
    let mut data = DMatrix::zeros(10, 2);
    data[(3, 1)] = f64::NAN;
    assert!(TimeSeriesPanel::new(data, 1, 2).is_err());
}

#[test]
fn csv_round_trip_and_errors() {
    let panel = gaussian_panel(12, 2, 2, 9);
    let mut buffer = Vec::new();
    panel.write_csv(&mut buffer).unwrap();
    let back = TimeSeriesPanel::read_csv(buffer.as_slice(), 2, 2).unwrap();
    assert_eq!(back.data(), panel.data());

    let headerless = "1,2\n3,4\n5,6\n7,8\n";
    assert_eq!(TimeSeriesPanel::read_csv(headerless.as_bytes(), 1, 2).unwrap().n(), 4);

    let bad = "a,b\n1,2\n3,x\n5,6\n7,8\n";
    let err = TimeSeriesPanel::read_csv(bad.as_bytes(), 1, 2).unwrap_err().to_string();
    assert!(err.contains("row") && err.contains("column"), "{err}");
}

fn periodogram_checks(panel: &TimeSeriesPanel) {
    let field = periodogram(panel).unwrap();
    field.check_hermitian(1e-10).unwrap();
    field.check_conjugate_symmetry(1e-10).unwrap();
    field.check_psd(1e-10).unwrap();
    for m in field.matrices() {
        let trace: f64 = m.diagonal().iter().map(|z| z.re).sum();
        let eig = m.clone().symmetric_eigenvalues();
        let second = eig.iter().filter(|v| v.abs() > 1e-10 * trace.max(1e-300)).count();
        assert!(second <= 1, "periodogram matrix has rank {second}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dft_agrees_with_direct_sum(n in 4usize..24, q in 2usize..4, seed in any::<u64>()) {
        let panel = gaussian_panel(n, 1, q, seed);
        let grid = fourier_frequencies(n).unwrap();
        let fast = dft(&panel, &grid).unwrap();
        for (pos, k) in grid.indices().enumerate() {
            let slow = direct_dft(panel.data(), grid.omega(k));
            for c in 0..q {
                prop_assert!((fast[pos][c] - slow[c]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_identity(n in 4usize..64, p in 1usize..3, seed in any::<u64>()) {
        let panel = demean(&gaussian_panel(n, p, 2, seed));
        let field = periodogram(&panel).unwrap();
        let spectral: f64 = field.grid().weight()
            * field.matrices().iter().map(|m| m.diagonal().iter().map(|z| z.re).sum::<f64>()).sum::<f64>();
        let time: f64 = panel.data().iter().map(|x| x * x).sum::<f64>() / n as f64;
        prop_assert!(rel_diff(spectral, time) < 1e-10, "{} vs {}", spectral, time);
    }

    #[test]
    fn periodogram_is_quadratic_in_data(n in 4usize..40, c in -5.0f64..5.0, seed in any::<u64>()) {
        let panel = gaussian_panel(n, 1, 2, seed);
        let base = periodogram(&panel).unwrap();
        let scaled = periodogram(&panel.scaled(c)).unwrap();
        for (a, b) in base.matrices().iter().zip(scaled.matrices()) {
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x * c * c - y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }
    }

    #[test]
    fn periodogram_field_invariants(n in 4usize..40, p in 1usize..3, q in 2usize..4, seed in any::<u64>()) {
        periodogram_checks(&gaussian_panel(n, p, q, seed));
    }

    #[test]
    fn periodogram_matches_direct_oracle(n in 4usize..20, seed in any::<u64>()) {
        let panel = gaussian_panel(n, 1, 2, seed);
        let field = periodogram(&panel).unwrap();
        let slow = direct_periodogram(&demeaned(panel.data()));
        let fast_demeaned = periodogram(&demean(&panel)).unwrap();
        for (a, b) in fast_demeaned.matrices().iter().zip(&slow) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        prop_assert_eq!(field.len(), n);
    }
}
