use gnnctl::numerics::{
    inf_norm, l21_norm, solve_linear, spectral_norm, spectral_norm_power, sym_eig,
};
use gnnctl::{Matrix, RngStream};
use proptest::prelude::*;

/// Singular values by one-sided Jacobi rotations on the columns.
fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|x| x * x).sum();
                let beta: f64 = a[q].iter().map(|x| x * x).sum();
                let gamma: f64 = (0..rows).map(|i| a[p][i] * a[q][i]).sum();
                if gamma.abs() <= 1e-300 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[p][i], a[q][i]);
                    a[p][i] = c * x - s * y;
                    a[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = a
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

fn random_symmetric(rng: &mut RngStream, n: usize) -> Matrix {
    let m = rng.normal_matrix(n, n);
    (&m + &m.transpose()).scale(0.5)
}

#[test]
fn spectral_norm_trivial_cases() {
    assert!((spectral_norm(&Matrix::from_diag(&[1.0, -3.0, 2.0])).unwrap() - 3.0).abs() < 1e-12);
    for n in [1, 4, 9] {
        assert!((spectral_norm(&Matrix::identity(n)).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn spectral_norm_matches_jacobi_svd() {
    let mut rng = RngStream::new(11, 0);
    for _ in 0..20 {
        let m = rng.normal_matrix(5, 5);
        let oracle = jacobi_singular_values(&m)[0];
        assert!((spectral_norm(&m).unwrap() - oracle).abs() < 1e-9 * oracle.max(1.0));
        assert!((spectral_norm_power(&m).unwrap() - oracle).abs() < 1e-8 * oracle.max(1.0));
    }
    let rect = rng.normal_matrix(7, 3);
    let oracle = jacobi_singular_values(&rect)[0];
    assert!((spectral_norm(&rect).unwrap() - oracle).abs() < 1e-9 * oracle);
}

#[test]
fn inf_and_l21_examples() {
    let m = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 0.0]]).unwrap();
    assert_eq!(inf_norm(&m), 3.0);
    assert_eq!(inf_norm(&Matrix::identity(4)), 1.0);
    assert_eq!(inf_norm(&Matrix::scalar(-2.5)), 2.5);
    let m = Matrix::from_rows(&[vec![3.0, 0.0], vec![4.0, 0.0]]).unwrap();
    assert_eq!(l21_norm(&m), 5.0);
    let v = Matrix::column_vector(&[1.0, 2.0, 2.0]);
    assert!((l21_norm(&v) - 3.0).abs() < 1e-15);
}

#[test]
fn l21_matches_entrywise_sum() {
    let mut rng = RngStream::new(3, 0);
    let m = rng.normal_matrix(6, 3);
    let mut oracle = 0.0;
    for j in 0..3 {
        let mut ss = 0.0;
        for i in 0..6 {
            ss += m[(i, j)] * m[(i, j)];
        }
        oracle += ss.sqrt();
    }
    assert!((l21_norm(&m) - oracle).abs() < 1e-14);
}

#[test]
fn sym_eig_small_analytic() {
    let sp = sym_eig(&Matrix::from_diag(&[2.0, -1.0])).unwrap();
    assert_eq!(sp.eigenvalues, vec![-1.0, 2.0]);
    assert!((sp.eigenvectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
    assert!((sp.eigenvectors[(0, 1)].abs() - 1.0).abs() < 1e-15);

    let sp = sym_eig(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
    assert!((sp.eigenvalues[0] + 1.0).abs() < 1e-14 && (sp.eigenvalues[1] - 1.0).abs() < 1e-14);
    let h = 0.5_f64.sqrt();
    let v = &sp.eigenvectors;
    assert!(
        (v[(0, 0)] * v[(1, 0)] + h * h).abs() < 1e-14,
        "first vector ∝ (1, -1)"
    );
    assert!(
        (v[(0, 1)] * v[(1, 1)] - h * h).abs() < 1e-14,
        "second vector ∝ (1, 1)"
    );
}

#[test]
fn sym_eig_rejects_asymmetric() {
    let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    assert!(sym_eig(&m).is_err());
}

#[test]
fn solve_linear_cases() {
    let mut rng = RngStream::new(5, 0);
    let rhs = rng.normal_matrix(4, 2);
    assert_eq!(solve_linear(&Matrix::identity(4), &rhs).unwrap(), rhs);
    let half = solve_linear(&Matrix::identity(4).scale(2.0), &rhs).unwrap();
    assert!((&half - &rhs.scale(0.5)).max_abs() < 1e-15);

    let m = &rng.normal_matrix(10, 10) + &Matrix::identity(10).scale(5.0);
    let b = rng.normal_matrix(10, 3);
    let x = solve_linear(&m, &b).unwrap();
    let resid = (&m.matmul(&x).unwrap() - &b).frobenius();
    assert!(resid <= 1e-8 * (m.frobenius() * x.frobenius() + b.frobenius()));

    let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
    assert!(solve_linear(&singular, &Matrix::column_vector(&[1.0, 1.0])).is_err());
}

#[test]
fn rng_streams_are_reproducible_and_distinct() {
    let draw = |seed, stream| {
        let mut r = RngStream::new(seed, stream);
        (0..64).map(|_| r.next_u64()).collect::<Vec<_>>()
    };
    assert_eq!(draw(7, 3), draw(7, 3));
    assert_ne!(draw(7, 3), draw(7, 4));
    assert_ne!(draw(7, 3), draw(8, 3));
    let root = RngStream::new(1, 0);
    let mut a = root.fork(2, 5);
    let mut b = root.fork(2, 5);
    assert_eq!(a.next_u64(), b.next_u64());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_norm_is_absolutely_homogeneous(seed in any::<u64>(), alpha in -10.0..10.0f64, n in 1usize..7) {
        let m = RngStream::new(seed, 0).normal_matrix(n, n);
        let lhs = spectral_norm(&m.scale(alpha)).unwrap();
        let rhs = alpha.abs() * spectral_norm(&m).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300) + 1e-300);
    }

    #[test]
    fn spectral_norm_triangle(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = RngStream::new(seed, 0);
        let (a, b) = (rng.normal_matrix(n, n), rng.normal_matrix(n, n));
        prop_assert!(spectral_norm(&(&a + &b)).unwrap() <= spectral_norm(&a).unwrap() + spectral_norm(&b).unwrap() + 1e-10);
    }

    #[test]
    fn l21_is_row_permutation_invariant(seed in any::<u64>(), n in 1usize..10, f in 1usize..4) {
        let mut rng = RngStream::new(seed, 0);
        let m = rng.normal_matrix(n, f);
        let perm = rng.permutation(n);
        // equal up to the rounding of a reordered sum
        let (a, b) = (l21_norm(&m.permute_rows(&perm)), l21_norm(&m));
        prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
    }

    #[test]
    fn sym_eig_reconstructs(seed in any::<u64>(), n in 1usize..10) {
        let m = random_symmetric(&mut RngStream::new(seed, 0), n);
        let sp = sym_eig(&m).unwrap();
        let v = &sp.eigenvectors;
        let orth = (&v.t_matmul(v).unwrap() - &Matrix::identity(n)).frobenius();
        prop_assert!(orth <= 1e-8);
        prop_assert!((&sp.reconstruct() - &m).frobenius() <= 1e-8 * m.frobenius().max(1e-300));
        prop_assert!(sp.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}
