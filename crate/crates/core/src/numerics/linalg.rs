//! Norms, symmetric eigendecomposition and dense linear solves.
//!
//! Tolerance tiers: 1e-8 for construction checks, 1e-10 for verification,
//! 1e-12 for iteration termination.

use crate::error::{Error, Result};

use super::Matrix;

pub const SYM_TOL: f64 = 1e-10;
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 10_000;
pub const PIVOT_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

impl Spectrum {
    pub fn reconstruct(&self) -> Matrix {
        let v = &self.eigenvectors;
        let vd = Matrix::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * self.eigenvalues[j]);
        vd.matmul_t(v).expect("square eigenvector matrix")
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Sum over columns of the Euclidean column norms (graph-signal size).
pub fn l21_norm(m: &Matrix) -> f64 {
    let mut col_sq = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (acc, v) in col_sq.iter_mut().zip(m.row(i)) {
            *acc += v * v;
        }
    }
    col_sq.iter().map(|s| s.sqrt()).sum()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eig(m: &Matrix) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::dim(
            "sym_eig",
            "square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let scale = m.frobenius();
    let asym = m.asymmetry();
    if asym > SYM_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = m.rows();
    let mut a = m.symmetrize();
    let mut v = Matrix::identity(n);
    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let threshold = JACOBI_TOL * scale.max(f64::MIN_POSITIVE);
    let mut converged = off(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                what: "Jacobi eigensolver",
                iterations: sweeps,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off(&a) <= threshold;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest singular value.
///
/// Symmetric input uses `max |λ|` directly; otherwise the eigenvalues of `MᵀM`.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    if m.is_square() && m.asymmetry() <= SYM_TOL * m.frobenius() {
        return Ok(sym_eig(m)?.max_abs());
    }
    let gram = if m.rows() >= m.cols() {
        m.t_matmul(m)?
    } else {
        m.matmul_t(m)?
    };
    Ok(sym_eig(&gram)?.max().max(0.0).sqrt())
}

/// Power iteration on `MᵀM`; falls back to the eigendecomposition path when
/// the iteration does not settle.
pub fn spectral_norm_power(m: &Matrix) -> Result<f64> {
    match power_iteration(m) {
        Some(v) => Ok(v),
        None => spectral_norm(m),
    }
}

fn power_iteration(m: &Matrix) -> Option<f64> {
    let gram = m.t_matmul(m).ok()?;
    let n = gram.rows();
    // deterministic non-degenerate start vector
    let mut x = Matrix::from_fn(n, 1, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
    let mut nx = x.frobenius();
    x = x.scale(1.0 / nx);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let y = gram.mul_unchecked(&x);
        nx = y.frobenius();
        if nx == 0.0 {
            return Some(0.0);
        }
        let next = nx;
        x = y.scale(1.0 / nx);
        if (next - lambda).abs() <= POWER_TOL * next {
            return Some(next.sqrt());
        }
        lambda = next;
    }
    None
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dim(
            "solve_linear",
            "square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    if rhs.rows() != m.rows() {
        return Err(Error::dim("solve_linear", m.rows(), rhs.rows()));
    }
    let n = m.rows();
    let k = rhs.cols();
    let mut a = m.clone();
    let mut b = rhs.clone();
    for col in 0..n {
        let (piv, pmag) =
            (col..n)
                .map(|r| (r, a[(r, col)].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pmag <= PIVOT_TOL {
            return Err(Error::Singular {
                pivot: pmag,
                column: col,
            });
        }
        if piv != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            for j in 0..k {
                let tmp = b[(col, j)];
                b[(col, j)] = b[(piv, j)];
                b[(piv, j)] = tmp;
            }
        }
        let d = a[(col, col)];
        for r in (col + 1)..n {
            let f = a[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[(r, j)] -= f * a[(col, j)];
            }
            for j in 0..k {
                b[(r, j)] -= f * b[(col, j)];
            }
        }
    }
    let mut x = Matrix::zeros(n, k);
    for j in 0..k {
        for i in (0..n).rev() {
            let mut s = b[(i, j)];
            for c in (i + 1)..n {
                s -= a[(i, c)] * x[(c, j)];
            }
            x[(i, j)] = s / a[(i, i)];
        }
    }
    Ok(x)
}

/// Symmetric PSD square root through the eigendecomposition.
pub fn sym_sqrt(m: &Matrix) -> Result<Matrix> {
    let sp = sym_eig(m)?;
    if sp.min() < -1e-8 * sp.max_abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "square root of an indefinite matrix (min eigenvalue {:.3e})",
            sp.min()
        )));
    }
    let roots: Vec<f64> = sp.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    Ok(Spectrum {
        eigenvalues: roots,
        eigenvectors: sp.eigenvectors,
    }
    .reconstruct())
}

/// Gelfand upper bound `‖Mᵏ‖₂^{1/k}` on the spectral radius.
pub fn spectral_radius_bound(m: &Matrix, k: u32) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::dim(
            "spectral_radius_bound",
            "square",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let mut p = m.clone();
    let mut log_scale = 0.0;
    for _ in 1..k {
        p = p.mul_unchecked(m);
        let s = p.max_abs();
        if s == 0.0 {
            return Ok(0.0);
        }
        p = p.scale(1.0 / s);
        log_scale += s.ln();
    }
    let norm = spectral_norm(&p)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(((norm.ln() + log_scale) / k as f64).exp())
}
