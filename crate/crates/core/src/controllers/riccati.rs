use crate::error::{Error, Result};
use crate::numerics::{solve_linear, Matrix};

pub const DARE_TOL: f64 = 1e-11;
pub const DARE_MAX_ITERS: usize = 100_000;

/// Stabilising solution of the discrete algebraic Riccati equation with the
/// gain of the control law `u = −K* x`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p_mat: Matrix,
    pub gain: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

fn riccati_map(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    p: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let pa = p.matmul(a)?;
    let pb = p.matmul(b)?;
    let mut inner = b.t_matmul(&pb)?;
    inner.axpy(1.0, r)?;
    let gain = solve_linear(&inner, &b.t_matmul(&pa)?)?;
    let mut next = a.t_matmul(&pa)?;
    next.axpy(1.0, q)?;
    next.axpy(-1.0, &a.t_matmul(&pb)?.matmul(&gain)?)?;
    Ok((next.symmetrize(), gain))
}

/// `‖P − (Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA)‖_F / max(1, ‖P‖_F)`.
pub fn dare_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<f64> {
    let (next, _) = riccati_map(a, b, q, r, p)?;
    Ok((p - &next).frobenius() / p.frobenius().max(1.0))
}

/// Value iteration `P ← Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA` from `P₀ = Q`.
pub fn solve_dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<RiccatiSolution> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n || q.shape() != (n, n) || r.shape() != (b.cols(), b.cols()) {
        return Err(Error::dim(
            "solve_dare",
            format!("A {n}x{n}, B {n}xm, Q {n}x{n}, R mxm"),
            format!(
                "A {:?}, B {:?}, Q {:?}, R {:?}",
                a.shape(),
                b.shape(),
                q.shape(),
                r.shape()
            ),
        ));
    }
    let mut p = q.clone();
    for it in 1..=DARE_MAX_ITERS {
        let (next, _) = riccati_map(a, b, q, r, &p)?;
        let step = (&next - &p).frobenius();
        let scale = p.frobenius();
        if !next.is_finite() || !step.is_finite() || !scale.is_finite() {
            break;
        }
        p = next;
        if step <= DARE_TOL * scale {
            let (_, gain) = riccati_map(a, b, q, r, &p)?;
            let residual = dare_residual(a, b, q, r, &p)?;
            return Ok(RiccatiSolution {
                p_mat: p,
                gain,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "DARE value iteration",
        iterations: DARE_MAX_ITERS,
    })
}
