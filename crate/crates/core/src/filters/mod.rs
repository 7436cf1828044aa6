//! Polynomial (FIR) graph filters `Y = Σₖ SᵏXHₖ` and the spectral quantities
//! that bound them: frequency response, filter size `C_H` and Lipschitz
//! constant `Γ_H`.

pub mod poly;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{inf_norm, sym_eig, Matrix};

/// N×F matrix, one row per node.
pub type GraphSignal = Matrix;

/// Taps `H₀..H_K` (each F×G) and the spectral interval `[λ_l, λ_h]` on which
/// the frequency response is assessed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterBankRepr", into = "FilterBankRepr")]
pub struct FilterBank {
    taps: Vec<Matrix>,
    interval: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct FilterBankRepr {
    order: usize,
    in_dim: usize,
    out_dim: usize,
    interval: [f64; 2],
    taps: Vec<Matrix>,
}

impl TryFrom<FilterBankRepr> for FilterBank {
    type Error = Error;

    fn try_from(r: FilterBankRepr) -> Result<Self> {
        let fb = FilterBank::new(r.taps, (r.interval[0], r.interval[1]))?;
        if fb.order() != r.order || fb.in_dim() != r.in_dim || fb.out_dim() != r.out_dim {
            return Err(Error::dim(
                "FilterBank json",
                format!("order {} {}x{}", r.order, r.in_dim, r.out_dim),
                format!("order {} {}x{}", fb.order(), fb.in_dim(), fb.out_dim()),
            ));
        }
        Ok(fb)
    }
}

impl From<FilterBank> for FilterBankRepr {
    fn from(fb: FilterBank) -> Self {
        FilterBankRepr {
            order: fb.order(),
            in_dim: fb.in_dim(),
            out_dim: fb.out_dim(),
            interval: [fb.interval.0, fb.interval.1],
            taps: fb.taps,
        }
    }
}

impl FilterBank {
    pub fn new(taps: Vec<Matrix>, interval: (f64, f64)) -> Result<Self> {
        let first = taps
            .first()
            .ok_or_else(|| Error::Precondition("filter bank needs at least one tap".into()))?;
        let shape = first.shape();
        if let Some(bad) = taps.iter().find(|t| t.shape() != shape) {
            return Err(Error::dim(
                "FilterBank::new",
                format!("{shape:?}"),
                format!("{:?}", bad.shape()),
            ));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NotFinite("FilterBank::new"));
        }
        if !(interval.0 <= interval.1) {
            return Err(Error::Precondition(format!(
                "empty interval [{}, {}]",
                interval.0, interval.1
            )));
        }
        Ok(FilterBank { taps, interval })
    }

    /// Scalar filter with `taps[k]` as the 1×1 tap `H_k`.
    pub fn scalar(taps: &[f64], interval: (f64, f64)) -> Result<Self> {
        FilterBank::new(taps.iter().map(|&h| Matrix::scalar(h)).collect(), interval)
    }

    pub fn zeros(order: usize, in_dim: usize, out_dim: usize, interval: (f64, f64)) -> Self {
        FilterBank {
            taps: vec![Matrix::zeros(in_dim, out_dim); order + 1],
            interval,
        }
    }

    pub fn taps(&self) -> &[Matrix] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [Matrix] {
        &mut self.taps
    }

    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn in_dim(&self) -> usize {
        self.taps[0].rows()
    }

    pub fn out_dim(&self) -> usize {
        self.taps[0].cols()
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn with_interval(mut self, interval: (f64, f64)) -> Result<Self> {
        if !(interval.0 <= interval.1) {
            return Err(Error::Precondition(format!(
                "empty interval [{}, {}]",
                interval.0, interval.1
            )));
        }
        self.interval = interval;
        Ok(self)
    }

    pub fn n_params(&self) -> usize {
        self.taps.len() * self.in_dim() * self.out_dim()
    }

    /// Coefficients of `h_fg(λ) = Σₖ [Hₖ]_fg λᵏ`, ascending.
    pub fn coefficients(&self, f: usize, g: usize) -> Vec<f64> {
        self.taps.iter().map(|t| t[(f, g)]).collect()
    }
}

fn check_signal(fb: &FilterBank, s: &Matrix, x: &GraphSignal) -> Result<()> {
    if !s.is_square() {
        return Err(Error::dim(
            "apply_filter",
            "square support",
            format!("{:?}", s.shape()),
        ));
    }
    if x.rows() != s.rows() || x.cols() != fb.in_dim() {
        return Err(Error::dim(
            "apply_filter",
            format!("{}x{}", s.rows(), fb.in_dim()),
            format!("{}x{}", x.rows(), x.cols()),
        ));
    }
    Ok(())
}

/// `Σₖ Sᵏ X Hₖ` through the shift recursion `Z₀ = X, Zₖ = S Zₖ₋₁`.
pub fn apply_filter(fb: &FilterBank, s: &Matrix, x: &GraphSignal) -> Result<GraphSignal> {
    check_signal(fb, s, x)?;
    let mut z = x.clone();
    let mut y = z.mul_unchecked(&fb.taps[0]);
    for tap in &fb.taps[1..] {
        z = s.mul_unchecked(&z);
        y.axpy(1.0, &z.mul_unchecked(tap))?;
    }
    Ok(y)
}

/// Shifted signals `[X, SX, …, SᴷX]`, kept for the backward pass.
pub(crate) fn shifts(fb: &FilterBank, s: &Matrix, x: &GraphSignal) -> Result<Vec<Matrix>> {
    check_signal(fb, s, x)?;
    let mut out = Vec::with_capacity(fb.taps.len());
    out.push(x.clone());
    for k in 1..fb.taps.len() {
        let next = s.mul_unchecked(&out[k - 1]);
        out.push(next);
    }
    Ok(out)
}

pub(crate) fn combine_shifts(fb: &FilterBank, z: &[Matrix]) -> Matrix {
    let mut y = z[0].mul_unchecked(&fb.taps[0]);
    for (zk, tap) in z.iter().zip(&fb.taps).skip(1) {
        y.axpy(1.0, &zk.mul_unchecked(tap))
            .expect("congruent shapes");
    }
    y
}

/// Vector-Jacobian product of the filter. Accumulates `∂L/∂Hₖ = Zₖᵀ G` into
/// `tap_grads` and returns `∂L/∂X = Σₖ (Sᵀ)ᵏ G Hₖᵀ` (Horner form).
pub(crate) fn filter_backward(
    fb: &FilterBank,
    s: &Matrix,
    z: &[Matrix],
    grad_out: &Matrix,
    tap_grads: &mut [Matrix],
    need_input_grad: bool,
) -> Option<Matrix> {
    for ((gk, zk), _) in tap_grads.iter_mut().zip(z).zip(&fb.taps) {
        gk.axpy(1.0, &zk.t_matmul(grad_out).expect("shapes"))
            .expect("shapes");
    }
    if !need_input_grad {
        return None;
    }
    let k_max = fb.order();
    let mut w = grad_out.matmul_t(&fb.taps[k_max]).expect("shapes");
    for k in (0..k_max).rev() {
        let mut next = s.t_matmul(&w).expect("shapes");
        next.axpy(1.0, &grad_out.matmul_t(&fb.taps[k]).expect("shapes"))
            .expect("shapes");
        w = next;
    }
    Some(w)
}

/// `h_fg(λ)` by Horner evaluation.
pub fn freq_response(fb: &FilterBank, f: usize, g: usize, lambda: f64) -> Result<f64> {
    if f >= fb.in_dim() || g >= fb.out_dim() {
        return Err(Error::dim(
            "freq_response",
            format!("f < {}, g < {}", fb.in_dim(), fb.out_dim()),
            format!("f = {f}, g = {g}"),
        ));
    }
    Ok(poly::eval(&fb.coefficients(f, g), lambda))
}

/// Per-(f, g) maxima of `|h_fg|` (or `|h′_fg|`) over the interval with their
/// smallest maximising λ.
#[derive(Debug, Clone)]
pub struct ResponseExtrema {
    pub maxima: Matrix,
    pub argmax: Matrix,
}

impl ResponseExtrema {
    /// Infinity norm of `maxima` and the first row attaining it.
    pub fn norm_and_row(&self) -> (f64, usize) {
        let mut best = (-1.0, 0);
        for f in 0..self.maxima.rows() {
            let s: f64 = self.maxima.row(f).iter().sum();
            if s > best.0 {
                best = (s, f);
            }
        }
        best
    }
}

pub fn response_extrema(fb: &FilterBank, derivative: bool) -> ResponseExtrema {
    let (lo, hi) = fb.interval;
    let (fd, gd) = (fb.in_dim(), fb.out_dim());
    let mut maxima = Matrix::zeros(fd, gd);
    let mut argmax = Matrix::zeros(fd, gd);
    for f in 0..fd {
        for g in 0..gd {
            let mut c = fb.coefficients(f, g);
            if derivative {
                c = poly::derivative(&c);
            }
            let (m, at) = poly::max_abs_on(&c, lo, hi);
            maxima[(f, g)] = m;
            argmax[(f, g)] = at;
        }
    }
    ResponseExtrema { maxima, argmax }
}

/// `C_H = ‖C_H‖∞` with `[C_H]_fg = max_λ |h_fg(λ)|`.
pub fn filter_size(fb: &FilterBank) -> f64 {
    inf_norm(&response_extrema(fb, false).maxima)
}

/// `Γ_H = ‖Γ_H‖∞` with `γ_fg = max_λ |h′_fg(λ)|`.
pub fn filter_lipschitz(fb: &FilterBank) -> f64 {
    inf_norm(&response_extrema(fb, true).maxima)
}

/// Smallest interval containing every eigenvalue of every support.
pub fn default_interval(supports: &[&Matrix]) -> Result<(f64, f64)> {
    if supports.is_empty() {
        return Err(Error::Precondition(
            "default_interval needs at least one support".into(),
        ));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in supports {
        let sp = sym_eig(s)?;
        lo = lo.min(sp.min());
        hi = hi.max(sp.max());
    }
    Ok((lo, hi))
}
