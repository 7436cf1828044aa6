//! The GNN controller `Φ(X; S, H)`: a cascade of graph filters with a
//! pointwise nonlinearity, its closed-loop gradient and the size/Lipschitz
//! penalties.

use serde::{Deserialize, Serialize};

use crate::controllers::{Controller, ControllerKind, Descriptor, Differentiable};
use crate::error::{Error, Result};
use crate::filters::{
    combine_shifts, filter_backward, filter_lipschitz, filter_size, response_extrema, shifts,
    FilterBank, GraphSignal,
};
use crate::network::{CostSpec, DistributedSystem};
use crate::numerics::{Matrix, RngStream};
use crate::simulation;

/// Pointwise nonlinearity. All variants satisfy `σ(0) = 0`, `|σ(x)| ≤ |x|`
/// and are 1-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Tanh,
    Identity,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y = σ(x)`.
    #[inline]
    fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => 1.0 - y * y,
            Nonlinearity::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub features: usize,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GnnParamsRepr", into = "GnnParamsRepr")]
pub struct GnnParams {
    layers: Vec<FilterBank>,
    nonlinearity: Nonlinearity,
    apply_nonlin_on_last: bool,
}

#[derive(Serialize, Deserialize)]
struct GnnParamsRepr {
    nonlinearity: Nonlinearity,
    apply_nonlin_on_last: bool,
    layers: Vec<FilterBank>,
}

impl TryFrom<GnnParamsRepr> for GnnParams {
    type Error = Error;

    fn try_from(r: GnnParamsRepr) -> Result<Self> {
        GnnParams::new(r.layers, r.nonlinearity, r.apply_nonlin_on_last)
    }
}

impl From<GnnParams> for GnnParamsRepr {
    fn from(p: GnnParams) -> Self {
        GnnParamsRepr {
            nonlinearity: p.nonlinearity,
            apply_nonlin_on_last: p.apply_nonlin_on_last,
            layers: p.layers,
        }
    }
}

impl GnnParams {
    pub fn new(
        layers: Vec<FilterBank>,
        nonlinearity: Nonlinearity,
        apply_nonlin_on_last: bool,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Precondition("a GNN needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::dim("GnnParams::new", w[0].out_dim(), w[1].in_dim()));
            }
        }
        Ok(GnnParams {
            layers,
            nonlinearity,
            apply_nonlin_on_last,
        })
    }

    /// Taps uniform on `±(F_{ℓ−1}(K_ℓ+1))^{-1/2}`.
    pub fn init(
        in_dim: usize,
        arch: &[LayerSpec],
        nonlinearity: Nonlinearity,
        interval: (f64, f64),
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(arch.len());
        let mut f_prev = in_dim;
        for spec in arch {
            let bound = 1.0 / ((f_prev * (spec.order + 1)) as f64).sqrt();
            let taps = (0..=spec.order)
                .map(|_| rng.uniform_matrix(f_prev, spec.features, bound))
                .collect();
            layers.push(FilterBank::new(taps, interval)?);
            f_prev = spec.features;
        }
        GnnParams::new(layers, nonlinearity, false)
    }

    pub fn layers(&self) -> &[FilterBank] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [FilterBank] {
        &mut self.layers
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn apply_nonlin_on_last(&self) -> bool {
        self.apply_nonlin_on_last
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(FilterBank::n_params).sum()
    }

    pub fn architecture(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| LayerSpec {
                features: l.out_dim(),
                order: l.order(),
            })
            .collect()
    }

    /// Same taps with every layer's spectral interval replaced.
    pub fn with_interval(&self, interval: (f64, f64)) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .map(|l| l.clone().with_interval(interval))
            .collect::<Result<_>>()?;
        GnnParams::new(layers, self.nonlinearity, self.apply_nonlin_on_last)
    }

    fn activates(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.apply_nonlin_on_last
    }

    /// `C_Φ = Π_ℓ C_{H_ℓ}`.
    pub fn size_product(&self) -> f64 {
        self.layers.iter().map(filter_size).product()
    }

    /// `Γ_Φ = Σ_ℓ Γ_{H_ℓ} / C_{H_ℓ}`; zero-size layers contribute nothing.
    pub fn lipschitz_ratio_sum(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                let c = filter_size(l);
                if c > 0.0 {
                    filter_lipschitz(l) / c
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            for t in l.taps() {
                out.extend_from_slice(t.as_slice());
            }
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::dim(
                "GnnParams::set_flat",
                self.n_params(),
                flat.len(),
            ));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            for t in l.taps_mut() {
                let len = t.as_slice().len();
                t.as_mut_slice()
                    .copy_from_slice(&flat[offset..offset + len]);
                offset += len;
            }
        }
        Ok(())
    }
}

/// Gradient congruent with a [`GnnParams`]: one matrix per layer and tap.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnGradient {
    pub layers: Vec<Vec<Matrix>>,
}

impl GnnGradient {
    pub fn zeros_like(p: &GnnParams) -> Self {
        GnnGradient {
            layers: p
                .layers
                .iter()
                .map(|l| {
                    l.taps()
                        .iter()
                        .map(|t| Matrix::zeros(t.rows(), t.cols()))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_flat(p: &GnnParams, flat: &[f64]) -> Result<Self> {
        if flat.len() != p.n_params() {
            return Err(Error::dim(
                "GnnGradient::from_flat",
                p.n_params(),
                flat.len(),
            ));
        }
        let mut g = GnnGradient::zeros_like(p);
        let mut offset = 0;
        for l in &mut g.layers {
            for t in l {
                let len = t.as_slice().len();
                t.as_mut_slice()
                    .copy_from_slice(&flat[offset..offset + len]);
                offset += len;
            }
        }
        Ok(g)
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.iter().flat_map(|t| t.as_slice().iter().copied()))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.iter().all(Matrix::is_finite))
    }
}

/// Per-layer intermediates of a forward pass.
#[derive(Debug, Clone)]
pub struct GnnTape {
    shifts: Vec<Vec<Matrix>>,
    outputs: Vec<Matrix>,
}

pub fn gnn_forward(p: &GnnParams, s: &Matrix, x: &GraphSignal) -> Result<GraphSignal> {
    Ok(gnn_forward_tape(p, s, x)?.0)
}

pub fn gnn_forward_tape(
    p: &GnnParams,
    s: &Matrix,
    x: &GraphSignal,
) -> Result<(GraphSignal, GnnTape)> {
    let mut tape = GnnTape {
        shifts: Vec::with_capacity(p.layers.len()),
        outputs: Vec::with_capacity(p.layers.len()),
    };
    let mut h = x.clone();
    for (l, fb) in p.layers.iter().enumerate() {
        let z = shifts(fb, s, &h)?;
        let mut y = combine_shifts(fb, &z);
        if p.activates(l) {
            let sigma = p.nonlinearity;
            y = y.map(|v| sigma.apply(v));
        }
        tape.shifts.push(z);
        tape.outputs.push(y.clone());
        h = y;
    }
    Ok((h, tape))
}

/// Backward pass through the cascade; accumulates tap gradients and returns `∂L/∂X`.
pub fn gnn_backward(
    p: &GnnParams,
    s: &Matrix,
    tape: &GnnTape,
    grad_out: &Matrix,
    grad: &mut GnnGradient,
) -> Matrix {
    let mut g = grad_out.clone();
    for l in (0..p.layers.len()).rev() {
        if p.activates(l) {
            let sigma = p.nonlinearity;
            g = g
                .zip_map(&tape.outputs[l], |gv, y| gv * sigma.slope_from_output(y))
                .expect("shapes");
        }
        g = filter_backward(
            &p.layers[l],
            s,
            &tape.shifts[l],
            &g,
            &mut grad.layers[l],
            true,
        )
        .expect("input gradient requested");
    }
    g
}

/// Loss `Σ_{t<T} ‖X(t)Q̄^{1/2}‖²_F + ‖U(t)R̄^{1/2}‖²_F` along the closed loop
/// with `U(t) = Φ(X(t); S, H)` and its exact gradient with respect to the taps.
pub fn closed_loop_gradient(
    p: &GnnParams,
    d: &DistributedSystem,
    cost: &CostSpec,
    x0: &GraphSignal,
    horizon: usize,
) -> Result<(f64, GnnGradient)> {
    let ctrl = GnnController::new(p.clone(), ControllerKind::Gnn);
    let (loss, flat) = simulation::closed_loop_gradient(&ctrl, d, cost, x0, horizon)?;
    Ok((loss, GnnGradient::from_flat(p, &flat)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    Size,
    Lipschitz,
    Both,
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PenaltyKind::None),
            "size" => Ok(PenaltyKind::Size),
            "lipschitz" => Ok(PenaltyKind::Lipschitz),
            "both" => Ok(PenaltyKind::Both),
            other => Err(Error::Config(format!("unknown penalty '{other}'"))),
        }
    }
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyKind::None => "none",
            PenaltyKind::Size => "size",
            PenaltyKind::Lipschitz => "lipschitz",
            PenaltyKind::Both => "both",
        })
    }
}

/// Subgradient of `C_H` (or `Γ_H` when `derivative`) with respect to the taps,
/// fixing the maximising row and spectral points.
fn layer_extreme_subgradient(fb: &FilterBank, derivative: bool) -> (f64, Vec<Matrix>) {
    let ext = response_extrema(fb, derivative);
    let (value, row) = ext.norm_and_row();
    let mut grads: Vec<Matrix> = fb
        .taps()
        .iter()
        .map(|t| Matrix::zeros(t.rows(), t.cols()))
        .collect();
    for g in 0..fb.out_dim() {
        let lam = ext.argmax[(row, g)];
        let coeffs = fb.coefficients(row, g);
        let (val, basis): (f64, Box<dyn Fn(usize) -> f64>) = if derivative {
            let dc = crate::filters::poly::derivative(&coeffs);
            (
                crate::filters::poly::eval(&dc, lam),
                Box::new(move |k: usize| {
                    if k == 0 {
                        0.0
                    } else {
                        k as f64 * lam.powi(k as i32 - 1)
                    }
                }),
            )
        } else {
            (
                crate::filters::poly::eval(&coeffs, lam),
                Box::new(move |k: usize| lam.powi(k as i32)),
            )
        };
        let sign = if val > 0.0 {
            1.0
        } else if val < 0.0 {
            -1.0
        } else {
            0.0
        };
        for (k, gk) in grads.iter_mut().enumerate() {
            gk[(row, g)] = sign * basis(k);
        }
    }
    (value, grads)
}

/// Penalty value and subgradient: `C_Φ` for `Size`, `Σ_ℓ Γ_{H_ℓ}` for
/// `Lipschitz`, and `0.5 (Σ_ℓ Γ_{H_ℓ} + C_Φ)` for `Both`.
pub fn penalty_and_gradient(p: &GnnParams, kind: PenaltyKind) -> (f64, GnnGradient) {
    let mut grad = GnnGradient::zeros_like(p);
    let (w_size, w_lip) = match kind {
        PenaltyKind::None => return (0.0, grad),
        PenaltyKind::Size => (1.0, 0.0),
        PenaltyKind::Lipschitz => (0.0, 1.0),
        PenaltyKind::Both => (0.5, 0.5),
    };
    let mut value = 0.0;
    if w_size > 0.0 {
        let parts: Vec<(f64, Vec<Matrix>)> = p
            .layers
            .iter()
            .map(|l| layer_extreme_subgradient(l, false))
            .collect();
        let c_phi: f64 = parts.iter().map(|(c, _)| c).product();
        value += w_size * c_phi;
        for (l, (_, g)) in parts.iter().enumerate() {
            let others: f64 = parts
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != l)
                .map(|(_, (c, _))| c)
                .product();
            for (dst, src) in grad.layers[l].iter_mut().zip(g) {
                dst.axpy(w_size * others, src).expect("congruent");
            }
        }
    }
    if w_lip > 0.0 {
        for (l, fb) in p.layers.iter().enumerate() {
            let (gamma, g) = layer_extreme_subgradient(fb, true);
            value += w_lip * gamma;
            for (dst, src) in grad.layers[l].iter_mut().zip(&g) {
                dst.axpy(w_lip, src).expect("congruent");
            }
        }
    }
    (value, grad)
}

/// GNN (or linear graph filter) wrapped as a controller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GnnController {
    pub kind: ControllerKind,
    pub params: GnnParams,
}

impl GnnController {
    pub fn new(params: GnnParams, kind: ControllerKind) -> Self {
        GnnController { kind, params }
    }
}

impl Controller for GnnController {
    fn evaluate(&self, state: &GraphSignal, support: &Matrix) -> Result<GraphSignal> {
        gnn_forward(&self.params, support, state)
    }

    fn descriptor(&self) -> Descriptor {
        let arch = self
            .params
            .architecture()
            .iter()
            .map(|l| format!("F={} K={}", l.features, l.order))
            .collect::<Vec<_>>()
            .join(" -> ");
        Descriptor {
            kind: self.kind,
            hyperparameters: format!("{arch}; sigma={:?}", self.params.nonlinearity),
            n_params: self.params.n_params(),
        }
    }
}

impl Differentiable for GnnController {
    type Tape = GnnTape;

    fn params(&self) -> Vec<f64> {
        self.params.flat()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        self.params.set_flat(flat)
    }

    fn n_params(&self) -> usize {
        self.params.n_params()
    }

    fn forward_tape(
        &self,
        state: &GraphSignal,
        support: &Matrix,
    ) -> Result<(GraphSignal, GnnTape)> {
        gnn_forward_tape(&self.params, support, state)
    }

    fn backward(
        &self,
        support: &Matrix,
        tape: &GnnTape,
        grad_u: &Matrix,
        grad_params: &mut [f64],
    ) -> Matrix {
        let mut g = GnnGradient::zeros_like(&self.params);
        let gx = gnn_backward(&self.params, support, tape, grad_u, &mut g);
        for (dst, src) in grad_params.iter_mut().zip(g.flat()) {
            *dst += src;
        }
        gx
    }

    fn penalty(&self, kind: PenaltyKind) -> (f64, Vec<f64>) {
        let (v, g) = penalty_and_gradient(&self.params, kind);
        (v, g.flat())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_gives_zero_output() {
        let mut rng = RngStream::new(3, 0);
        let arch = [
            LayerSpec {
                features: 4,
                order: 2,
            },
            LayerSpec {
                features: 1,
                order: 0,
            },
        ];
        let p = GnnParams::init(1, &arch, Nonlinearity::Tanh, (-1.0, 1.0), &mut rng).unwrap();
        let s = Matrix::from_fn(5, 5, |i, j| if i.abs_diff(j) == 1 { 0.5 } else { 0.0 });
        let y = gnn_forward(&p, &s, &Matrix::zeros(5, 1)).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_identity_layer_is_pointwise_tanh() {
        let fb = FilterBank::new(vec![Matrix::identity(2)], (-1.0, 1.0)).unwrap();
        let p = GnnParams::new(vec![fb], Nonlinearity::Tanh, true).unwrap();
        let x = Matrix::from_fn(3, 2, |i, j| i as f64 - j as f64 * 0.7);
        let s = Matrix::identity(3).scale(0.3);
        let y = gnn_forward(&p, &s, &x).unwrap();
        assert_eq!(y, x.map(f64::tanh));
    }

    #[test]
    fn chained_dims_are_checked() {
        let a = FilterBank::zeros(1, 1, 3, (-1.0, 1.0));
        let b = FilterBank::zeros(0, 2, 1, (-1.0, 1.0));
        assert!(GnnParams::new(vec![a, b], Nonlinearity::Tanh, false).is_err());
    }

    #[test]
    fn parameter_count_follows_tap_convention() {
        let mut rng = RngStream::new(3, 0);
        let arch = [
            LayerSpec {
                features: 16,
                order: 4,
            },
            LayerSpec {
                features: 1,
                order: 0,
            },
        ];
        let p = GnnParams::init(1, &arch, Nonlinearity::Tanh, (-1.0, 1.0), &mut rng).unwrap();
        assert_eq!(p.n_params(), 5 * 16 + 16);
    }

    #[test]
    fn constant_scalar_penalties() {
        let fb = FilterBank::scalar(&[-0.4], (-1.0, 1.0)).unwrap();
        let p = GnnParams::new(vec![fb], Nonlinearity::Tanh, false).unwrap();
        let (v, g) = penalty_and_gradient(&p, PenaltyKind::Size);
        assert!((v - 0.4).abs() < 1e-15);
        assert_eq!(g.flat(), vec![-1.0]);
        let (v, g) = penalty_and_gradient(&p, PenaltyKind::Lipschitz);
        assert_eq!(v, 0.0);
        assert_eq!(g.flat(), vec![0.0]);
    }

    #[test]
    fn flat_roundtrip() {
        let mut rng = RngStream::new(9, 0);
        let arch = [
            LayerSpec {
                features: 3,
                order: 2,
            },
            LayerSpec {
                features: 1,
                order: 1,
            },
        ];
        let mut p = GnnParams::init(1, &arch, Nonlinearity::Tanh, (-1.0, 1.0), &mut rng).unwrap();
        let f = p.flat();
        let doubled: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
        p.set_flat(&doubled).unwrap();
        assert_eq!(p.flat(), doubled);
        assert!(p.set_flat(&f[1..]).is_err());
    }
}
