use serde::{Deserialize, Serialize};

use super::{Controller, ControllerKind, Descriptor, Differentiable};
use crate::error::{Error, Result};
use crate::filters::GraphSignal;
use crate::numerics::{Matrix, RngStream};

/// Centralized perceptron `vec(X) → tanh(W₁ vec(X)) → W₂ h`, no biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpController {
    pub n_nodes: usize,
    pub w1: Matrix,
    pub w2: Matrix,
}

#[derive(Debug, Clone)]
pub struct MlpTape {
    x: Matrix,
    h: Matrix,
}

impl MlpController {
    /// `N → N·hidden_factor → N` with taps uniform on `±fan_in^{-1/2}`.
    pub fn init(n: usize, hidden_factor: usize, rng: &mut RngStream) -> Result<Self> {
        if n == 0 || hidden_factor == 0 {
            return Err(Error::Precondition(
                "MLP needs n >= 1 and hidden_factor >= 1".into(),
            ));
        }
        let hidden = n * hidden_factor;
        let w1 = rng.uniform_matrix(hidden, n, 1.0 / (n as f64).sqrt());
        let w2 = rng.uniform_matrix(n, hidden, 1.0 / (hidden as f64).sqrt());
        Ok(MlpController { n_nodes: n, w1, w2 })
    }

    fn check(&self, state: &GraphSignal) -> Result<()> {
        if state.shape() != (self.n_nodes, 1) {
            return Err(Error::dim(
                "MlpController",
                format!("{}x1", self.n_nodes),
                format!("{:?}", state.shape()),
            ));
        }
        Ok(())
    }
}

impl Controller for MlpController {
    fn evaluate(&self, state: &GraphSignal, support: &Matrix) -> Result<GraphSignal> {
        Ok(self.forward_tape(state, support)?.0)
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            kind: ControllerKind::Mlp,
            hyperparameters: format!("N={} hidden={}", self.n_nodes, self.w1.rows()),
            n_params: Differentiable::n_params(self),
        }
    }
}

impl Differentiable for MlpController {
    type Tape = MlpTape;

    fn params(&self) -> Vec<f64> {
        [self.w1.as_slice(), self.w2.as_slice()].concat()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let n1 = self.w1.as_slice().len();
        if flat.len() != Differentiable::n_params(self) {
            return Err(Error::dim(
                "MlpController::set_params",
                Differentiable::n_params(self),
                flat.len(),
            ));
        }
        self.w1.as_mut_slice().copy_from_slice(&flat[..n1]);
        self.w2.as_mut_slice().copy_from_slice(&flat[n1..]);
        Ok(())
    }

    fn n_params(&self) -> usize {
        self.w1.as_slice().len() + self.w2.as_slice().len()
    }

    fn forward_tape(
        &self,
        state: &GraphSignal,
        _support: &Matrix,
    ) -> Result<(GraphSignal, MlpTape)> {
        self.check(state)?;
        let h = self.w1.mul_unchecked(state).map(f64::tanh);
        let u = self.w2.mul_unchecked(&h);
        Ok((
            u,
            MlpTape {
                x: state.clone(),
                h,
            },
        ))
    }

    fn backward(
        &self,
        _support: &Matrix,
        tape: &MlpTape,
        grad_u: &Matrix,
        grad_params: &mut [f64],
    ) -> Matrix {
        let (g1, g2) = grad_params.split_at_mut(self.w1.as_slice().len());
        let hidden = self.w1.rows();
        let n = self.n_nodes;
        for i in 0..n {
            let gu = grad_u[(i, 0)];
            for k in 0..hidden {
                g2[i * hidden + k] += gu * tape.h[(k, 0)];
            }
        }
        let gh = self.w2.t_matmul(grad_u).expect("shapes");
        let gpre = gh
            .zip_map(&tape.h, |g, h| g * (1.0 - h * h))
            .expect("shapes");
        for k in 0..hidden {
            let gp = gpre[(k, 0)];
            if gp == 0.0 {
                continue;
            }
            for j in 0..n {
                g1[k * n + j] += gp * tape.x[(j, 0)];
            }
        }
        self.w1.t_matmul(&gpre).expect("shapes")
    }
}

/// One small perceptron per node fed with its own state and the mean of its
/// one-hop neighbours' states; no weight sharing, no biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlpController {
    pub n_nodes: usize,
    pub hidden: usize,
    /// Row `i`: node `i`'s hidden weights, `[w_self, w_neigh]` per unit.
    pub w1: Matrix,
    /// Row `i`: node `i`'s readout weights.
    pub w2: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone)]
pub struct DmlpTape {
    x: Matrix,
    mean: Vec<f64>,
    h: Matrix,
    neighbors: Vec<Vec<usize>>,
}

/// Off-diagonal nonzeros of the support, per row.
pub(crate) fn support_neighbors(s: &Matrix) -> Vec<Vec<usize>> {
    (0..s.rows())
        .map(|i| {
            (0..s.cols())
                .filter(|&j| j != i && s[(i, j)] != 0.0)
                .collect()
        })
        .collect()
}

impl DmlpController {
    pub fn init(n: usize, hidden: usize, rng: &mut RngStream) -> Result<Self> {
        if n == 0 || hidden == 0 {
            return Err(Error::Precondition(
                "D-MLP needs n >= 1 and hidden >= 1".into(),
            ));
        }
        Ok(DmlpController {
            n_nodes: n,
            hidden,
            w1: rng.uniform_matrix(n, 2 * hidden, 1.0 / 2.0_f64.sqrt()),
            w2: rng.uniform_matrix(n, hidden, 1.0 / (hidden as f64).sqrt()),
            positions: None,
        })
    }

    pub fn with_positions(mut self, positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.len() != self.n_nodes {
            return Err(Error::dim(
                "DmlpController::with_positions",
                self.n_nodes,
                positions.len(),
            ));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    /// Replicates per-node weights onto a new node set: each new node copies
    /// the weights of the positionally nearest training node.
    pub fn transfer(&self, new_positions: &[[f64; 2]]) -> Result<Self> {
        let own = self.positions.as_ref().ok_or_else(|| {
            Error::Precondition("D-MLP transfer needs training-node positions".into())
        })?;
        let nearest = |p: &[f64; 2]| -> usize {
            let mut best = (f64::INFINITY, 0);
            for (i, q) in own.iter().enumerate() {
                let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                if d < best.0 {
                    best = (d, i);
                }
            }
            best.1
        };
        let src: Vec<usize> = new_positions.iter().map(nearest).collect();
        let m = new_positions.len();
        Ok(DmlpController {
            n_nodes: m,
            hidden: self.hidden,
            w1: Matrix::from_fn(m, 2 * self.hidden, |i, j| self.w1[(src[i], j)]),
            w2: Matrix::from_fn(m, self.hidden, |i, j| self.w2[(src[i], j)]),
            positions: Some(new_positions.to_vec()),
        })
    }
}

impl Controller for DmlpController {
    fn evaluate(&self, state: &GraphSignal, support: &Matrix) -> Result<GraphSignal> {
        Ok(self.forward_tape(state, support)?.0)
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            kind: ControllerKind::Dmlp,
            hyperparameters: format!(
                "N={} hidden={} inputs=(own, neighbour mean)",
                self.n_nodes, self.hidden
            ),
            n_params: Differentiable::n_params(self),
        }
    }
}

impl Differentiable for DmlpController {
    type Tape = DmlpTape;

    fn params(&self) -> Vec<f64> {
        [self.w1.as_slice(), self.w2.as_slice()].concat()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let n1 = self.w1.as_slice().len();
        if flat.len() != Differentiable::n_params(self) {
            return Err(Error::dim(
                "DmlpController::set_params",
                Differentiable::n_params(self),
                flat.len(),
            ));
        }
        self.w1.as_mut_slice().copy_from_slice(&flat[..n1]);
        self.w2.as_mut_slice().copy_from_slice(&flat[n1..]);
        Ok(())
    }

    fn n_params(&self) -> usize {
        self.w1.as_slice().len() + self.w2.as_slice().len()
    }

    fn forward_tape(
        &self,
        state: &GraphSignal,
        support: &Matrix,
    ) -> Result<(GraphSignal, DmlpTape)> {
        if state.shape() != (self.n_nodes, 1) || support.shape() != (self.n_nodes, self.n_nodes) {
            return Err(Error::dim(
                "DmlpController",
                format!(
                    "{}x1 state on {}x{} support",
                    self.n_nodes, self.n_nodes, self.n_nodes
                ),
                format!("{:?} state on {:?} support", state.shape(), support.shape()),
            ));
        }
        let neighbors = support_neighbors(support);
        let mean: Vec<f64> = neighbors
            .iter()
            .map(|nb| {
                if nb.is_empty() {
                    0.0
                } else {
                    nb.iter().map(|&j| state[(j, 0)]).sum::<f64>() / nb.len() as f64
                }
            })
            .collect();
        let hd = self.hidden;
        let mut h = Matrix::zeros(self.n_nodes, hd);
        let mut u = Matrix::zeros(self.n_nodes, 1);
        for i in 0..self.n_nodes {
            let xi = state[(i, 0)];
            let mut acc = 0.0;
            for k in 0..hd {
                let v = (self.w1[(i, 2 * k)] * xi + self.w1[(i, 2 * k + 1)] * mean[i]).tanh();
                h[(i, k)] = v;
                acc += self.w2[(i, k)] * v;
            }
            u[(i, 0)] = acc;
        }
        Ok((
            u,
            DmlpTape {
                x: state.clone(),
                mean,
                h,
                neighbors,
            },
        ))
    }

    fn backward(
        &self,
        _support: &Matrix,
        tape: &DmlpTape,
        grad_u: &Matrix,
        grad_params: &mut [f64],
    ) -> Matrix {
        let hd = self.hidden;
        let (g1, g2) = grad_params.split_at_mut(self.w1.as_slice().len());
        let mut gx = Matrix::zeros(self.n_nodes, 1);
        for i in 0..self.n_nodes {
            let gu = grad_u[(i, 0)];
            let xi = tape.x[(i, 0)];
            let mut g_self = 0.0;
            let mut g_mean = 0.0;
            for k in 0..hd {
                let hv = tape.h[(i, k)];
                g2[i * hd + k] += gu * hv;
                let gpre = gu * self.w2[(i, k)] * (1.0 - hv * hv);
                g1[i * 2 * hd + 2 * k] += gpre * xi;
                g1[i * 2 * hd + 2 * k + 1] += gpre * tape.mean[i];
                g_self += gpre * self.w1[(i, 2 * k)];
                g_mean += gpre * self.w1[(i, 2 * k + 1)];
            }
            gx[(i, 0)] += g_self;
            let nb = &tape.neighbors[i];
            if !nb.is_empty() {
                let share = g_mean / nb.len() as f64;
                for &j in nb {
                    gx[(j, 0)] += share;
                }
            }
        }
        gx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_parameter_count_matches_reference_size() {
        let mut rng = RngStream::new(0, 0);
        let m = MlpController::init(50, 16, &mut rng).unwrap();
        assert_eq!(Differentiable::n_params(&m), 80_000);
    }

    #[test]
    fn dmlp_parameter_count() {
        let mut rng = RngStream::new(0, 0);
        let m = DmlpController::init(50, 16, &mut rng).unwrap();
        assert_eq!(Differentiable::n_params(&m), 2_400);
    }

    #[test]
    fn zero_state_zero_control() {
        let mut rng = RngStream::new(0, 0);
        let s = Matrix::from_fn(4, 4, |i, j| if i.abs_diff(j) == 1 { 0.5 } else { 0.0 });
        let m = MlpController::init(4, 3, &mut rng).unwrap();
        assert_eq!(
            m.evaluate(&Matrix::zeros(4, 1), &s).unwrap(),
            Matrix::zeros(4, 1)
        );
        let d = DmlpController::init(4, 3, &mut rng).unwrap();
        assert_eq!(
            d.evaluate(&Matrix::zeros(4, 1), &s).unwrap(),
            Matrix::zeros(4, 1)
        );
    }

    #[test]
    fn dmlp_has_no_weight_sharing() {
        // nodes 0 and 2 both see only node 1
        let s = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let mut rng = RngStream::new(4, 0);
        let d = DmlpController::init(3, 4, &mut rng).unwrap();
        let x = Matrix::column_vector(&[0.3, -0.8, 0.3]);
        let u = d.evaluate(&x, &s).unwrap();
        assert_ne!(u[(0, 0)], u[(2, 0)]);
    }

    #[test]
    fn isolated_node_uses_zero_mean() {
        let s = Matrix::zeros(2, 2);
        let mut rng = RngStream::new(4, 0);
        let d = DmlpController::init(2, 2, &mut rng).unwrap();
        let x = Matrix::column_vector(&[0.5, 0.0]);
        let u = d.evaluate(&x, &s).unwrap();
        let expect: f64 = (0..2)
            .map(|k| d.w2[(0, k)] * (d.w1[(0, 2 * k)] * 0.5).tanh())
            .sum();
        assert!((u[(0, 0)] - expect).abs() < 1e-15);
    }

    #[test]
    fn transfer_copies_nearest_node_weights() {
        let mut rng = RngStream::new(4, 0);
        let d = DmlpController::init(2, 2, &mut rng)
            .unwrap()
            .with_positions(vec![[0.0, 0.0], [1.0, 1.0]])
            .unwrap();
        let t = d.transfer(&[[0.9, 0.8], [0.1, 0.0], [0.2, 0.2]]).unwrap();
        assert_eq!(t.w1.row(0), d.w1.row(1));
        assert_eq!(t.w1.row(1), d.w1.row(0));
        assert_eq!(t.w2.row(2), d.w2.row(0));
        assert_eq!(t.n_nodes, 3);
    }
}
