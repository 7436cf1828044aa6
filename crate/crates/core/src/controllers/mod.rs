//! Uniform controller interface plus the comparison controllers: centralized
//! LQR, centralized MLP, per-node D-MLP, linear graph filter and open loop.

mod mlp;
mod riccati;

pub use mlp::{DmlpController, DmlpTape, MlpController, MlpTape};
pub use riccati::{dare_residual, solve_dare, RiccatiSolution, DARE_MAX_ITERS, DARE_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::GraphSignal;
use crate::gnn::{GnnController, GnnParams, LayerSpec, Nonlinearity, PenaltyKind};
use crate::network::{CostSpec, DistributedSystem};
use crate::numerics::{Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Optimal,
    Mlp,
    Dmlp,
    Gnn,
    Gf,
    OpenLoop,
}

impl ControllerKind {
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::Optimal => "optim",
            ControllerKind::Mlp => "mlp",
            ControllerKind::Dmlp => "dmlp",
            ControllerKind::Gnn => "gnn",
            ControllerKind::Gf => "gf",
            ControllerKind::OpenLoop => "open-loop",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optim" | "optimal" => Ok(ControllerKind::Optimal),
            "mlp" => Ok(ControllerKind::Mlp),
            "dmlp" | "d-mlp" => Ok(ControllerKind::Dmlp),
            "gnn" => Ok(ControllerKind::Gnn),
            "gf" => Ok(ControllerKind::Gf),
            "open-loop" | "openloop" => Ok(ControllerKind::OpenLoop),
            other => Err(Error::Config(format!("unknown controller kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub kind: ControllerKind,
    pub hyperparameters: String,
    pub n_params: usize,
}

/// State-feedback map `U = Φ(X; S)`, N×F in and N×G out.
pub trait Controller: Send + Sync {
    fn evaluate(&self, state: &GraphSignal, support: &Matrix) -> Result<GraphSignal>;

    fn descriptor(&self) -> Descriptor;
}

/// A controller with flat trainable parameters and a per-step vector-Jacobian product.
pub trait Differentiable: Controller + Clone {
    type Tape: Send;

    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, flat: &[f64]) -> Result<()>;

    fn n_params(&self) -> usize;

    fn forward_tape(
        &self,
        state: &GraphSignal,
        support: &Matrix,
    ) -> Result<(GraphSignal, Self::Tape)>;

    /// Adds `∂L/∂θ` into `grad_params` and returns `∂L/∂X` given `∂L/∂U`.
    fn backward(
        &self,
        support: &Matrix,
        tape: &Self::Tape,
        grad_u: &Matrix,
        grad_params: &mut [f64],
    ) -> Matrix;

    /// Regulariser value and gradient; only graph-filter controllers carry one.
    fn penalty(&self, _kind: PenaltyKind) -> (f64, Vec<f64>) {
        (0.0, vec![0.0; self.n_params()])
    }
}

/// Centralized LQR law `u = −K* x` for F = G = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFeedback {
    pub gain: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_matrix: Option<Matrix>,
}

impl Controller for LinearFeedback {
    fn evaluate(&self, state: &GraphSignal, _support: &Matrix) -> Result<GraphSignal> {
        Ok(self.gain.matmul(state)?.scale(-1.0))
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            kind: ControllerKind::Optimal,
            hyperparameters: "centralized DARE gain".into(),
            n_params: 0,
        }
    }
}

pub fn make_optimal_controller(d: &DistributedSystem, cost: &CostSpec) -> Result<LinearFeedback> {
    if d.f_dim != 1 || d.g_dim != 1 {
        return Err(Error::Precondition(format!(
            "optimal baseline is defined for F = G = 1 (got F = {}, G = {})",
            d.f_dim, d.g_dim
        )));
    }
    // scalar feature matrices fold into the graph-domain matrices
    let abar = d.sys_feat[(0, 0)];
    let bbar = d.ctrl_feat[(0, 0)];
    let n = d.n_nodes();
    let q = Matrix::identity(n).scale(cost.q_mat[(0, 0)]);
    let r = Matrix::identity(n).scale(cost.r_mat[(0, 0)]);
    let sol = solve_dare(&d.sys_graph.scale(abar), &d.ctrl_graph.scale(bbar), &q, &r)?;
    Ok(LinearFeedback {
        gain: sol.gain,
        value_matrix: Some(sol.p_mat),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenLoop {
    pub g_dim: usize,
}

impl Controller for OpenLoop {
    fn evaluate(&self, state: &GraphSignal, _support: &Matrix) -> Result<GraphSignal> {
        Ok(Matrix::zeros(state.rows(), self.g_dim))
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            kind: ControllerKind::OpenLoop,
            hyperparameters: "u = 0".into(),
            n_params: 0,
        }
    }
}

pub fn make_open_loop_controller(g_dim: usize) -> OpenLoop {
    OpenLoop { g_dim }
}

/// Linear two-stage graph filter: `F₁` features of order `K₁`, then a
/// zero-order readout to one output feature.
pub fn make_gf_controller(
    in_dim: usize,
    features: usize,
    order: usize,
    interval: (f64, f64),
    rng: &mut RngStream,
) -> Result<GnnController> {
    let arch = [
        LayerSpec { features, order },
        LayerSpec {
            features: 1,
            order: 0,
        },
    ];
    let params = GnnParams::init(in_dim, &arch, Nonlinearity::Identity, interval, rng)?;
    Ok(GnnController::new(params, ControllerKind::Gf))
}

/// Two-layer tanh GNN with the same shape as the GF baseline.
pub fn make_gnn_controller(
    in_dim: usize,
    features: usize,
    order: usize,
    interval: (f64, f64),
    rng: &mut RngStream,
) -> Result<GnnController> {
    let arch = [
        LayerSpec { features, order },
        LayerSpec {
            features: 1,
            order: 0,
        },
    ];
    let params = GnnParams::init(in_dim, &arch, Nonlinearity::Tanh, interval, rng)?;
    Ok(GnnController::new(params, ControllerKind::Gnn))
}

pub fn make_mlp_controller(
    n: usize,
    hidden_factor: usize,
    rng: &mut RngStream,
) -> Result<MlpController> {
    MlpController::init(n, hidden_factor, rng)
}

pub fn make_dmlp_controller(
    n: usize,
    hidden: usize,
    rng: &mut RngStream,
) -> Result<DmlpController> {
    DmlpController::init(n, hidden, rng)
}

/// Serialisable model file; the `kind` tag selects the variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFile {
    Gnn { params: GnnParams },
    Gf { params: GnnParams },
    Mlp(MlpController),
    Dmlp(DmlpController),
    Optimal(LinearFeedback),
    OpenLoop(OpenLoop),
}

impl ModelFile {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn into_controller(self) -> Box<dyn Controller> {
        match self {
            ModelFile::Gnn { params } => Box::new(GnnController::new(params, ControllerKind::Gnn)),
            ModelFile::Gf { params } => Box::new(GnnController::new(params, ControllerKind::Gf)),
            ModelFile::Mlp(m) => Box::new(m),
            ModelFile::Dmlp(m) => Box::new(m),
            ModelFile::Optimal(m) => Box::new(m),
            ModelFile::OpenLoop(m) => Box::new(m),
        }
    }

    pub fn from_gnn(c: &GnnController) -> Self {
        match c.kind {
            ControllerKind::Gf => ModelFile::Gf {
                params: c.params.clone(),
            },
            _ => ModelFile::Gnn {
                params: c.params.clone(),
            },
        }
    }
}
