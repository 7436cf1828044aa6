//! Learning distributed graph-neural-network controllers for linear-quadratic
//! control of network systems, with numerical audits of the closed-loop
//! stability and trajectory-deviation bounds.
//!
//! Module map:
//! - [`numerics`]: dense kernels, norms, eigendecomposition, seeded RNG.
//! - [`network`]: random geometric networks, the system tuple, distances and perturbations.
//! - [`filters`]: polynomial graph filters, frequency responses, size and Lipschitz constants.
//! - [`gnn`]: the GNN controller, closed-loop BPTT and stability penalties.
//! - [`controllers`]: LQR baseline, MLP, D-MLP, linear graph filter, open loop.
//! - [`simulation`]: rollouts, quadratic cost, stability classification, ISS audit.
//! - [`training`]: ADAM, batched ERM with validation-based selection.
//! - [`analysis`]: stability constants and the deviation bounds.
//! - [`experiments`]: experiment drivers and their CSV/JSON outputs.

pub mod analysis;
pub mod controllers;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod gnn;
pub mod network;
pub mod numerics;
pub mod simulation;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};
