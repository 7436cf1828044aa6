//! Stability constants and trajectory-deviation bounds for GNN controllers,
//! audited against simulation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::controllers::ControllerKind;
use crate::error::{Error, Result};
use crate::filters::{default_interval, GraphSignal};
use crate::gnn::{GnnController, GnnParams};
use crate::network::{system_distance, CostSpec, DistributedSystem};
use crate::numerics::{inf_norm, l21_norm, spectral_norm};
use crate::simulation::rollout;

/// Slack used by every one-sided inequality audit.
pub const BOUND_SLACK: f64 = 1e-9;
/// Multiplicative slack for the deviation bound, covering second-order terms in ε.
pub const DEVIATION_SLACK: f64 = 1.1;
pub const LIMIT_HORIZON: usize = 500;
pub const LIMIT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub xi: f64,
    pub c_phi: f64,
    pub gamma_phi: f64,
    pub is_sufficiently_stable: bool,
    /// `β₀ / ‖X(0)‖ = 1/(1−ξ)`; multiply by the initial-state norm.
    pub beta0_factor: Option<f64>,
    pub beta1: Option<f64>,
}

impl StabilityReport {
    pub fn beta0(&self, x0: &GraphSignal) -> Option<f64> {
        self.beta0_factor.map(|f| f * l21_norm(x0))
    }
}

struct SystemNorms {
    a: f64,
    abar: f64,
    b: f64,
    bbar: f64,
}

impl SystemNorms {
    fn of(d: &DistributedSystem) -> Result<Self> {
        Ok(SystemNorms {
            a: spectral_norm(&d.sys_graph)?,
            abar: inf_norm(&d.sys_feat),
            b: spectral_norm(&d.ctrl_graph)?,
            bbar: inf_norm(&d.ctrl_feat),
        })
    }

    fn xi(&self, c_phi: f64) -> f64 {
        self.a * self.abar + c_phi * self.b * self.bbar
    }
}

/// `ξ = ‖A‖₂‖Ā‖∞ + C_Φ ‖B‖₂‖B̄‖∞`.
pub fn stability_constant(d: &DistributedSystem, p: &GnnParams) -> Result<f64> {
    Ok(SystemNorms::of(d)?.xi(p.size_product()))
}

pub fn stability_report(d: &DistributedSystem, p: &GnnParams) -> Result<StabilityReport> {
    let norms = SystemNorms::of(d)?;
    let c_phi = p.size_product();
    let xi = norms.xi(c_phi);
    let stable = xi < 1.0;
    Ok(StabilityReport {
        xi,
        c_phi,
        gamma_phi: p.lipschitz_ratio_sum(),
        is_sufficiently_stable: stable,
        beta0_factor: stable.then(|| 1.0 / (1.0 - xi)),
        beta1: stable.then(|| norms.b * norms.bbar / (1.0 - xi)),
    })
}

/// `|ξ − ξ̂| ≤ Ĉ_ξ d(D, D̂)` with the filter constants taken on an interval
/// covering both supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityChange {
    pub xi: f64,
    pub xi_hat: f64,
    pub distance: f64,
    pub c_phi: f64,
    /// `‖A‖₂ + ‖Ā̂‖∞ + C_Φ(‖B‖₂ + ‖B̄̂‖∞)`.
    pub c_xi: f64,
    /// `‖Ā‖∞ + C_Φ‖B̄‖∞`, valid when both systems share their feature matrices.
    pub c_xi_reduced: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn stability_change_bound(
    d: &DistributedSystem,
    d_hat: &DistributedSystem,
    p: &GnnParams,
) -> Result<StabilityChange> {
    let interval = default_interval(&[&d.support, &d_hat.support])?;
    let c_phi = p.with_interval(interval)?.size_product();
    let n = SystemNorms::of(d)?;
    let nh = SystemNorms::of(d_hat)?;
    let xi = n.xi(c_phi);
    let xi_hat = nh.xi(c_phi);
    let distance = system_distance(d, d_hat)?;
    let c_xi = n.a + nh.abar + c_phi * (n.b + nh.bbar);
    let shared_features = d.sys_feat == d_hat.sys_feat && d.ctrl_feat == d_hat.ctrl_feat;
    let c_xi_reduced = shared_features.then_some(n.abar + c_phi * n.bbar);
    let lhs = (xi - xi_hat).abs();
    let rhs = c_xi_reduced.unwrap_or(c_xi) * distance;
    Ok(StabilityChange {
        xi,
        xi_hat,
        distance,
        c_phi,
        c_xi,
        c_xi_reduced,
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
    })
}

/// `Ĉ_t = t · m^{t−1}`, `Ĉ₀ = 0`.
pub fn c_t(t: usize, m: f64) -> f64 {
    if t == 0 {
        0.0
    } else {
        t as f64 * m.powi(t as i32 - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub xi: f64,
    pub xi_hat: f64,
    pub distance: f64,
    pub c_xi_hat: f64,
    pub c_phi_hat: f64,
    /// `Ĉ_t` for `t = 0..=T`.
    pub c_t: Vec<f64>,
    /// `−e^{−1} Ĉ_Φ / (m log m)` with `m = max{ξ, ξ̂} < 1`.
    pub cor_c: Option<f64>,
    /// Set when `max{ξ, ξ̂} ≥ 1`: the bound is formally valid but grows with `t`.
    pub weak: bool,
    pub empirical_deviation: Vec<f64>,
    pub bound: Vec<f64>,
}

impl DeviationReport {
    /// Whether `‖X(t) − X̂(t)‖ ≤ slack · bound(t)` at every recorded step.
    pub fn holds_with(&self, slack: f64) -> bool {
        self.empirical_deviation
            .iter()
            .zip(&self.bound)
            .all(|(&e, &b)| e <= slack * b + BOUND_SLACK)
    }

    pub fn worst_ratio(&self) -> f64 {
        self.empirical_deviation
            .iter()
            .zip(&self.bound)
            .filter(|(_, &b)| b > 0.0)
            .map(|(&e, &b)| e / b)
            .fold(0.0, f64::max)
    }
}

fn both_trajectories(
    d: &DistributedSystem,
    d_hat: &DistributedSystem,
    p: &GnnParams,
    x0: &GraphSignal,
    horizon: usize,
) -> Result<Vec<f64>> {
    let ctrl = GnnController::new(p.clone(), ControllerKind::Gnn);
    let cost = CostSpec::identity(d.f_dim, d.g_dim);
    let r = rollout(d, &ctrl, x0, horizon, &cost, None)?;
    let rh = rollout(d_hat, &ctrl, x0, horizon, &cost, None)?;
    if r.diverged_at.is_some() || rh.diverged_at.is_some() {
        return Err(Error::Diverged {
            step: r.diverged_at.or(rh.diverged_at).unwrap_or(0),
            norm: f64::INFINITY,
        });
    }
    Ok(r.states
        .iter()
        .zip(&rh.states)
        .map(|(x, xh)| l21_norm(&(x - xh)))
        .collect())
}

/// Trajectory deviation `‖X(t) − X̂(t)‖` under a common GNN and its bound
/// `Ĉ_Φ Ĉ_t ‖X(0)‖ d(D, D̂)`.
pub fn deviation_bound(
    d: &DistributedSystem,
    d_hat: &DistributedSystem,
    p: &GnnParams,
    x0: &GraphSignal,
    horizon: usize,
) -> Result<DeviationReport> {
    let change = stability_change_bound(d, d_hat, p)?;
    let interval = default_interval(&[&d.support, &d_hat.support])?;
    let pi = p.with_interval(interval)?;
    let gamma_phi = pi.lipschitz_ratio_sum();
    let nh = SystemNorms::of(d_hat)?;
    let n = d.n_nodes() as f64;
    let c_phi_hat =
        change.c_xi + change.c_phi * gamma_phi * nh.b * nh.bbar * (1.0 + 8.0 * n.sqrt());
    let m = change.xi.max(change.xi_hat);
    let c_t: Vec<f64> = (0..=horizon).map(|t| c_t(t, m)).collect();
    let cor_c = (m < 1.0 && m > 0.0).then(|| -(-1.0f64).exp() * c_phi_hat / (m * m.ln()));
    let x0n = l21_norm(x0);
    let bound = c_t
        .iter()
        .map(|&c| c_phi_hat * c * x0n * change.distance)
        .collect();
    let empirical_deviation = both_trajectories(d, d_hat, p, x0, horizon)?;
    Ok(DeviationReport {
        xi: change.xi,
        xi_hat: change.xi_hat,
        distance: change.distance,
        c_xi_hat: change.c_xi,
        c_phi_hat,
        c_t,
        cor_c,
        weak: m >= 1.0,
        empirical_deviation,
        bound,
    })
}

/// `‖X(T) − X̂(T)‖ < 10⁻⁶ ‖X(0)‖` at a long horizon, for a pair that is
/// sufficiently stable on both systems.
pub fn deviation_limit_check(
    d: &DistributedSystem,
    d_hat: &DistributedSystem,
    p: &GnnParams,
    x0: &GraphSignal,
    horizon_long: usize,
) -> Result<bool> {
    let change = stability_change_bound(d, d_hat, p)?;
    if change.xi >= 1.0 || change.xi_hat >= 1.0 {
        return Err(Error::NotApplicable(format!(
            "limit check needs xi < 1 on both systems (xi = {}, xi_hat = {})",
            change.xi, change.xi_hat
        )));
    }
    let dev = both_trajectories(d, d_hat, p, x0, horizon_long)?;
    Ok(dev[horizon_long] < LIMIT_REL_TOL * l21_norm(x0))
}

/// One row of a bound-fuzzing campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzRow {
    pub instance: usize,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn write_fuzz_csv<W: Write>(rows: &[FuzzRow], mut w: W) -> Result<()> {
    writeln!(w, "instance,eps,lhs,rhs,holds")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:.12e},{:.12e},{}",
            r.instance, r.eps, r.lhs, r.rhs, r.holds
        )?;
    }
    Ok(())
}
