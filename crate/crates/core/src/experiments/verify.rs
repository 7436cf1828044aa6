//! Fuzz campaigns for the filter/GNN output bounds, permutation equivariance,
//! input-state stability, stability change and trajectory deviation.

use serde::{Deserialize, Serialize};

use super::{fmt, ExperimentConfig, ExperimentOutput, Table};
use crate::analysis::{
    c_t, deviation_bound, deviation_limit_check, stability_change_bound, BOUND_SLACK,
    DEVIATION_SLACK, LIMIT_HORIZON,
};
use crate::error::Result;
use crate::filters::{apply_filter, default_interval, filter_lipschitz, filter_size, FilterBank};
use crate::gnn::{gnn_forward, GnnParams, LayerSpec, Nonlinearity};
use crate::network::{perturb_system, sample_connected_system, DistributedSystem};
use crate::numerics::{inf_norm, l21_norm, spectral_norm, Matrix, RngStream};
use crate::simulation::{iss_check_scaled, Disturbance};

pub const OUTPUT_BOUND_INSTANCES: usize = 1000;
pub const PERTURBATION_TREND_INSTANCES: usize = 200;
pub const PERMUTATION_INSTANCES: usize = 200;
pub const ISS_INSTANCES: usize = 500;
pub const STABILITY_CHANGE_INSTANCES: usize = 500;
pub const DEVIATION_INSTANCES: usize = 200;
pub const STABILITY_CHANGE_EPS: [f64; 3] = [1e-3, 1e-2, 1e-1];
pub const DEVIATION_EPS: [f64; 2] = [1e-4, 1e-3];
pub const TREND_EPS: f64 = 1e-4;
pub const EQUIVARIANCE_TOL: f64 = 1e-12;
pub const ISS_HORIZON: usize = 60;
pub const DEVIATION_HORIZON: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub required: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen (or largest error for equivariance).
    pub worst: f64,
}

impl SuiteResult {
    fn new(name: &str, required: usize) -> Self {
        SuiteResult {
            name: name.to_string(),
            instances: 0,
            required,
            violations: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, holds: bool) {
        self.instances += 1;
        self.violations += usize::from(!holds);
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        self.worst = self.worst.max(ratio);
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.instances >= self.required
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn into_output(self) -> ExperimentOutput {
        let mut t = Table::new(
            "verify_suites",
            &[
                "suite",
                "instances",
                "required",
                "violations",
                "worst_ratio",
                "passed",
            ],
        );
        let mut summary = Vec::new();
        for s in &self.suites {
            t.push(vec![
                s.name.clone(),
                s.instances.to_string(),
                s.required.to_string(),
                s.violations.to_string(),
                fmt(s.worst),
                s.passed().to_string(),
            ]);
            summary.push(format!(
                "{:<7} {:<28} {:>5} instances, {} violations, worst ratio {:.3e}",
                if s.passed() { "PASS" } else { "FAIL" },
                s.name,
                s.instances,
                s.violations,
                s.worst
            ));
        }
        let passed = self.passed;
        ExperimentOutput {
            tables: vec![t],
            json: vec![(
                "verify_report".into(),
                serde_json::to_value(&self).unwrap_or_default(),
            )],
            summary,
            passed,
        }
    }
}

fn scaled(count: usize, scale: f64) -> usize {
    ((count as f64 * scale).ceil() as usize).max(1)
}

fn range(rng: &mut RngStream, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// Connected geometric system with random feature matrices `Ā` (F×F) and `B̄` (G×F).
pub fn random_system(
    rng: &mut RngStream,
    n: usize,
    f: usize,
    g: usize,
    a_norm: f64,
) -> Result<DistributedSystem> {
    let k = 3.min(n - 1);
    let (_, d) = sample_connected_system(n, k, a_norm, 1.0, rng)?;
    if f == 1 && g == 1 {
        return Ok(d);
    }
    let mut feat = |rows: usize, cols: usize| -> Matrix {
        let m = rng.uniform_matrix(rows, cols, 1.0);
        let target = rng.uniform_in(0.5, 1.0);
        let norm = inf_norm(&m);
        if norm > 0.0 {
            m.scale(target / norm)
        } else {
            Matrix::from_fn(rows, cols, |i, j| if i == j { target } else { 0.0 })
        }
    };
    let abar = feat(f, f);
    let bbar = feat(g, f);
    DistributedSystem::new(d.support, d.sys_graph, abar, d.ctrl_graph, bbar)
}

/// Tanh GNN with 1–3 layers of random width/order ending in `out_dim` features.
pub fn random_gnn(
    rng: &mut RngStream,
    in_dim: usize,
    out_dim: usize,
    interval: (f64, f64),
) -> Result<GnnParams> {
    let layers = range(rng, 1, 3);
    let arch: Vec<LayerSpec> = (0..layers)
        .map(|l| LayerSpec {
            features: if l + 1 == layers {
                out_dim
            } else {
                range(rng, 1, 4)
            },
            order: range(rng, 0, 3),
        })
        .collect();
    let mut p = GnnParams::init(in_dim, &arch, Nonlinearity::Tanh, interval, rng)?;
    let gain = rng.uniform_in(0.5, 2.0);
    for l in p.layers_mut() {
        for t in l.taps_mut() {
            *t = t.scale(gain);
        }
    }
    Ok(p)
}

/// Rescales the first layer so that `ξ` equals `target`; `C_Φ` is
/// homogeneous of degree one in each layer's taps.
fn set_xi(d: &DistributedSystem, p: &mut GnnParams, target: f64) -> Result<bool> {
    let open = spectral_norm(&d.sys_graph)? * inf_norm(&d.sys_feat);
    let gain = spectral_norm(&d.ctrl_graph)? * inf_norm(&d.ctrl_feat);
    let c = p.size_product();
    if target <= open || gain == 0.0 || c == 0.0 {
        return Ok(false);
    }
    let factor = (target - open) / (gain * c);
    for t in p.layers_mut()[0].taps_mut() {
        *t = t.scale(factor);
    }
    Ok(true)
}

fn random_filter(rng: &mut RngStream, interval: (f64, f64)) -> Result<FilterBank> {
    let (f, g, k) = (range(rng, 1, 3), range(rng, 1, 3), range(rng, 0, 4));
    let taps = (0..=k).map(|_| rng.uniform_matrix(f, g, 1.0)).collect();
    FilterBank::new(taps, interval)
}

/// `‖H(S)X‖ ≤ C_H ‖X‖` for random filters, supports and signals.
pub fn audit_filter_output_bound(count: usize, rng: &mut RngStream) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("filter_output_bound", OUTPUT_BOUND_INSTANCES.min(count));
    for _ in 0..count {
        let n = range(rng, 4, 20);
        let (_, d) = sample_connected_system(n, 3.min(n - 1), 0.9, 1.0, rng)?;
        // a dense symmetric perturbation exercises supports off the graph pattern
        let support = if rng.uniform() < 0.5 {
            d.support
        } else {
            perturb_system(&d, 0.1, rng)?.support
        };
        let fb = random_filter(rng, default_interval(&[&support])?)?;
        let x = rng.normal_matrix(n, fb.in_dim());
        let lhs = l21_norm(&apply_filter(&fb, &support, &x)?);
        let rhs = filter_size(&fb) * l21_norm(&x);
        s.record(lhs, rhs, lhs <= rhs + BOUND_SLACK);
    }
    Ok(s)
}

/// `‖Φ(X)‖ ≤ C_Φ ‖X‖` for random tanh GNNs.
pub fn audit_gnn_output_bound(count: usize, rng: &mut RngStream) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("gnn_output_bound", OUTPUT_BOUND_INSTANCES.min(count));
    for _ in 0..count {
        let n = range(rng, 4, 20);
        let (_, d) = sample_connected_system(n, 3.min(n - 1), 0.9, 1.0, rng)?;
        let f = range(rng, 1, 3);
        let out = range(rng, 1, 3);
        let p = random_gnn(rng, f, out, default_interval(&[&d.support])?)?;
        let x = rng.normal_matrix(n, f).scale(rng.uniform_in(0.1, 5.0));
        let lhs = l21_norm(&gnn_forward(&p, &d.support, &x)?);
        let rhs = p.size_product() * l21_norm(&x);
        s.record(lhs, rhs, lhs <= rhs + BOUND_SLACK);
    }
    Ok(s)
}

/// `‖H(Ŝ)X − H(S)X‖ ≤ 1.1 ε (1 + 8√N) Γ_H ‖X‖` at `‖S − Ŝ‖₂ = ε`.
pub fn audit_filter_perturbation(count: usize, rng: &mut RngStream) -> Result<SuiteResult> {
    let mut s = SuiteResult::new(
        "filter_perturbation",
        PERTURBATION_TREND_INSTANCES.min(count),
    );
    for _ in 0..count {
        let n = range(rng, 4, 20);
        let (_, d) = sample_connected_system(n, 3.min(n - 1), 0.9, 1.0, rng)?;
        let dh = perturb_system(&d, TREND_EPS, rng)?;
        let fb = random_filter(rng, default_interval(&[&d.support, &dh.support])?)?;
        let x = rng.normal_matrix(n, fb.in_dim());
        let lhs =
            l21_norm(&(&apply_filter(&fb, &dh.support, &x)? - &apply_filter(&fb, &d.support, &x)?));
        let rhs = DEVIATION_SLACK
            * TREND_EPS
            * (1.0 + 8.0 * (n as f64).sqrt())
            * filter_lipschitz(&fb)
            * l21_norm(&x);
        s.record(lhs, rhs, lhs <= rhs + BOUND_SLACK);
    }
    Ok(s)
}

/// `‖Φ(X; Ŝ) − Φ(X; S)‖ ≤ 1.1 ε (1 + 8√N) C_Φ Γ_Φ ‖X‖`.
pub fn audit_gnn_perturbation(count: usize, rng: &mut RngStream) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("gnn_perturbation", PERTURBATION_TREND_INSTANCES.min(count));
    for _ in 0..count {
        let n = range(rng, 4, 20);
        let (_, d) = sample_connected_system(n, 3.min(n - 1), 0.9, 1.0, rng)?;
        let dh = perturb_system(&d, TREND_EPS, rng)?;
        let f = range(rng, 1, 3);
        let out = range(rng, 1, 3);
        let p = random_gnn(rng, f, out, default_interval(&[&d.support, &dh.support])?)?;
        let x = rng.normal_matrix(n, f);
        let lhs =
            l21_norm(&(&gnn_forward(&p, &dh.support, &x)? - &gnn_forward(&p, &d.support, &x)?));
        let rhs = DEVIATION_SLACK
            * TREND_EPS
            * (1.0 + 8.0 * (n as f64).sqrt())
            * p.size_product()
            * p.lipschitz_ratio_sum()
            * l21_norm(&x);
        s.record(lhs, rhs, lhs <= rhs + BOUND_SLACK);
    }
    Ok(s)
}

/// Filter and GNN outputs commute with relabelling the nodes.
pub fn audit_permutation_equivariance(count: usize, rng: &mut RngStream) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("permutation_equivariance", PERMUTATION_INSTANCES.min(count));
    for _ in 0..count {
        let n = range(rng, 4, 20);
        let (_, d) = sample_connected_system(n, 3.min(n - 1), 0.9, 1.0, rng)?;
        let iv = default_interval(&[&d.support])?;
        let fb = random_filter(rng, iv)?;
        let f = fb.in_dim();
        let out = range(rng, 1, 3);
        let p = random_gnn(rng, f, out, iv)?;
        let x = rng.normal_matrix(n, f);
        let perm = rng.permutation(n);
        let sp = d.support.permute_sym(&perm);
        let xp = x.permute_rows(&perm);
        let e1 = (&apply_filter(&fb, &sp, &xp)?
            - &apply_filter(&fb, &d.support, &x)?.permute_rows(&perm))
            .max_abs();
        let e2 = (&gnn_forward(&p, &sp, &xp)?
            - &gnn_forward(&p, &d.support, &x)?.permute_rows(&perm))
            .max_abs();
        let err = e1.max(e2);
        s.record(err, EQUIVARIANCE_TOL, err <= EQUIVARIANCE_TOL);
    }
    Ok(s)
}

fn random_disturbance(
    rng: &mut RngStream,
    n: usize,
    g: usize,
    horizon: usize,
) -> Result<Disturbance> {
    let e0 = rng.normal_matrix(n, g).scale(rng.uniform_in(0.0, 2.0));
    if rng.uniform() < 0.5 {
        Disturbance::geometric(&e0, rng.uniform_in(0.0, 0.9), horizon)
    } else {
        let signals = (0..horizon)
            .map(|t| {
                rng.normal_matrix(n, g)
                    .scale(1.0 / ((t + 1) * (t + 1)) as f64)
            })
            .collect();
        Disturbance::new(signals)
    }
}

/// `Σ‖X(t)‖ ≤ β₀ + β₁ Σ‖E(t)‖` on random pairs with `ξ < 1`.
pub fn audit_input_state_stability(
    count: usize,
    xi_scale: f64,
    rng: &mut RngStream,
) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("input_state_stability", ISS_INSTANCES.min(count));
    while s.instances < count {
        let n = range(rng, 4, 15);
        let (f, g) = (range(rng, 1, 2), range(rng, 1, 2));
        let a_norm = rng.uniform_in(0.2, 0.9);
        let d = random_system(rng, n, f, g, a_norm)?;
        let mut p = random_gnn(rng, f, g, default_interval(&[&d.support])?)?;
        let open = spectral_norm(&d.sys_graph)? * inf_norm(&d.sys_feat);
        let target = open + rng.uniform_in(0.05, 0.95) * (1.0 - open);
        if !set_xi(&d, &mut p, target)? {
            continue;
        }
        let x0 = rng.normal_matrix(n, f);
        let dist = random_disturbance(rng, n, g, ISS_HORIZON)?;
        let (lhs, rhs, holds) = iss_check_scaled(&d, &p, &x0, &dist, ISS_HORIZON, xi_scale)?;
        s.record(lhs, rhs, holds);
    }
    Ok(s)
}

/// `|ξ − ξ̂| ≤ Ĉ_ξ d(D, D̂)` across perturbation sizes.
pub fn audit_stability_change(count_per_eps: usize, rng: &mut RngStream) -> Result<SuiteResult> {
    let mut s = SuiteResult::new(
        "stability_change",
        STABILITY_CHANGE_INSTANCES.min(count_per_eps) * STABILITY_CHANGE_EPS.len(),
    );
    for &eps in &STABILITY_CHANGE_EPS {
        for _ in 0..count_per_eps {
            let n = range(rng, 4, 20);
            let (f, g) = (range(rng, 1, 2), range(rng, 1, 2));
            let a_norm = rng.uniform_in(0.3, 1.05);
            let d = random_system(rng, n, f, g, a_norm)?;
            let dh = perturb_system(&d, eps, rng)?;
            let p = random_gnn(rng, f, g, default_interval(&[&d.support])?)?;
            let c = stability_change_bound(&d, &dh, &p)?;
            s.record(c.lhs, c.rhs, c.holds);
        }
    }
    Ok(s)
}

/// Deviation bound at small `ε` (with the 1.1 slack), the limit check on
/// pairs stable on both systems, and the closed-form bound on `max_t Ĉ_t Ĉ_Φ`.
pub fn audit_trajectory_deviation(
    count_per_eps: usize,
    rng: &mut RngStream,
) -> Result<Vec<SuiteResult>> {
    let required = DEVIATION_INSTANCES.min(count_per_eps) * DEVIATION_EPS.len();
    let mut dev = SuiteResult::new("trajectory_deviation", required);
    let mut limit = SuiteResult::new("deviation_limit", 1);
    let mut cor = SuiteResult::new("deviation_constant", 1);
    for &eps in &DEVIATION_EPS {
        let mut done = 0;
        while done < count_per_eps {
            let n = range(rng, 4, 15);
            let a_norm = rng.uniform_in(0.3, 0.9);
            let d = random_system(rng, n, 1, 1, a_norm)?;
            let dh = perturb_system(&d, eps, rng)?;
            let mut p = random_gnn(rng, 1, 1, default_interval(&[&d.support, &dh.support])?)?;
            let open = spectral_norm(&d.sys_graph)?;
            if !set_xi(
                &d,
                &mut p,
                open + rng.uniform_in(0.05, 0.9) * (0.95 - open).max(0.0),
            )? {
                continue;
            }
            done += 1;
            let x0 = rng.normal_matrix(n, 1);
            let r = deviation_bound(&d, &dh, &p, &x0, DEVIATION_HORIZON)?;
            let worst = r.worst_ratio();
            dev.record(worst, DEVIATION_SLACK, r.holds_with(DEVIATION_SLACK));
            if r.xi < 1.0 && r.xi_hat < 1.0 {
                let ok = deviation_limit_check(&d, &dh, &p, &x0, LIMIT_HORIZON)?;
                limit.record(f64::from(u8::from(!ok)), 1.0, ok);
                if let Some(cc) = r.cor_c {
                    let m = r.xi.max(r.xi_hat);
                    let peak = (0..=10 * LIMIT_HORIZON)
                        .map(|t| c_t(t, m))
                        .fold(0.0, f64::max)
                        * r.c_phi_hat;
                    cor.record(peak, cc, peak <= cc * (1.0 + 1e-12) + BOUND_SLACK);
                }
            }
        }
    }
    Ok(vec![dev, limit, cor])
}

pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let root = RngStream::new(cfg.seed, 0);
    let k = cfg.verify_scale;
    let mut suites = vec![
        audit_filter_output_bound(scaled(OUTPUT_BOUND_INSTANCES, k), &mut root.fork(1, 0))?,
        audit_gnn_output_bound(scaled(OUTPUT_BOUND_INSTANCES, k), &mut root.fork(2, 0))?,
        audit_filter_perturbation(
            scaled(PERTURBATION_TREND_INSTANCES, k),
            &mut root.fork(3, 0),
        )?,
        audit_gnn_perturbation(
            scaled(PERTURBATION_TREND_INSTANCES, k),
            &mut root.fork(4, 0),
        )?,
        audit_permutation_equivariance(scaled(PERMUTATION_INSTANCES, k), &mut root.fork(5, 0))?,
        audit_input_state_stability(
            scaled(ISS_INSTANCES, k),
            cfg.verify_xi_patch,
            &mut root.fork(6, 0),
        )?,
        audit_stability_change(scaled(STABILITY_CHANGE_INSTANCES, k), &mut root.fork(7, 0))?,
    ];
    suites.extend(audit_trajectory_deviation(
        scaled(DEVIATION_INSTANCES, k),
        &mut root.fork(8, 0),
    )?);
    let passed = suites.iter().all(SuiteResult::passed);
    Ok(VerifyReport {
        seed: cfg.seed,
        suites,
        passed,
    })
}
