//! Train on one system, test on a perturbed one: stable-trajectory ratio,
//! cost change and the stability/deviation audits, per penalty variant.

use super::{
    fmt, make_realization, par_indexed, perturb_rng, train_and_evaluate, ExperimentConfig,
    ExperimentOutput, Table,
};
use crate::analysis::{deviation_bound, stability_change_bound, stability_report, DEVIATION_SLACK};
use crate::controllers::make_gnn_controller;
use crate::error::Result;
use crate::gnn::PenaltyKind;
use crate::network::perturb_system;
use crate::training::{evaluate, median, Normalizer};

struct EpsResult {
    stable_ratio: f64,
    rel_cost_diff: f64,
    xi_hat: f64,
    change_lhs: f64,
    change_rhs: f64,
    change_holds: bool,
    deviation_worst_ratio: f64,
    deviation_holds: Option<bool>,
}

struct VariantResult {
    xi: f64,
    c_phi: f64,
    gamma_phi: f64,
    per_eps: Vec<EpsResult>,
}

fn one(cfg: &ExperimentConfig, r: usize, pi: usize, penalty: PenaltyKind) -> Result<VariantResult> {
    let real = make_realization(cfg, r, cfg.n_nodes, cfg.a_norm)?;
    let cost = cfg.cost();
    let slot = 32 + pi as u64;
    // every penalty variant starts from the same initial taps
    let init = make_gnn_controller(
        1,
        cfg.gnn.features,
        cfg.gnn.order,
        real.interval,
        &mut cfg.init_rng(r, 32),
    )?;
    let t = train_and_evaluate(
        cfg,
        &real,
        &init,
        &cfg.train_for(r, slot, cfg.gnn.lr, penalty),
    )?;
    let rep = stability_report(&real.system, &t.ctrl.params)?;
    let mut per_eps = Vec::new();
    for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
        let d_hat = perturb_system(&real.system, eps, &mut perturb_rng(cfg, r, ei))?;
        let e = evaluate(
            &t.ctrl,
            &d_hat,
            &cost,
            &real.test_states,
            cfg.horizon,
            Normalizer::Raw,
        )?;
        let diffs: Vec<f64> = e
            .costs
            .iter()
            .zip(&t.eval.costs)
            .zip(&e.stable)
            .filter(|(_, &s)| s)
            .map(|((&ch, &c), _)| (ch - c).abs() / c)
            .collect();
        let change = stability_change_bound(&real.system, &d_hat, &t.ctrl.params)?;
        let (worst, holds) = match deviation_bound(
            &real.system,
            &d_hat,
            &t.ctrl.params,
            &real.test_states[0],
            cfg.horizon,
        ) {
            Ok(dev) => (dev.worst_ratio(), Some(dev.holds_with(DEVIATION_SLACK))),
            Err(_) => (f64::NAN, None),
        };
        per_eps.push(EpsResult {
            stable_ratio: e.stable_ratio,
            rel_cost_diff: if diffs.is_empty() {
                f64::NAN
            } else {
                median(&diffs)
            },
            xi_hat: change.xi_hat,
            change_lhs: change.lhs,
            change_rhs: change.rhs,
            change_holds: change.holds,
            deviation_worst_ratio: worst,
            deviation_holds: holds,
        });
    }
    Ok(VariantResult {
        xi: rep.xi,
        c_phi: rep.c_phi,
        gamma_phi: rep.gamma_phi,
        per_eps,
    })
}

pub fn run_exp4(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n_p = cfg.penalties.len();
    let results = par_indexed(cfg.n_realizations * n_p, |i| {
        let (r, pi) = (i / n_p, i % n_p);
        one(cfg, r, pi, cfg.penalties[pi]).map_err(|e| e.to_string())
    });
    let mut inst = Table::new(
        "exp4_instances",
        &[
            "penalty",
            "eps",
            "realization",
            "stable_ratio",
            "rel_cost_diff",
            "xi",
            "xi_hat",
            "change_lhs",
            "change_rhs",
            "change_holds",
            "deviation_worst_ratio",
            "deviation_holds",
        ],
    );
    let mut xi_t = Table::new(
        "exp4_xi",
        &[
            "penalty",
            "realization",
            "xi",
            "c_phi",
            "gamma_phi",
            "status",
        ],
    );
    let mut fig = Table::new(
        "exp4_stability",
        &[
            "penalty",
            "eps",
            "mean_stable_ratio",
            "median_rel_cost_diff",
            "n_ok",
        ],
    );
    let mut summary = Vec::new();
    let mut change_violations = 0;
    for (pi, pen) in cfg.penalties.iter().enumerate() {
        let mut xis = Vec::new();
        for r in 0..cfg.n_realizations {
            match &results[r * n_p + pi] {
                Ok(v) => {
                    xis.push(v.xi);
                    xi_t.push(vec![
                        pen.to_string(),
                        r.to_string(),
                        fmt(v.xi),
                        fmt(v.c_phi),
                        fmt(v.gamma_phi),
                        "ok".into(),
                    ]);
                }
                Err(msg) => xi_t.push(vec![
                    pen.to_string(),
                    r.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("failed: {}", msg.replace(',', ";")),
                ]),
            }
        }
        for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
            let mut ratios = Vec::new();
            let mut diffs = Vec::new();
            for r in 0..cfg.n_realizations {
                let Ok(v) = &results[r * n_p + pi] else {
                    continue;
                };
                let e = &v.per_eps[ei];
                ratios.push(e.stable_ratio);
                if e.rel_cost_diff.is_finite() {
                    diffs.push(e.rel_cost_diff);
                }
                change_violations += usize::from(!e.change_holds);
                inst.push(vec![
                    pen.to_string(),
                    fmt(eps),
                    r.to_string(),
                    fmt(e.stable_ratio),
                    fmt(e.rel_cost_diff),
                    fmt(v.xi),
                    fmt(e.xi_hat),
                    fmt(e.change_lhs),
                    fmt(e.change_rhs),
                    e.change_holds.to_string(),
                    fmt(e.deviation_worst_ratio),
                    e.deviation_holds.map(|b| b.to_string()).unwrap_or_default(),
                ]);
            }
            let mean_ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
            fig.push(vec![
                pen.to_string(),
                fmt(eps),
                fmt(mean_ratio),
                fmt(median(&diffs)),
                ratios.len().to_string(),
            ]);
        }
        summary.push(format!(
            "penalty {pen}: median xi {:.4} over {} realizations",
            median(&xis),
            xis.len()
        ));
    }
    summary.push(format!(
        "stability-change bound violations: {change_violations}"
    ));
    Ok(ExperimentOutput {
        tables: vec![fig, xi_t, inst],
        json: Vec::new(),
        summary,
        passed: change_violations == 0,
    })
}
