//! Train at the base size, then evaluate the same parameters on independently
//! drawn larger systems.

use super::{
    fmt, make_realization, par_indexed, train_and_evaluate, ExperimentConfig, ExperimentOutput,
    Table,
};
use crate::controllers::{
    make_dmlp_controller, make_gf_controller, make_gnn_controller, Controller,
};
use crate::error::{Error, Result};
use crate::gnn::PenaltyKind;
use crate::training::{evaluate, median, EvalSummary, Normalizer};

struct Row {
    label: String,
    n: usize,
    stable_cost: f64,
    stable_ratio: f64,
}

fn stable_mean(e: &EvalSummary) -> f64 {
    let v: Vec<f64> = e
        .values
        .iter()
        .zip(&e.stable)
        .filter(|(_, &s)| s)
        .map(|(&v, _)| v)
        .collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn one(cfg: &ExperimentConfig, r: usize) -> Result<Vec<Row>> {
    let base = make_realization(cfg, r, cfg.n_nodes, cfg.a_norm)?;
    let mut trained: Vec<(String, Box<dyn Controller>)> = Vec::new();
    for (pi, &pen) in cfg.penalties.iter().enumerate() {
        let slot = 48 + pi as u64;
        let init = make_gnn_controller(
            1,
            cfg.gnn.features,
            cfg.gnn.order,
            base.interval,
            &mut cfg.init_rng(r, 48),
        )?;
        let t = train_and_evaluate(cfg, &base, &init, &cfg.train_for(r, slot, cfg.gnn.lr, pen))?;
        let label = if pen == PenaltyKind::None {
            "gnn".to_string()
        } else {
            format!("gnn+{pen}")
        };
        trained.push((label, Box::new(t.ctrl)));
    }
    let gf = make_gf_controller(
        1,
        cfg.gf.features,
        cfg.gf.order,
        base.interval,
        &mut cfg.init_rng(r, 60),
    )?;
    let t = train_and_evaluate(
        cfg,
        &base,
        &gf,
        &cfg.train_for(r, 60, cfg.gf.lr, PenaltyKind::None),
    )?;
    trained.push(("gf".into(), Box::new(t.ctrl)));
    let positions = base
        .graph
        .positions
        .clone()
        .ok_or_else(|| Error::Precondition("base graph has no node positions".into()))?;
    let dmlp = make_dmlp_controller(cfg.n_nodes, cfg.dmlp_hidden, &mut cfg.init_rng(r, 61))?
        .with_positions(positions)?;
    let t = train_and_evaluate(
        cfg,
        &base,
        &dmlp,
        &cfg.train_for(r, 61, cfg.dmlp_lr, PenaltyKind::None),
    )?;
    let dmlp = t.ctrl;

    let cost = cfg.cost();
    let mut rows = Vec::new();
    for &n in &cfg.node_grid {
        let real = make_realization(cfg, r, n, cfg.a_norm)?;
        let new_pos =
            real.graph.positions.as_ref().ok_or_else(|| {
                Error::Precondition("transfer graph has no node positions".into())
            })?;
        let moved = dmlp.transfer(new_pos)?;
        let mut eval_one = |label: &str, c: &dyn Controller| -> Result<()> {
            let e = evaluate(
                c,
                &real.system,
                &cost,
                &real.test_states,
                cfg.horizon,
                Normalizer::OptimalCost,
            )?;
            rows.push(Row {
                label: label.to_string(),
                n,
                stable_cost: stable_mean(&e),
                stable_ratio: e.stable_ratio,
            });
            Ok(())
        };
        for (label, c) in &trained {
            eval_one(label, c.as_ref())?;
        }
        eval_one("dmlp", &moved)?;
    }
    Ok(rows)
}

pub fn run_exp5(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let results = par_indexed(cfg.n_realizations, |r| {
        one(cfg, r).map_err(|e| e.to_string())
    });
    let mut per = Table::new(
        "exp5_realizations",
        &[
            "controller",
            "n_nodes",
            "realization",
            "stable_cost",
            "stable_ratio",
            "status",
        ],
    );
    let mut labels: Vec<String> = Vec::new();
    for (r, res) in results.iter().enumerate() {
        match res {
            Ok(rows) => {
                for row in rows {
                    if !labels.contains(&row.label) {
                        labels.push(row.label.clone());
                    }
                    per.push(vec![
                        row.label.clone(),
                        row.n.to_string(),
                        r.to_string(),
                        fmt(row.stable_cost),
                        fmt(row.stable_ratio),
                        "ok".into(),
                    ]);
                }
            }
            Err(msg) => per.push(vec![
                String::new(),
                String::new(),
                r.to_string(),
                String::new(),
                String::new(),
                format!("failed: {}", msg.replace(',', ";")),
            ]),
        }
    }
    let mut fig = Table::new(
        "exp5_scalability",
        &[
            "controller",
            "n_nodes",
            "median_stable_cost",
            "mean_stable_ratio",
            "n_ok",
        ],
    );
    let mut summary = Vec::new();
    for label in &labels {
        let mut line = format!("{label:>14}:");
        for &n in &cfg.node_grid {
            let rows: Vec<&Row> = results
                .iter()
                .filter_map(|r| r.as_ref().ok())
                .flat_map(|rows| rows.iter().filter(|row| &row.label == label && row.n == n))
                .collect();
            let costs: Vec<f64> = rows
                .iter()
                .map(|r| r.stable_cost)
                .filter(|c| c.is_finite())
                .collect();
            let ratio = rows.iter().map(|r| r.stable_ratio).sum::<f64>() / rows.len().max(1) as f64;
            fig.push(vec![
                label.clone(),
                n.to_string(),
                fmt(median(&costs)),
                fmt(ratio),
                rows.len().to_string(),
            ]);
            line.push_str(&format!(
                " N={n}: {:.4} ({:.0}% stable)",
                median(&costs),
                100.0 * ratio
            ));
        }
        summary.push(line);
    }
    summary.push("mlp excluded: its input size is tied to the training node count".into());
    Ok(ExperimentOutput {
        tables: vec![fig, per],
        json: Vec::new(),
        summary,
        passed: true,
    })
}
