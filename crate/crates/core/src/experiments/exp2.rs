//! Head-to-head comparison of every controller on the same realizations.

use super::{
    cell_stats, fmt, make_realization, par_indexed, train_and_evaluate, ExperimentConfig,
    ExperimentOutput, Table,
};
use crate::controllers::{
    make_dmlp_controller, make_gf_controller, make_gnn_controller, make_mlp_controller,
    make_open_loop_controller, make_optimal_controller, Controller, ControllerKind, ModelFile,
};
use crate::error::Result;
use crate::gnn::PenaltyKind;
use crate::training::{evaluate, EvalSummary, Normalizer, TrainingLog};

pub(crate) const ORDER: [ControllerKind; 6] = [
    ControllerKind::Optimal,
    ControllerKind::Mlp,
    ControllerKind::Dmlp,
    ControllerKind::Gnn,
    ControllerKind::Gf,
    ControllerKind::OpenLoop,
];

struct RealizationResult {
    evals: Vec<(ControllerKind, EvalSummary, usize)>,
    models: Vec<(String, serde_json::Value)>,
    curves: Vec<(ControllerKind, TrainingLog)>,
}

fn one_realization(cfg: &ExperimentConfig, r: usize) -> Result<RealizationResult> {
    let real = make_realization(cfg, r, cfg.n_nodes, cfg.a_norm)?;
    let cost = cfg.cost();
    let d = &real.system;
    let mut evals = Vec::new();
    let mut models = Vec::new();
    let mut curves = Vec::new();
    let mut fixed = |kind, c: &dyn Controller| -> Result<()> {
        let e = evaluate(
            c,
            d,
            &cost,
            &real.test_states,
            cfg.horizon,
            Normalizer::OptimalCost,
        )?;
        evals.push((kind, e, c.descriptor().n_params));
        Ok(())
    };
    fixed(ControllerKind::Optimal, &make_optimal_controller(d, &cost)?)?;

    let mlp = make_mlp_controller(cfg.n_nodes, cfg.mlp_hidden_factor, &mut cfg.init_rng(r, 1))?;
    let t = train_and_evaluate(
        cfg,
        &real,
        &mlp,
        &cfg.train_for(r, 1, cfg.mlp_lr, PenaltyKind::None),
    )?;
    evals.push((ControllerKind::Mlp, t.eval, t.ctrl.descriptor().n_params));
    if r == 0 {
        curves.push((ControllerKind::Mlp, t.log));
        models.push((
            "model_mlp".into(),
            serde_json::to_value(ModelFile::Mlp(t.ctrl))?,
        ));
    }

    let dmlp = make_dmlp_controller(cfg.n_nodes, cfg.dmlp_hidden, &mut cfg.init_rng(r, 2))?;
    let t = train_and_evaluate(
        cfg,
        &real,
        &dmlp,
        &cfg.train_for(r, 2, cfg.dmlp_lr, PenaltyKind::None),
    )?;
    evals.push((ControllerKind::Dmlp, t.eval, t.ctrl.descriptor().n_params));
    if r == 0 {
        curves.push((ControllerKind::Dmlp, t.log));
        models.push((
            "model_dmlp".into(),
            serde_json::to_value(ModelFile::Dmlp(t.ctrl))?,
        ));
    }

    let gnn = make_gnn_controller(
        1,
        cfg.gnn.features,
        cfg.gnn.order,
        real.interval,
        &mut cfg.init_rng(r, 3),
    )?;
    let t = train_and_evaluate(
        cfg,
        &real,
        &gnn,
        &cfg.train_for(r, 3, cfg.gnn.lr, PenaltyKind::None),
    )?;
    evals.push((ControllerKind::Gnn, t.eval, t.ctrl.descriptor().n_params));
    if r == 0 {
        curves.push((ControllerKind::Gnn, t.log));
        models.push((
            "model_gnn".into(),
            serde_json::to_value(ModelFile::from_gnn(&t.ctrl))?,
        ));
    }

    let gf = make_gf_controller(
        1,
        cfg.gf.features,
        cfg.gf.order,
        real.interval,
        &mut cfg.init_rng(r, 4),
    )?;
    let t = train_and_evaluate(
        cfg,
        &real,
        &gf,
        &cfg.train_for(r, 4, cfg.gf.lr, PenaltyKind::None),
    )?;
    evals.push((ControllerKind::Gf, t.eval, t.ctrl.descriptor().n_params));
    if r == 0 {
        curves.push((ControllerKind::Gf, t.log));
        models.push((
            "model_gf".into(),
            serde_json::to_value(ModelFile::from_gnn(&t.ctrl))?,
        ));
    }

    let ol = make_open_loop_controller(1);
    let e = evaluate(
        &ol,
        d,
        &cost,
        &real.test_states,
        cfg.horizon,
        Normalizer::OptimalCost,
    )?;
    evals.push((ControllerKind::OpenLoop, e, 0));
    Ok(RealizationResult {
        evals,
        models,
        curves,
    })
}

pub fn run_exp2(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let results = par_indexed(cfg.n_realizations, |r| {
        one_realization(cfg, r).map_err(|e| e.to_string())
    });
    let mut per_real = Table::new(
        "exp2_realizations",
        &[
            "realization",
            "controller",
            "normalized_cost",
            "median_trajectory",
            "stable_ratio",
            "n_params",
            "status",
        ],
    );
    let mut json = Vec::new();
    let mut curves = Table::new(
        "exp2_training_curves",
        &[
            "controller",
            "update",
            "epoch",
            "batch_loss",
            "validation_normalized",
        ],
    );
    for (r, res) in results.iter().enumerate() {
        match res {
            Ok(rr) => {
                for (k, e, n) in &rr.evals {
                    per_real.push(vec![
                        r.to_string(),
                        k.label().into(),
                        fmt(e.mean),
                        fmt(e.median),
                        fmt(e.stable_ratio),
                        n.to_string(),
                        "ok".into(),
                    ]);
                }
                if r == 0 {
                    json.extend(rr.models.iter().cloned());
                    for (k, log) in &rr.curves {
                        for rec in &log.records {
                            let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
                            curves.push(vec![
                                k.label().into(),
                                rec.update.to_string(),
                                rec.epoch.to_string(),
                                opt(rec.batch_loss),
                                opt(rec.validation_normalized),
                            ]);
                        }
                    }
                }
            }
            Err(msg) => per_real.push(vec![
                r.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("failed: {}", msg.replace(',', ";")),
            ]),
        }
    }
    let mut summary_t = Table::new(
        "exp2_summary",
        &[
            "controller",
            "median",
            "std_realizations",
            "std_trajectories",
            "n_params",
            "n_ok",
        ],
    );
    let mut medians = Vec::new();
    for kind in ORDER {
        let evals: Vec<&EvalSummary> = results
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .flat_map(|rr| {
                rr.evals
                    .iter()
                    .filter(|(k, _, _)| *k == kind)
                    .map(|(_, e, _)| e)
            })
            .collect();
        let n_params = results
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .flat_map(|rr| {
                rr.evals
                    .iter()
                    .filter(|(k, _, _)| *k == kind)
                    .map(|(_, _, n)| *n)
            })
            .next()
            .unwrap_or(0);
        if evals.is_empty() {
            continue;
        }
        let st = cell_stats(&evals);
        summary_t.push(vec![
            kind.label().into(),
            fmt(st.median),
            fmt(st.std_realizations),
            fmt(st.std_trajectories),
            n_params.to_string(),
            st.n_ok.to_string(),
        ]);
        medians.push((kind, st.median, n_params));
    }
    let mut summary: Vec<String> = medians
        .iter()
        .map(|(k, m, n)| {
            format!(
                "{:>9}: median normalized cost {m:.4} ({n} parameters)",
                k.label()
            )
        })
        .collect();
    let get = |k| {
        medians
            .iter()
            .find(|(kk, _, _)| *kk == k)
            .map(|(_, m, _)| *m)
    };
    if let (Some(o), Some(mlp), Some(gnn), Some(gf)) = (
        get(ControllerKind::Optimal),
        get(ControllerKind::Mlp),
        get(ControllerKind::Gnn),
        get(ControllerKind::Gf),
    ) {
        summary.push(format!(
            "ordering optim <= mlp <= gnn <= gf: {}",
            o <= mlp && mlp <= gnn && gnn <= gf
        ));
    }
    let failed = results.iter().filter(|r| r.is_err()).count();
    summary.push(format!("failed realizations: {failed}"));
    Ok(ExperimentOutput {
        tables: vec![summary_t, per_real, curves],
        json,
        summary,
        passed: true,
    })
}
