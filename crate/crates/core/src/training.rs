//! Batched ADAM training over random initial states with validation-based
//! model selection, plus the evaluation summary used by every experiment.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{make_optimal_controller, Controller, Differentiable};
use crate::error::{Error, Result};
use crate::filters::GraphSignal;
use crate::gnn::PenaltyKind;
use crate::network::{CostSpec, DistributedSystem};
use crate::numerics::RngStream;
use crate::simulation::{closed_loop_gradient, rollout};

const STREAM_TRAIN_STATES: u32 = 1;
const STREAM_VALID_STATES: u32 = 2;
const STREAM_SHUFFLE: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub train_size: usize,
    pub valid_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub validate_every: usize,
    pub horizon: usize,
    pub penalty: PenaltyKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Full-size protocol: 500 training states, batches of 20, 30 epochs,
    /// validation every 5 updates.
    fn default() -> Self {
        TrainConfig {
            train_size: 500,
            valid_size: 50,
            batch_size: 20,
            epochs: 30,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            validate_every: 5,
            horizon: 50,
            penalty: PenaltyKind::None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Laptop-sized defaults: 100 training states, horizon 30.
    pub fn desk() -> Self {
        TrainConfig {
            train_size: 100,
            valid_size: 20,
            horizon: 30,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("train_size", self.train_size),
            ("valid_size", self.valid_size),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("validate_every", self.validate_every),
            ("horizon", self.horizon),
        ];
        if let Some((k, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        if self.batch_size > self.train_size {
            return Err(Error::Config(format!(
                "batch_size {} exceeds train_size {}",
                self.batch_size, self.train_size
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        let betas_ok =
            (0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2);
        if !betas_ok || !(self.adam_eps > 0.0) {
            return Err(Error::Config(
                "ADAM betas must lie in [0, 1) and eps must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Sets one field from its textual `key = value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
        }
        match key {
            "train_size" => self.train_size = parse(key, value)?,
            "valid_size" => self.valid_size = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" | "lr" => self.learning_rate = parse(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            "validate_every" => self.validate_every = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "penalty" => self.penalty = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown training key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over `base`; `#` starts a comment.
    pub fn parse_with(base: TrainConfig, text: &str) -> Result<Self> {
        let mut cfg = base;
        for (key, value) in parse_key_values(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "train_size = {}\nvalid_size = {}\nbatch_size = {}\nepochs = {}\nlearning_rate = {}\n\
             adam_beta1 = {}\nadam_beta2 = {}\nadam_eps = {:e}\nvalidate_every = {}\nhorizon = {}\n\
             penalty = {}\nseed = {}\n",
            self.train_size,
            self.valid_size,
            self.batch_size,
            self.epochs,
            self.learning_rate,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_eps,
            self.validate_every,
            self.horizon,
            self.penalty,
            self.seed
        )
    }
}

/// Splits `key = value` lines, dropping blank lines and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            ))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// Bias-corrected ADAM update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::dim(
            "adam_step",
            params.len(),
            grads.len().max(state.m.len()),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}

/// `n_states` signals of shape `n_nodes × f_dim` with i.i.d. standard Gaussian entries.
pub fn sample_initial_states(
    n_states: usize,
    n_nodes: usize,
    f_dim: usize,
    rng: &mut RngStream,
) -> Vec<GraphSignal> {
    (0..n_states)
        .map(|_| rng.normal_matrix(n_nodes, f_dim))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub epoch: usize,
    /// Mean batch cost plus penalty; `None` for the pre-training checkpoint.
    pub batch_loss: Option<f64>,
    pub penalty: f64,
    pub skipped: usize,
    pub validation_cost: Option<f64>,
    pub validation_normalized: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<UpdateRecord>,
}

impl TrainingLog {
    pub fn validations(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.records
            .iter()
            .filter_map(|r| r.validation_cost.map(|c| (r.update, c)))
    }

    pub fn skipped_total(&self) -> usize {
        self.records.iter().map(|r| r.skipped).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "update,epoch,batch_loss,penalty,skipped,validation_cost,validation_normalized"
        )?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{:.12e},{},{},{}",
                r.update,
                r.epoch,
                opt(r.batch_loss),
                r.penalty,
                r.skipped,
                opt(r.validation_cost),
                opt(r.validation_normalized)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<P> {
    pub best: P,
    pub best_update: usize,
    pub best_validation: f64,
    pub initial_validation: f64,
    pub log: TrainingLog,
}

/// Mean cost over `states`; a diverging rollout makes the mean infinite.
fn mean_rollout_cost(
    ctrl: &dyn Controller,
    d: &DistributedSystem,
    cost: &CostSpec,
    states: &[GraphSignal],
    horizon: usize,
) -> Result<Vec<f64>> {
    states
        .par_iter()
        .map(|x0| {
            let rec = rollout(d, ctrl, x0, horizon, cost, None)?;
            Ok(if rec.diverged_at.is_some() {
                f64::INFINITY
            } else {
                rec.total_cost
            })
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-trajectory gradients summed in index order and divided by the batch
/// size; diverging trajectories contribute zero.
pub fn batch_gradient<P: Differentiable>(
    ctrl: &P,
    d: &DistributedSystem,
    cost: &CostSpec,
    batch: &[&GraphSignal],
    horizon: usize,
) -> Result<(f64, Vec<f64>, usize)> {
    let per: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_iter()
        .map(|x0| closed_loop_gradient(ctrl, d, cost, x0, horizon))
        .collect();
    let n = ctrl.n_params();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    let mut skipped = 0;
    for r in per {
        match r {
            Ok((l, g)) => {
                loss += l;
                for (acc, gi) in grad.iter_mut().zip(&g) {
                    *acc += gi;
                }
            }
            Err(Error::Diverged { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad, skipped))
}

/// Minimises the mean closed-loop cost (plus the configured penalty) over
/// random initial states and returns the best-validating snapshot.
pub fn train<P: Differentiable>(
    init: &P,
    d: &DistributedSystem,
    cost: &CostSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<P>> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed, 0);
    let train_states = sample_initial_states(
        cfg.train_size,
        d.n_nodes(),
        d.f_dim,
        &mut root.fork(STREAM_TRAIN_STATES, 0),
    );
    let valid_states = sample_initial_states(
        cfg.valid_size,
        d.n_nodes(),
        d.f_dim,
        &mut root.fork(STREAM_VALID_STATES, 0),
    );
    let valid_reference: Option<Vec<f64>> = match make_optimal_controller(d, cost) {
        Ok(opt) => Some(mean_rollout_cost(
            &opt,
            d,
            cost,
            &valid_states,
            cfg.horizon,
        )?),
        Err(_) => None,
    };
    let validate = |c: &P| -> Result<(f64, Option<f64>)> {
        let costs = mean_rollout_cost(c, d, cost, &valid_states, cfg.horizon)?;
        let normalized = valid_reference.as_ref().map(|r| {
            let ratios: Vec<f64> = costs
                .iter()
                .zip(r)
                .map(|(c, o)| if *o > 0.0 { c / o } else { 1.0 })
                .collect();
            mean(&ratios)
        });
        Ok((mean(&costs), normalized))
    };

    let mut ctrl = init.clone();
    let mut params = ctrl.params();
    let mut adam = AdamState::new(params.len(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut log = TrainingLog::default();
    let (v0, n0) = validate(&ctrl)?;
    log.records.push(UpdateRecord {
        update: 0,
        epoch: 0,
        batch_loss: None,
        penalty: ctrl.penalty(cfg.penalty).0,
        skipped: 0,
        validation_cost: Some(v0),
        validation_normalized: n0,
    });
    let mut best = ctrl.clone();
    let mut best_update = 0;
    let mut best_validation = v0;

    let mut update = 0;
    for epoch in 0..cfg.epochs {
        let order = root
            .fork(STREAM_SHUFFLE, epoch as u64)
            .permutation(cfg.train_size);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&GraphSignal> = chunk.iter().map(|&i| &train_states[i]).collect();
            let (loss, mut grad, skipped) = batch_gradient(&ctrl, d, cost, &batch, cfg.horizon)?;
            if 2 * skipped > batch.len() {
                return Err(Error::TrainingFailed {
                    update: update + 1,
                    diverged: skipped,
                    batch: batch.len(),
                });
            }
            let (pen, pen_grad) = ctrl.penalty(cfg.penalty);
            for (g, pg) in grad.iter_mut().zip(&pen_grad) {
                *g += pg;
            }
            adam_step(&mut params, &grad, &mut adam, cfg.learning_rate)?;
            ctrl.set_params(&params)?;
            update += 1;
            let mut rec = UpdateRecord {
                update,
                epoch,
                batch_loss: Some(loss + pen),
                penalty: pen,
                skipped,
                validation_cost: None,
                validation_normalized: None,
            };
            if update % cfg.validate_every == 0 {
                let (v, nv) = validate(&ctrl)?;
                rec.validation_cost = Some(v);
                rec.validation_normalized = nv;
                if v < best_validation {
                    best_validation = v;
                    best_update = update;
                    best = ctrl.clone();
                }
            }
            log.records.push(rec);
        }
    }
    Ok(TrainOutcome {
        best,
        best_update,
        best_validation,
        initial_validation: v0,
        log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    OptimalCost,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    /// Raw rollout costs; infinite for diverging trajectories.
    pub costs: Vec<f64>,
    /// Costs after normalisation (equal to `costs` for [`Normalizer::Raw`]).
    pub values: Vec<f64>,
    pub stable: Vec<bool>,
    pub final_norm_ratio: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub stable_ratio: f64,
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mu = mean(v);
    (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Rolls out `ctrl` from every test state and summarises the costs.
pub fn evaluate(
    ctrl: &dyn Controller,
    d: &DistributedSystem,
    cost: &CostSpec,
    test_states: &[GraphSignal],
    horizon: usize,
    normalizer: Normalizer,
) -> Result<EvalSummary> {
    if test_states.is_empty() {
        return Err(Error::Precondition(
            "evaluate needs at least one test state".into(),
        ));
    }
    let records: Vec<_> = test_states
        .par_iter()
        .map(|x0| rollout(d, ctrl, x0, horizon, cost, None))
        .collect::<Result<_>>()?;
    let costs: Vec<f64> = records
        .iter()
        .map(|r| {
            if r.diverged_at.is_some() {
                f64::INFINITY
            } else {
                r.total_cost
            }
        })
        .collect();
    let values = match normalizer {
        Normalizer::Raw => costs.clone(),
        Normalizer::OptimalCost => {
            let opt = make_optimal_controller(d, cost)?;
            let reference = mean_rollout_cost(&opt, d, cost, test_states, horizon)?;
            costs
                .iter()
                .zip(&reference)
                .map(|(c, o)| if *o > 0.0 { c / o } else { 1.0 })
                .collect()
        }
    };
    let stable: Vec<bool> = records.iter().map(|r| r.stable).collect();
    let final_norm_ratio = records
        .iter()
        .map(|r| {
            if r.diverged_at.is_some() {
                f64::INFINITY
            } else {
                let n0 = r.state_norms[0];
                let nt = *r.state_norms.last().expect("initial state present");
                if n0 > 0.0 {
                    nt / n0
                } else {
                    0.0
                }
            }
        })
        .collect();
    let stable_ratio = stable.iter().filter(|&&s| s).count() as f64 / stable.len() as f64;
    Ok(EvalSummary {
        mean: mean(&values),
        median: median(&values),
        std: std_dev(&values),
        costs,
        values,
        stable,
        final_norm_ratio,
        stable_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_is_lr_in_gradient_direction() {
        let mut p = [0.0];
        let mut s = AdamState::new(1, 0.9, 0.999, 1e-8);
        adam_step(&mut p, &[1.0], &mut s, 0.01).unwrap();
        assert!((p[0] + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = [0.3, -1.0];
        let mut s = AdamState::new(2, 0.9, 0.999, 1e-8);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1).unwrap();
        assert_eq!(p, [0.3, -1.0]);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut p = [0.0; 2];
        let mut s = AdamState::new(2, 0.9, 0.999, 1e-8);
        assert!(adam_step(&mut p, &[1.0], &mut s, 0.1).is_err());
    }

    #[test]
    fn key_value_parsing() {
        let cfg = TrainConfig::parse_with(
            TrainConfig::desk(),
            "# comment\nepochs = 3\n\nlr=0.05  # inline\npenalty = both\n",
        )
        .unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.learning_rate, 0.05);
        assert_eq!(cfg.penalty, PenaltyKind::Both);
        assert!(TrainConfig::parse_with(TrainConfig::desk(), "nonsense").is_err());
        assert!(TrainConfig::parse_with(TrainConfig::desk(), "bogus = 1").is_err());
        assert!(TrainConfig::parse_with(TrainConfig::desk(), "batch_size = 1000").is_err());
    }

    #[test]
    fn key_values_roundtrip() {
        let cfg = TrainConfig {
            penalty: PenaltyKind::Size,
            seed: 99,
            ..TrainConfig::default()
        };
        let back = TrainConfig::parse_with(TrainConfig::desk(), &cfg.to_key_values()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn full_scale_defaults() {
        let c = TrainConfig::default();
        assert_eq!(
            (c.train_size, c.batch_size, c.epochs, c.validate_every),
            (500, 20, 30, 5)
        );
        assert_eq!((c.adam_beta1, c.adam_beta2), (0.9, 0.999));
    }

    #[test]
    fn median_and_std() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((std_dev(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
