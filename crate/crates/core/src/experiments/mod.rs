//! Experiment drivers: configuration, seeded realizations, parallel execution
//! in index order, and CSV/JSON output with a reproducibility header.

mod exp1;
mod exp2;
mod exp3;
mod exp4;
mod exp5;
pub mod verify;

pub use exp1::run_exp1;
pub use exp2::run_exp2;
pub use exp3::run_exp3;
pub use exp4::run_exp4;
pub use exp5::run_exp5;
pub use verify::{run_verify, SuiteResult, VerifyReport};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controllers::Differentiable;
use crate::error::{Error, Result};
use crate::filters::{default_interval, GraphSignal};
use crate::gnn::PenaltyKind;
use crate::network::{sample_connected_system, CostSpec, DistributedSystem, Graph};
use crate::numerics::RngStream;
use crate::training::{
    evaluate, median, parse_key_values, sample_initial_states, std_dev, train, EvalSummary,
    Normalizer, TrainConfig,
};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

const TAG_SYSTEM: u32 = 10;
const TAG_TEST: u32 = 11;
const TAG_TRAIN: u32 = 12;
const TAG_INIT: u32 = 13;
const TAG_PERTURB: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    Exp5,
    Verify,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Exp4 => "exp4",
            Experiment::Exp5 => "exp5",
            Experiment::Verify => "verify",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Experiment::Exp1),
            "exp2" => Ok(Experiment::Exp2),
            "exp3" => Ok(Experiment::Exp3),
            "exp4" => Ok(Experiment::Exp4),
            "exp5" => Ok(Experiment::Exp5),
            "verify" => Ok(Experiment::Verify),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" | "full" => Ok(Scale::Paper),
            other => Err(Error::Config(format!(
                "unknown scale '{other}' (expected desk or paper)"
            ))),
        }
    }
}

/// Architecture and learning rate of a graph-filter-based controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSetup {
    pub features: usize,
    pub order: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub scale: Scale,
    pub seed: u64,
    pub n_nodes: usize,
    pub knn_k: usize,
    pub a_norm: f64,
    pub b_norm: f64,
    pub horizon: usize,
    pub n_realizations: usize,
    pub n_test: usize,
    pub train: TrainConfig,
    pub features: Vec<usize>,
    pub orders: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub gnn: FilterSetup,
    pub gf: FilterSetup,
    pub mlp_hidden_factor: usize,
    pub mlp_lr: f64,
    pub dmlp_hidden: usize,
    pub dmlp_lr: f64,
    pub a_norm_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub node_grid: Vec<usize>,
    pub penalties: Vec<PenaltyKind>,
    /// Multiplies the instance counts of the verification suites.
    pub verify_scale: f64,
    /// Multiplies the computed stability constant inside the input-state
    /// stability audit; anything below 1 is a deliberate negative control.
    pub verify_xi_patch: f64,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, scale: Scale) -> Self {
        let (n_nodes, horizon, n_realizations, train) = match scale {
            Scale::Desk => (20, 30, 10, TrainConfig::desk()),
            Scale::Paper => (50, 50, 100, TrainConfig::default()),
        };
        let node_grid = match scale {
            Scale::Desk => vec![20, 25, 30, 35, 40],
            Scale::Paper => vec![50, 63, 75, 87, 100],
        };
        let mut cfg = ExperimentConfig {
            experiment,
            scale,
            seed: 1,
            n_nodes,
            knn_k: 5,
            a_norm: 0.995,
            b_norm: 1.0,
            horizon,
            n_realizations,
            n_test: 50,
            train,
            features: vec![16, 32, 64],
            orders: vec![2, 3, 4],
            learning_rates: vec![0.005, 0.01, 0.05],
            gnn: FilterSetup {
                features: 16,
                order: 4,
                lr: 0.01,
            },
            gf: FilterSetup {
                features: 64,
                order: 4,
                lr: 0.005,
            },
            mlp_hidden_factor: 16,
            mlp_lr: 0.005,
            dmlp_hidden: 16,
            dmlp_lr: 0.01,
            a_norm_grid: vec![0.95, 0.96, 0.97, 0.98, 0.99, 0.995, 1.0, 1.01],
            eps_grid: vec![0.0, 0.01, 0.0178, 0.0316, 0.0562, 0.1],
            node_grid,
            penalties: vec![
                PenaltyKind::None,
                PenaltyKind::Size,
                PenaltyKind::Lipschitz,
                PenaltyKind::Both,
            ],
            verify_scale: 1.0,
            verify_xi_patch: 1.0,
        };
        cfg.train.horizon = horizon;
        if scale == Scale::Desk && experiment == Experiment::Exp1 {
            // the 27-cell grid times two controllers dominates desk runtime
            cfg.n_realizations = 3;
        }
        if scale == Scale::Desk && experiment == Experiment::Exp2 {
            // with 100 states the GNN/GF gap sits below the spread across realizations
            cfg.train.train_size = 500;
        }
        cfg
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
        }
        fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            let out: Vec<T> = v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse(key, s))
                .collect::<Result<_>>()?;
            if out.is_empty() {
                return Err(Error::Config(format!("'{key}' needs at least one value")));
            }
            Ok(out)
        }
        match key {
            "experiment" => self.experiment = value.parse()?,
            "scale" => self.scale = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "n_nodes" | "nodes" => self.n_nodes = parse(key, value)?,
            "knn_k" => self.knn_k = parse(key, value)?,
            "a_norm" => self.a_norm = parse(key, value)?,
            "b_norm" => self.b_norm = parse(key, value)?,
            "horizon" => {
                self.horizon = parse(key, value)?;
                self.train.horizon = self.horizon;
            }
            "n_realizations" | "realizations" => self.n_realizations = parse(key, value)?,
            "n_test" => self.n_test = parse(key, value)?,
            "features" => self.features = list(key, value)?,
            "orders" | "order" => self.orders = list(key, value)?,
            "learning_rates" | "lrs" => self.learning_rates = list(key, value)?,
            "gnn_features" => self.gnn.features = parse(key, value)?,
            "gnn_order" => self.gnn.order = parse(key, value)?,
            "gnn_lr" => self.gnn.lr = parse(key, value)?,
            "gf_features" => self.gf.features = parse(key, value)?,
            "gf_order" => self.gf.order = parse(key, value)?,
            "gf_lr" => self.gf.lr = parse(key, value)?,
            "mlp_hidden_factor" => self.mlp_hidden_factor = parse(key, value)?,
            "mlp_lr" => self.mlp_lr = parse(key, value)?,
            "dmlp_hidden" => self.dmlp_hidden = parse(key, value)?,
            "dmlp_lr" => self.dmlp_lr = parse(key, value)?,
            "a_norm_grid" => self.a_norm_grid = list(key, value)?,
            "eps_grid" => self.eps_grid = list(key, value)?,
            "node_grid" => self.node_grid = list(key, value)?,
            "penalties" => self.penalties = list(key, value)?,
            "verify_scale" => self.verify_scale = parse(key, value)?,
            "verify_xi_patch" => self.verify_xi_patch = parse(key, value)?,
            other => {
                let train_key = other.strip_prefix("train.").unwrap_or(other);
                self.train.set(train_key, value)?;
                if train_key == "horizon" {
                    self.horizon = self.train.horizon;
                }
            }
        }
        Ok(())
    }

    /// Applies a `key = value` file over the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Reads a config file; `experiment` and `scale` keys in the file pick the
    /// defaults it is layered over.
    pub fn from_file(path: &Path, experiment: Experiment, scale: Scale) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, experiment, scale)
    }

    /// Same as [`ExperimentConfig::from_file`] on in-memory text.
    pub fn from_text(text: &str, experiment: Experiment, scale: Scale) -> Result<Self> {
        let pairs = parse_key_values(text)?;
        let find = |k: &str| {
            pairs
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
        };
        let exp = find("experiment")
            .map(str::parse)
            .transpose()?
            .unwrap_or(experiment);
        let sc = find("scale").map(str::parse).transpose()?.unwrap_or(scale);
        let mut cfg = ExperimentConfig::new(exp, sc);
        for (k, v) in pairs {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let counts = [
            ("n_nodes", self.n_nodes),
            ("knn_k", self.knn_k),
            ("horizon", self.horizon),
            ("n_realizations", self.n_realizations),
            ("n_test", self.n_test),
        ];
        if let Some((k, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        if self.knn_k >= self.n_nodes {
            return Err(Error::Config("knn_k must be smaller than n_nodes".into()));
        }
        let empty = match self.experiment {
            Experiment::Exp1 => (self.features.is_empty()
                || self.orders.is_empty()
                || self.learning_rates.is_empty())
            .then_some("features/orders/learning_rates"),
            Experiment::Exp3 => self.a_norm_grid.is_empty().then_some("a_norm_grid"),
            Experiment::Exp4 => (self.eps_grid.is_empty() || self.penalties.is_empty())
                .then_some("eps_grid/penalties"),
            Experiment::Exp5 => self.node_grid.is_empty().then_some("node_grid"),
            _ => None,
        };
        if let Some(name) = empty {
            return Err(Error::Config(format!(
                "{name} must be non-empty for {}",
                self.experiment.name()
            )));
        }
        if self.experiment == Experiment::Exp5 && self.node_grid.iter().any(|&n| n <= self.knn_k) {
            return Err(Error::Config(
                "every node_grid entry must exceed knn_k".into(),
            ));
        }
        if !(self.verify_scale > 0.0) {
            return Err(Error::Config("verify_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> String {
        fn join<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment.name());
        let _ = writeln!(
            s,
            "scale = {}",
            if self.scale == Scale::Desk {
                "desk"
            } else {
                "paper"
            }
        );
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_nodes = {}", self.n_nodes);
        let _ = writeln!(s, "knn_k = {}", self.knn_k);
        let _ = writeln!(s, "a_norm = {}", self.a_norm);
        let _ = writeln!(s, "b_norm = {}", self.b_norm);
        let _ = writeln!(s, "n_realizations = {}", self.n_realizations);
        let _ = writeln!(s, "n_test = {}", self.n_test);
        let _ = writeln!(s, "features = {}", join(&self.features));
        let _ = writeln!(s, "orders = {}", join(&self.orders));
        let _ = writeln!(s, "learning_rates = {}", join(&self.learning_rates));
        let _ = writeln!(s, "gnn_features = {}", self.gnn.features);
        let _ = writeln!(s, "gnn_order = {}", self.gnn.order);
        let _ = writeln!(s, "gnn_lr = {}", self.gnn.lr);
        let _ = writeln!(s, "gf_features = {}", self.gf.features);
        let _ = writeln!(s, "gf_order = {}", self.gf.order);
        let _ = writeln!(s, "gf_lr = {}", self.gf.lr);
        let _ = writeln!(s, "mlp_hidden_factor = {}", self.mlp_hidden_factor);
        let _ = writeln!(s, "mlp_lr = {}", self.mlp_lr);
        let _ = writeln!(s, "dmlp_hidden = {}", self.dmlp_hidden);
        let _ = writeln!(s, "dmlp_lr = {}", self.dmlp_lr);
        let _ = writeln!(s, "a_norm_grid = {}", join(&self.a_norm_grid));
        let _ = writeln!(s, "eps_grid = {}", join(&self.eps_grid));
        let _ = writeln!(s, "node_grid = {}", join(&self.node_grid));
        let _ = writeln!(s, "penalties = {}", join(&self.penalties));
        let _ = writeln!(s, "verify_scale = {}", self.verify_scale);
        let _ = writeln!(s, "verify_xi_patch = {}", self.verify_xi_patch);
        // training keys; the horizon lives here
        s.push_str(
            &self
                .train
                .to_key_values()
                .replace("seed = ", "train.seed = "),
        );
        s
    }

    /// SHA-256 of the canonical key=value rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_key_values().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub(crate) fn cost(&self) -> CostSpec {
        CostSpec::identity(1, 1)
    }

    pub(crate) fn root(&self) -> RngStream {
        RngStream::new(self.seed, 0)
    }

    /// Training config for one realization and controller slot.
    pub(crate) fn train_for(
        &self,
        realization: usize,
        slot: u64,
        lr: f64,
        penalty: PenaltyKind,
    ) -> TrainConfig {
        let mut t = self.train.clone();
        t.horizon = self.horizon;
        t.learning_rate = lr;
        t.penalty = penalty;
        t.seed = self
            .root()
            .fork(TAG_TRAIN, realization as u64 * 64 + slot)
            .next_u64();
        t
    }

    pub(crate) fn init_rng(&self, realization: usize, slot: u64) -> RngStream {
        self.root().fork(TAG_INIT, realization as u64 * 64 + slot)
    }
}

/// One sampled system with its held-out test states.
#[derive(Debug, Clone)]
pub struct Realization {
    pub index: usize,
    pub graph: Graph,
    pub system: DistributedSystem,
    pub interval: (f64, f64),
    pub test_states: Vec<GraphSignal>,
}

/// The `index`-th realization at `n` nodes and system norm `a_norm`. Systems
/// at different `a_norm` share graph and spectral directions.
pub fn make_realization(
    cfg: &ExperimentConfig,
    index: usize,
    n: usize,
    a_norm: f64,
) -> Result<Realization> {
    let key = index as u64 * 1024 + n as u64;
    let mut rng = cfg.root().fork(TAG_SYSTEM, key);
    let (graph, system) = sample_connected_system(n, cfg.knn_k, a_norm, cfg.b_norm, &mut rng)?;
    let interval = default_interval(&[&system.support])?;
    let test_states = sample_initial_states(cfg.n_test, n, 1, &mut cfg.root().fork(TAG_TEST, key));
    Ok(Realization {
        index,
        graph,
        system,
        interval,
        test_states,
    })
}

pub(crate) fn perturb_rng(
    cfg: &ExperimentConfig,
    realization: usize,
    eps_index: usize,
) -> RngStream {
    cfg.root()
        .fork(TAG_PERTURB, realization as u64 * 1024 + eps_index as u64)
}

/// Runs `f(0..n)` on the worker pool and returns results in index order.
pub fn par_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

/// A CSV table rendered deterministically with a metadata header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(
            row.len(),
            self.header.len(),
            "row width for table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn render(&self, cfg: &ExperimentConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# experiment: {}", cfg.experiment.name());
        let _ = writeln!(s, "# config_sha256: {}", cfg.hash());
        let _ = writeln!(s, "# seed: {}", cfg.seed);
        let _ = writeln!(s, "# version: gnnctl {CODE_VERSION}");
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    /// Index of a named column.
    pub fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Rows whose named columns equal the given values.
    pub fn select<'a>(
        &'a self,
        filters: &[(&str, &str)],
    ) -> impl Iterator<Item = &'a Vec<String>> + 'a {
        let idx: Vec<(usize, String)> = filters
            .iter()
            .map(|(k, v)| (self.col(k).unwrap_or(usize::MAX), v.to_string()))
            .collect();
        self.rows
            .iter()
            .filter(move |r| idx.iter().all(|(i, v)| r.get(*i) == Some(v)))
    }

    pub fn value(&self, row: &[String], col: &str) -> Option<f64> {
        self.col(col)
            .and_then(|i| row.get(i))
            .and_then(|v| v.parse().ok())
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Tables, JSON documents and console lines produced by one experiment.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub json: Vec<(String, serde_json::Value)>,
    pub summary: Vec<String>,
    /// False when an audit-style run found a violation.
    pub passed: bool,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `<dir>/<name>.csv`, `<dir>/<name>.json` and `<dir>/config.cfg`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let cfg_path = dir.join("config.cfg");
        std::fs::write(&cfg_path, cfg.to_key_values())?;
        written.push(cfg_path);
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, t.render(cfg))?;
            written.push(p);
        }
        for (name, v) in &self.json {
            let p = dir.join(format!("{name}.json"));
            std::fs::write(&p, serde_json::to_string_pretty(v)?)?;
            written.push(p);
        }
        Ok(written)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Exp1 => run_exp1(cfg),
        Experiment::Exp2 => run_exp2(cfg),
        Experiment::Exp3 => run_exp3(cfg),
        Experiment::Exp4 => run_exp4(cfg),
        Experiment::Exp5 => run_exp5(cfg),
        Experiment::Verify => run_verify(cfg).map(|r| r.into_output()),
    }
}

/// A trained controller, its outcome on the held-out states and its log.
pub(crate) struct Trained<P> {
    pub ctrl: P,
    pub eval: EvalSummary,
    pub log: crate::training::TrainingLog,
}

/// Trains on the realization's system and evaluates with the optimal-cost normaliser.
pub(crate) fn train_and_evaluate<P: Differentiable>(
    cfg: &ExperimentConfig,
    real: &Realization,
    init: &P,
    train_cfg: &TrainConfig,
) -> Result<Trained<P>> {
    let cost = cfg.cost();
    let out = train(init, &real.system, &cost, train_cfg)?;
    let eval = evaluate(
        &out.best,
        &real.system,
        &cost,
        &real.test_states,
        cfg.horizon,
        Normalizer::OptimalCost,
    )?;
    Ok(Trained {
        ctrl: out.best,
        eval,
        log: out.log,
    })
}

/// Median, spread across realizations, and spread across all trajectories.
pub(crate) struct CellStats {
    pub median: f64,
    pub std_realizations: f64,
    pub std_trajectories: f64,
    pub n_ok: usize,
}

pub(crate) fn cell_stats(evals: &[&EvalSummary]) -> CellStats {
    let per: Vec<f64> = evals.iter().map(|e| e.mean).collect();
    let all: Vec<f64> = evals
        .iter()
        .flat_map(|e| e.values.iter().copied())
        .collect();
    CellStats {
        median: median(&per),
        std_realizations: std_dev(&per),
        std_trajectories: std_dev(&all),
        n_ok: evals.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip_and_hash() {
        let mut cfg = ExperimentConfig::new(Experiment::Exp4, Scale::Paper);
        cfg.eps_grid = vec![0.01, 0.1];
        cfg.train.penalty = PenaltyKind::Size;
        let mut back = ExperimentConfig::new(Experiment::Exp1, Scale::Desk);
        back.apply_text(&cfg.to_key_values()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        back.seed += 1;
        assert_ne!(back.hash(), cfg.hash());
    }

    #[test]
    fn scale_defaults() {
        let d = ExperimentConfig::new(Experiment::Exp2, Scale::Desk);
        assert_eq!(
            (d.n_nodes, d.horizon, d.train.train_size, d.n_realizations),
            (20, 30, 500, 10)
        );
        let d3 = ExperimentConfig::new(Experiment::Exp3, Scale::Desk);
        assert_eq!(d3.train.train_size, 100);
        let p = ExperimentConfig::new(Experiment::Exp2, Scale::Paper);
        assert_eq!(
            (
                p.n_nodes,
                p.horizon,
                p.train.train_size,
                p.train.batch_size,
                p.train.epochs
            ),
            (50, 50, 500, 20, 30)
        );
        assert_eq!(p.train.validate_every, 5);
    }

    #[test]
    fn grids_must_be_non_empty() {
        let mut c = ExperimentConfig::new(Experiment::Exp3, Scale::Desk);
        c.a_norm_grid.clear();
        assert!(c.validate().is_err());
        assert!(c.set("eps_grid", "").is_err());
        assert!(c.set("bogus_key", "1").is_err());
    }

    #[test]
    fn realizations_are_reproducible() {
        let cfg = ExperimentConfig::new(Experiment::Exp2, Scale::Desk);
        let a = make_realization(&cfg, 3, 12, 0.995).unwrap();
        let b = make_realization(&cfg, 3, 12, 0.995).unwrap();
        assert_eq!(a.system, b.system);
        assert_eq!(a.test_states, b.test_states);
        let c = make_realization(&cfg, 3, 12, 1.01).unwrap();
        assert_eq!(a.system.support, c.system.support);
    }
}
