use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gnnctl::experiments::{run, Experiment, ExperimentConfig, Scale};

#[derive(Parser)]
#[command(
    name = "gnnctl",
    version,
    about = "Distributed GNN controllers for networked LQR"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep features, filter order and learning rate for GNN and GF controllers.
    Exp1(RunArgs),
    /// Compare every controller against the centralized optimum.
    Exp2(RunArgs),
    /// GNN against the open-loop system across a sweep of ||A||.
    Exp3(RunArgs),
    /// Train on one system, test on perturbed ones, per penalty variant.
    Exp4(RunArgs),
    /// Train at the base size and evaluate on larger systems.
    Exp5(RunArgs),
    /// Run every bound and equivariance fuzz suite.
    Verify(RunArgs),
    /// Print the resolved configuration without running anything.
    Config {
        experiment: Experiment,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Key-value configuration file (`key = value`, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; nothing is written when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    scale: Scale,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated perturbation sizes.
    #[arg(long)]
    eps_grid: Option<String>,
    /// Comma-separated values of ||A||.
    #[arg(long)]
    a_norm_grid: Option<String>,
    /// Comma-separated feature counts.
    #[arg(long)]
    features: Option<String>,
    /// Comma-separated filter orders.
    #[arg(long)]
    order: Option<String>,
    /// Comma-separated learning rates.
    #[arg(long)]
    lr: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (defaults to all cores); results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn resolve(&self, experiment: Experiment) -> gnnctl::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path, experiment, self.scale)?,
            None => ExperimentConfig::new(experiment, self.scale),
        };
        let seed = self.seed.map(|s| s.to_string());
        let nodes = self.nodes.map(|n| n.to_string());
        let horizon = self.horizon.map(|h| h.to_string());
        let realizations = self.realizations.map(|r| r.to_string());
        let flags = [
            ("seed", &seed),
            ("n_nodes", &nodes),
            ("horizon", &horizon),
            ("n_realizations", &realizations),
            ("eps_grid", &self.eps_grid),
            ("a_norm_grid", &self.a_norm_grid),
            ("features", &self.features),
            ("orders", &self.order),
            ("learning_rates", &self.lr),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                gnnctl::Error::Config(format!("override '{kv}' is not KEY=VALUE"))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(experiment: Experiment, args: &RunArgs) -> gnnctl::Result<bool> {
    let cfg = args.resolve(experiment)?;
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| gnnctl::Error::Config(format!("thread pool: {e}")))?;
    }
    eprintln!(
        "{} ({:?} scale, seed {}, config {})",
        experiment.name(),
        cfg.scale,
        cfg.seed,
        &cfg.hash()[..12]
    );
    let started = std::time::Instant::now();
    let out = run(&cfg)?;
    for line in &out.summary {
        println!("{line}");
    }
    if let Some(dir) = &args.out {
        for path in out.write(&cfg, dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    eprintln!("finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Exp1(a) => execute(Experiment::Exp1, a),
        Command::Exp2(a) => execute(Experiment::Exp2, a),
        Command::Exp3(a) => execute(Experiment::Exp3, a),
        Command::Exp4(a) => execute(Experiment::Exp4, a),
        Command::Exp5(a) => execute(Experiment::Exp5, a),
        Command::Verify(a) => execute(Experiment::Verify, a),
        Command::Config { experiment, args } => args.resolve(*experiment).map(|cfg| {
            print!("{}", cfg.to_key_values());
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
