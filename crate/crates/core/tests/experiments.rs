use std::process::Command;

use gnnctl::experiments::{run, Experiment, ExperimentConfig, ExperimentOutput, Scale};

const TINY: &str = "
n_nodes = 8
knn_k = 3
horizon = 8
n_realizations = 2
n_test = 5
train_size = 10
valid_size = 5
batch_size = 5
epochs = 1
features = 4
orders = 2
learning_rates = 0.01
gnn_features = 4
gf_features = 4
mlp_hidden_factor = 2
dmlp_hidden = 4
a_norm_grid = 0.995,1.01
eps_grid = 0,0.01
node_grid = 8,10
penalties = none,size
verify_scale = 0.02
";

fn tiny(experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig::from_text(TINY, experiment, Scale::Desk).unwrap()
}

fn tables(out: &ExperimentOutput) -> Vec<&str> {
    out.tables.iter().map(|t| t.name.as_str()).collect()
}

#[test]
fn every_experiment_runs_on_a_tiny_config() {
    let expected: [(Experiment, &[&str]); 6] = [
        (
            Experiment::Exp1,
            &[
                "exp1_cells",
                "exp1_realizations",
                "exp1_table",
                "exp1_best_order",
            ],
        ),
        (
            Experiment::Exp2,
            &["exp2_summary", "exp2_realizations", "exp2_training_curves"],
        ),
        (
            Experiment::Exp3,
            &["exp3_realizations", "exp3_traces", "exp3_cost_vs_a_norm"],
        ),
        (
            Experiment::Exp4,
            &["exp4_instances", "exp4_xi", "exp4_stability"],
        ),
        (Experiment::Exp5, &["exp5_realizations", "exp5_scalability"]),
        (Experiment::Verify, &["verify_suites"]),
    ];
    for (exp, names) in expected {
        let out = run(&tiny(exp)).unwrap();
        let mut got = tables(&out);
        let mut want = names.to_vec();
        got.sort();
        want.sort();
        assert_eq!(got, want, "{}", exp.name());
        assert!(
            out.tables.iter().all(|t| !t.rows.is_empty()),
            "{} has an empty table",
            exp.name()
        );
        assert!(!out.summary.is_empty());
    }
}

#[test]
fn exp2_reports_every_controller() {
    let out = run(&tiny(Experiment::Exp2)).unwrap();
    let t = out.table("exp2_summary").unwrap();
    let kinds: Vec<&str> = t.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(kinds, ["optim", "mlp", "dmlp", "gnn", "gf", "open-loop"]);
    let optim = t.select(&[("controller", "optim")]).next().unwrap();
    assert_eq!(t.value(optim, "median"), Some(1.0));
    for row in &t.rows {
        assert!(t.value(row, "median").unwrap() >= 1.0);
    }
}

#[test]
fn rendered_csv_carries_the_metadata_header() {
    let cfg = tiny(Experiment::Exp3);
    let out = run(&cfg).unwrap();
    let text = out.tables[0].render(&cfg);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# experiment: exp3");
    assert_eq!(lines[1], format!("# config_sha256: {}", cfg.hash()));
    assert_eq!(lines[2], "# seed: 1");
    assert!(lines[3].starts_with("# version: gnnctl "));
    assert_eq!(lines[4], out.tables[0].header.join(","));
    assert_eq!(lines.len(), 5 + out.tables[0].rows.len());
}

#[test]
fn outputs_depend_only_on_seed_and_config() {
    let cfg = tiny(Experiment::Exp4);
    let render = |threads: usize, cfg: &ExperimentConfig| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let out = pool.install(|| run(cfg).unwrap());
        out.tables.iter().map(|t| t.render(cfg)).collect::<Vec<_>>()
    };
    let a = render(1, &cfg);
    assert_eq!(a, render(3, &cfg));
    let mut other = cfg.clone();
    other.seed = 2;
    assert_ne!(
        a[0].lines().skip(5).collect::<Vec<_>>(),
        render(1, &other)[0].lines().skip(5).collect::<Vec<_>>()
    );
}

#[test]
fn config_validation() {
    let mut cfg = tiny(Experiment::Exp5);
    cfg.node_grid = vec![3];
    assert!(run(&cfg).is_err());
    let mut cfg = tiny(Experiment::Exp2);
    cfg.knn_k = 8;
    assert!(cfg.validate().is_err());
    assert!(ExperimentConfig::from_text("colour = blue", Experiment::Exp2, Scale::Desk).is_err());
    assert!(ExperimentConfig::from_text("eps_grid = ", Experiment::Exp4, Scale::Desk).is_err());
    let cfg = ExperimentConfig::from_text(
        "experiment = exp3\nscale = paper\n",
        Experiment::Exp1,
        Scale::Desk,
    )
    .unwrap();
    assert_eq!(
        (cfg.experiment, cfg.scale, cfg.n_nodes),
        (Experiment::Exp3, Scale::Paper, 50)
    );
}

fn gnnctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gnnctl"))
}

#[test]
fn cli_prints_the_resolved_config() {
    let out = gnnctl()
        .args([
            "config",
            "exp4",
            "--seed",
            "9",
            "--eps-grid",
            "0.01,0.1",
            "--set",
            "train.epochs=2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("experiment = exp4\n"));
    assert!(text.contains("seed = 9\n"));
    assert!(text.contains("eps_grid = 0.01,0.1\n"));
    assert!(text.contains("epochs = 2\n"));
}

#[test]
fn cli_runs_from_a_config_file_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.cfg");
    std::fs::write(&cfg_path, TINY).unwrap();
    let out_dir = dir.path().join("out");
    let status = gnnctl()
        .arg("exp5")
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .args(["--threads", "2"])
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("exp5_scalability.csv")).unwrap();
    assert!(csv.starts_with("# experiment: exp5\n"));
    let saved = std::fs::read_to_string(out_dir.join("config.cfg")).unwrap();
    let reloaded = ExperimentConfig::from_text(&saved, Experiment::Exp5, Scale::Desk).unwrap();
    assert!(csv.contains(&reloaded.hash()));
}

#[test]
fn cli_exit_codes() {
    let ok = gnnctl()
        .args(["verify", "--set", "verify_scale=0.02"])
        .output()
        .unwrap();
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert!(String::from_utf8(ok.stdout)
        .unwrap()
        .contains("input_state_stability"));

    // understating the stability constant must surface as a failed audit
    let neg = gnnctl()
        .args([
            "verify",
            "--set",
            "verify_scale=0.2",
            "--set",
            "verify_xi_patch=0.3",
        ])
        .output()
        .unwrap();
    assert_eq!(neg.status.code(), Some(1));

    let bad = gnnctl()
        .args(["exp2", "--set", "n_nodes=zero"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("error:"));
}
