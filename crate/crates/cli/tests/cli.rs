use std::path::Path;
use std::process::{Command, Output};

use simtune_core::harness::{read_metrics, strip_timestamps, RunSummary};

fn simtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simtune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_ok(args: &[&str]) {
    let out = simtune(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const ORACLE: &str = "env_id = \"bouncing_ball\"\nmethod = \"oracle_test\"\nrounds = 16\n\
                      factors = [2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]\n";

#[test]
fn oracle_run_reaches_ten_percent_at_round_twelve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "oracle.toml", ORACLE);
    let out = dir.path().join("run");
    run_ok(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let s = RunSummary::load(&out).unwrap();
    assert_eq!(s.first_round_below_10.unwrap(), vec![Some(12); 8]);
    assert_eq!(s.initial_mean_percent_error, Some(100.0));
    let rows = read_metrics(&out.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 17 * 8);
    assert!(rows.iter().all(|r| r.config_hash == s.config_hash));
    for f in ["config.toml", "run_state.json", "initial_mean.toml", "final_mean.toml"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    // The resolved config reproduces the run hash.
    let resolved = simtune_core::harness::RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(resolved.hash(), s.config_hash);
}

#[test]
fn dr_baseline_error_never_changes_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dr.toml",
        "env_id = \"sliding_block\"\nmethod = \"dr_baseline\"\nrounds = 4\npolicy_rollouts = 3\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["run", "--config", &cfg, "--seed", "2", "--out", a.to_str().unwrap()]);
    run_ok(&["run", "--config", &cfg, "--seed", "2", "--out", b.to_str().unwrap()]);
    let rows = read_metrics(&a.join("metrics.csv")).unwrap();
    for name in ["friction", "mass", "brightness"] {
        let errs: Vec<f64> = rows
            .iter()
            .filter(|r| r.param_name == name)
            .map(|r| r.percent_error.unwrap())
            .collect();
        assert_eq!(errs.len(), 5);
        assert!(errs.iter().all(|&e| e == errs[0]), "{name}: {errs:?}");
    }
    let text = |p: &Path| std::fs::read_to_string(p.join("metrics.csv")).unwrap();
    assert_eq!(strip_timestamps(&text(&a)), strip_timestamps(&text(&b)));
}

#[test]
fn blind_runs_leave_truth_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dr.toml",
        "env_id = \"damped_pendulum\"\nmethod = \"dr_baseline\"\nrounds = 2\n",
    );
    let out = dir.path().join("blind");
    run_ok(&["run", "--config", &cfg, "--blind", "--out", out.to_str().unwrap()]);
    let rows = read_metrics(&out.join("metrics.csv")).unwrap();
    assert!(rows
        .iter()
        .all(|r| r.hidden_real.is_none() && r.percent_error.is_none()));
    let s = RunSummary::load(&out).unwrap();
    assert!(s.blind && s.final_percent_error.is_none());

    // Oracle runs need the truth, so they cannot be blind.
    let oracle = write_config(dir.path(), "oracle.toml", ORACLE);
    let out = simtune(&[
        "run",
        "--config",
        &oracle,
        "--blind",
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_and_io_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.toml",
        "env_id = \"bouncing_ball\"\nr_sp = 1.0\nr_policy = 2.0\n",
    );
    let out = simtune(&["run", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3") && msg.contains("r_policy"), "{msg}");

    let missing = dir.path().join("nope.toml");
    let out = simtune(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    let out = simtune(&[
        "compare",
        dir.path().join("gone").to_str().unwrap(),
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn compare_groups_methods_and_checks_environments() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let dr = write_config(
        dir.path(),
        "dr.toml",
        "env_id = \"bouncing_ball\"\nmethod = \"dr_baseline\"\nrounds = 2\n",
    );
    let oracle = write_config(
        dir.path(),
        "o.toml",
        "env_id = \"bouncing_ball\"\nmethod = \"oracle_test\"\nrounds = 20\n",
    );
    for seed in ["0", "1", "2"] {
        run_ok(&[
            "run",
            "--config",
            &dr,
            "--seed",
            seed,
            "--out",
            &d(&format!("dr{seed}")),
        ]);
        run_ok(&[
            "run",
            "--config",
            &oracle,
            "--seed",
            seed,
            "--out",
            &d(&format!("or{seed}")),
        ]);
    }
    let csv = d("cmp.csv");
    let out = simtune(&[
        "compare",
        &d("dr0"),
        &d("dr1"),
        &d("dr2"),
        &d("or0"),
        &d("or1"),
        &d("or2"),
        "--out",
        &csv,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(
        table.contains("dr_baseline") && table.contains("oracle_test"),
        "{table}"
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(
        text.lines()
            .nth(1)
            .unwrap()
            .starts_with("bouncing_ball,dr_baseline,3,0 1 2,"),
        "{text}"
    );
    assert!(
        text.lines()
            .nth(2)
            .unwrap()
            .starts_with("bouncing_ball,oracle_test,3,0 1 2,"),
        "{text}"
    );

    // A run compared with itself has zero spread.
    let out = simtune(&["compare", &d("or0"), &d("or0"), "--out", &d("self.csv")]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(d("self.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",0.0"), "{text}");

    let other = write_config(
        dir.path(),
        "p.toml",
        "env_id = \"damped_pendulum\"\nmethod = \"dr_baseline\"\nrounds = 1\n",
    );
    run_ok(&["run", "--config", &other, "--out", &d("pend")]);
    let out = simtune(&["compare", &d("dr0"), &d("pend"), "--out", &d("x.csv")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn envs_and_gradient_commands() {
    let out = simtune(&["envs", "list"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for env in [
        "bouncing_ball",
        "damped_pendulum",
        "sliding_block",
        "restitution",
        "friction",
    ] {
        assert!(text.contains(env), "{text}");
    }
    let out = simtune(&["check", "gradients"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches(" ok").count(), 4);
}
