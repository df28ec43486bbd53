use std::fs;
use std::path::Path;
use std::process::Command as Process;

use spin_decoherence::cli::{csv_body, run, Command, RunConfig, RunOptions, INCOMPLETE_MARKER};

const BIN: &str = env!("CARGO_BIN_EXE_spindeco");

fn small_config(out: &Path) -> RunConfig {
    let text = "
        n = 6
        n_list = 4, 5, 6, 7
        rho_list = 0.5, 1, 2
        d = 3
        u = 4
        dt = 0.05
        tmax = 20
        t1 = 10
        t2 = 20
        samples = 3
    ";
    let mut cfg = RunConfig::parse(text).unwrap();
    cfg.seed = 11;
    cfg.out = out.to_path_buf();
    cfg
}

fn files(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read_to_string(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn every_subcommand_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    for command in Command::ALL {
        let a = small_config(&tmp.path().join(format!("{command}-1")));
        let b = small_config(&tmp.path().join(format!("{command}-4")));
        let ra = run(command, &a, &RunOptions { threads: Some(1), input: None }).unwrap();
        let rb = run(command, &b, &RunOptions { threads: Some(4), input: None }).unwrap();
        assert!(ra.passed && rb.passed, "{command}");
        let (fa, fb) = (files(&a.out), files(&b.out));
        assert!(!fa.is_empty());
        assert!(fa.iter().all(|(name, _)| name != INCOMPLETE_MARKER));
        assert_eq!(fa, fb, "{command} output differs between thread counts");
    }
}

#[test]
fn same_seed_same_bodies_other_seed_differs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(&tmp.path().join("a"));
    run(Command::Ensemble, &cfg, &RunOptions::default()).unwrap();
    let again = small_config(&tmp.path().join("b"));
    run(Command::Ensemble, &again, &RunOptions::default()).unwrap();
    let other = RunConfig { seed: 12, ..small_config(&tmp.path().join("c")) };
    run(Command::Ensemble, &other, &RunOptions::default()).unwrap();
    let body = |dir: &Path| csv_body(&fs::read_to_string(dir.join("runs.csv")).unwrap());
    assert_eq!(body(&cfg.out), body(&again.out));
    assert_ne!(body(&cfg.out), body(&other.out));
}

#[test]
fn trajectory_columns_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { n: 4, ..small_config(tmp.path()) };
    run(Command::Simulate, &cfg, &RunOptions::default()).unwrap();
    let text = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(text.contains("# master_seed: 11\n"));
    assert!(text.contains("# units: t in gt; entropy in nats\n"));
    assert!(text.contains("# schema: trajectory v1\n"));
    let body = csv_body(&text);
    let mut lines = body.lines();
    assert_eq!(lines.next().unwrap(), "t,xi,z_1,z_2,z_3,z_4,s_tot,s_scaled,xi_plus_s_scaled");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 0.5).abs() < 1e-14);
    assert!(first[6].abs() < 1e-12);
    assert_eq!(body.lines().count(), 1 + 401);
}

#[test]
fn fit_scaling_from_existing_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep_cfg = small_config(&tmp.path().join("sweep"));
    run(Command::Sweep, &sweep_cfg, &RunOptions::default()).unwrap();
    let input = sweep_cfg.out.join("sweep.csv");
    assert_eq!(csv_body(&fs::read_to_string(&input).unwrap()).lines().count(), 1 + 6);

    let fit_cfg = small_config(&tmp.path().join("fit"));
    let report = run(Command::FitScaling, &fit_cfg, &RunOptions { threads: None, input: Some(input) }).unwrap();
    assert!(report.summary.contains("S = "));
    let text = fs::read_to_string(fit_cfg.out.join("scaling.csv")).unwrap();
    let body = csv_body(&text);
    let row: Vec<&str> = body.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "3");
    let s: f64 = row[9].parse().unwrap();
    assert!(s > 0.0 && s < 1.0, "S = {s}");
    assert!(fit_cfg.out.join("scaling.txt").exists());
}

#[test]
fn failed_run_leaves_marker_and_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    // Two densities are not enough for the law fit.
    let mut cfg = small_config(tmp.path());
    cfg.rho_list = vec![1.0, 2.0];
    let err = run(Command::FitScaling, &cfg, &RunOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let marker = fs::read_to_string(tmp.path().join(INCOMPLETE_MARKER)).unwrap();
    assert!(marker.contains("fit-scaling failed"));
    assert!(tmp.path().join("sweep.csv").exists());
}

#[test]
fn sweep_requires_a_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { n_list: vec![], rho_list: vec![], ..small_config(tmp.path()) };
    assert_eq!(run(Command::Sweep, &cfg, &RunOptions::default()).unwrap_err().exit_code(), 2);
}

fn spindeco(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Process::new(BIN).args(args).current_dir(dir).env_remove("SPINDECO_THREADS").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(spindeco(&["bogus"], dir).0, 1);
    assert_eq!(spindeco(&["simulate", "--n", "many"], dir).0, 1);
    assert_eq!(spindeco(&["simulate", "--config", "missing.conf"], dir).0, 1);

    let (code, _, err) = spindeco(&["simulate", "--set", "t1=90", "--set", "t2=80"], dir);
    assert_eq!(code, 2);
    assert!(err.contains("t1 < t2"), "{err}");

    fs::write(dir.join("bad.conf"), "n = 4\nwhat = 1\n").unwrap();
    let (code, _, err) = spindeco(&["simulate", "--config", "bad.conf"], dir);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");

    let (code, _, _) = spindeco(&["oracle-check", "--n", "20", "--out", "o"], dir);
    assert_eq!(code, 3);
    assert!(dir.join("o").join(INCOMPLETE_MARKER).exists());
}

#[test]
fn binary_runs_with_config_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("run.conf"), "# small\nn = 8\ntmax = 10\nt1 = 5\nt2 = 10\n").unwrap();
    let args = ["oracle-check", "--config", "run.conf", "--seed", "4", "--set", "samples=2", "--threads", "2", "--out", "oc"];
    let (code, stdout, err) = spindeco(&args, dir);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("PASS"), "{stdout}");
    let text = fs::read_to_string(dir.join("oc").join("oracle.csv")).unwrap();
    assert!(text.contains("# master_seed: 4\n"));
    assert_eq!(csv_body(&text).lines().count(), 3);

    let (code, _, err) = spindeco(&["simulate", "--config", "run.conf", "--n", "3", "--dt", "0.5", "--out", "s"], dir);
    assert_eq!(code, 0, "{err}");
    assert_eq!(csv_body(&fs::read_to_string(dir.join("s").join("trajectory.csv")).unwrap()).lines().count(), 22);

    let mut cmd = Process::new(BIN);
    cmd.args(["simulate", "--config", "run.conf", "--out", "env"]).current_dir(dir).env("SPINDECO_THREADS", "3").stdout(std::process::Stdio::null());
    assert!(cmd.status().unwrap().success());
}
