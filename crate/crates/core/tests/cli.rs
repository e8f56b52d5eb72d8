use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hypoctrl::estimator::{EstimationResult, MonteCarloReport};
use hypoctrl::hypo::LagReport;

fn hypoctrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypoctrl"))
        .args(args)
        .env("HYPOCTRL_THREADS", "1")
        .output()
        .expect("spawn hypoctrl")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate_cyclic(dir: &Path, n: usize) -> std::path::PathBuf {
    let csv = dir.join("cyc.csv");
    let out = hypoctrl(&[
        "simulate", "--model", "cyclic", "--params", "nu=0.2,c=0.15", "--T", "10", "--n", &n.to_string(),
        "--seed", "3", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    csv
}

#[test]
fn simulate_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate_cyclic(dir.path(), 50);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,z1,z2,z3,y1"));
    assert_eq!(lines.count(), 51);
    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 3);
    assert_eq!(sidecar["params"]["c"], 0.15);
}

#[test]
fn simulate_usage_errors_exit_two() {
    let out = hypoctrl(&["simulate", "--model", "cyclic", "--n", "0"]);
    assert_eq!(code(&out), 2);
    let out = hypoctrl(&["simulate", "--model", "lorenz"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cyclic") && stderr(&out).contains("synaptic"), "{}", stderr(&out));
    let out = hypoctrl(&["simulate", "--model", "cyclic", "--params", "nu=abc"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn estimate_round_trip_reports_every_weight() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate_cyclic(dir.path(), 1000);
    let report = dir.path().join("est.json");
    let out = hypoctrl(&[
        "estimate", "--model", "cyclic", "--data", csv.to_str().unwrap(), "--obs-cols", "y1", "--z0", "0,0,0",
        "--w-grid", "1e15,1e20", "--init", "nu=0.3,c=0.1", "--out", report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let result: EstimationResult = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(result.model, "cyclic");
    let ws: Vec<f64> = result.k_table.iter().map(|r| r.w).collect();
    assert_eq!(ws, vec![1e15, 1e20]);
    assert!(ws.contains(&result.w_hat));
    assert!((result.psi_hat["c"] - 0.15).abs() < 0.05, "{:?}", result.psi_hat);
}

#[test]
fn estimate_input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = hypoctrl(&["estimate", "--model", "cyclic", "--data", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "t,y1\n0.0,1.0\n0.1,1.1\n0.2\n0.3,1.2\n").unwrap();
    let out = hypoctrl(&["estimate", "--model", "cyclic", "--data", ragged.to_str().unwrap(), "--z0", "0,0,0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 4") || stderr(&out).contains("line: 4"), "{}", stderr(&out));

    let text = dir.path().join("text.csv");
    fs::write(&text, "t,y1\n0.0,1.0\n0.1,abc\n").unwrap();
    let out = hypoctrl(&["estimate", "--model", "cyclic", "--data", text.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn mc_table_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let table = dir.path().join(name);
        let json = dir.path().join(format!("{name}.json"));
        let out = hypoctrl(&[
            "mc", "--model", "cyclic", "--trials", "2", "--T", "10", "--n", "1000", "--seed", "5", "--w-grid", "1e15,1e20",
            "--no-timing", "--table", table.to_str().unwrap(), "--out", json.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let report: MonteCarloReport = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(report.trials, 2);
        fs::read(&table).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("T,n,trials,failures,nu_mean,nu_var,c_mean,c_var\n"), "{text}");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn check_hypo_reports_lags_and_rank() {
    let out = hypoctrl(&["check-hypo", "--model", "cyclic"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: LagReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.m_b, 2);

    let out = hypoctrl(&["check-hypo", "--model", "fhn"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: LagReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.m_b, 1);

    let out = hypoctrl(&["check-hypo", "--model", "cyclic", "--params", "c=0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_file_drives_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fhn.csv");
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "model = \"fhn\"\nseed = 4\n[params]\nsigma = 0.2\n[simulate]\nT = 2.0\nn = 20\nout = \"{}\"\n",
            csv.display()
        ),
    )
    .unwrap();
    let out = hypoctrl(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 22);

    fs::write(&cfg, "model = \"fhn\"\n[simulate]\nsteps = 3\n").unwrap();
    let out = hypoctrl(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}
