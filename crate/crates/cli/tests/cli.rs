use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn psdde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psdde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_object(o: &Output) -> serde_json::Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    let last = err.lines().last().expect("stderr not empty");
    serde_json::from_str(last).expect("last stderr line is a JSON object")
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

/// `ω cot ω = -μ` on `(π/2, π)`, then `β = μ exp(1 + ω/(μ sin ω))`.
fn oracle(mu: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (PI / 2.0, PI - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid / mid.tan() + mu > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    (w, mu * (1.0 + w / (mu * w.sin())).exp())
}

#[test]
fn mesh_degree_two() {
    let o = psdde(&["mesh", "--n", "2"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["j", "theta", "weight", "d0", "d1", "d2"]);
    let d: Vec<Vec<f64>> = rows[1..]
        .iter()
        .map(|r| r[4..].iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    let want = [[0.0, -1.0], [4.0, -3.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((d[i][j] - want[i][j]).abs() < 1e-14);
        }
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let o = psdde(&["hopf", "--model", "blowflies", "--param", "beta", "--omega", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(error_object(&o)["error"], "usage");

    let o = psdde(&["eig", "--model", "blowflies", "--n", "4", "--set", "gamma=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_object(&o)["error"], "usage");

    let o = psdde(&["mesh", "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = psdde(&["eig", "--model", "no/such/file.json", "--n", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = psdde(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = psdde(&["simulate", "--model", "blowflies", "--n", "4", "--t-end", "1", "--history", "const:1", "--rel-tol", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_one() {
    let o = psdde(&["hopf", "--model", "blowflies", "--param", "beta", "--n", "5", "--omega", "0.01", "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_object(&o);
    assert!(e["error"].is_string() && e["error"] != "usage");
    assert!(e["message"].is_string());
    assert!(o.stdout.is_empty());
}

#[test]
fn hopf_end_to_end() {
    let o = psdde(&["hopf", "--model", "blowflies", "--param", "beta", "--set", "mu=3", "--n", "10", "--omega", "2", "--alpha", "30"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (w, beta) = oracle(3.0);
    assert!((h["alpha"].as_f64().unwrap() - beta).abs() < 1e-6);
    assert!((h["omega"].as_f64().unwrap() - w).abs() < 1e-6);
    assert_eq!(h["n"], 10);
    assert!(h["c"]["re"].as_f64().unwrap() < 0.0);
    assert!(h["c"]["im"].is_f64());

    let o = psdde(&["lyap", "--model", "blowflies", "--param", "beta", "--set", "mu=3", "--analytic", "--omega", "2", "--alpha", "30"]);
    let l: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(l["criticality"], "supercritical");
    assert!((l["alpha"].as_f64().unwrap() - beta).abs() < 1e-9);
}

#[test]
fn outputs_are_deterministic_and_atomic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = psdde(&[
            "curve", "--model", "blowflies", "--set", "mu=3", "--param", "beta", "--params", "mu,beta", "--n", "8",
            "--omega", "2.4", "--alpha", "30", "--p1-range", "2:4", "--output", path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 2, "{files:?}");

    let c = psdde(&["converge", "--model", "blowflies", "--set", "mu=3", "--param", "beta", "--omega", "2.4", "--alpha", "30", "--n-list", "4,6,8"]);
    let d = psdde(&["converge", "--model", "blowflies", "--set", "mu=3", "--param", "beta", "--omega", "2.4", "--alpha", "30", "--n-list", "4,6,8"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn curve_points_are_roots_of_charfn() {
    let o = psdde(&[
        "curve", "--model", "blowflies", "--set", "mu=3", "--param", "beta", "--params", "mu,beta", "--n", "10",
        "--omega", "2.4", "--alpha", "30", "--p1-range", "1:6", "--step", "0.5",
    ]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header[..4], ["segment", "mu", "beta", "omega"]);
    assert!(rows.len() > 4);
    for r in rows.iter().step_by(3) {
        let (mu, beta, w) = (&r[1], &r[2], &r[3]);
        let c = psdde(&[
            "charfn", "--model", "blowflies", "--set", &format!("mu={mu}"), "--set", &format!("beta={beta}"),
            "--n", "10", "--lambda", &format!("0+{w}i"), "--format", "json",
        ]);
        assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
        let v: serde_json::Value = serde_json::from_str(&stdout(&c)).unwrap();
        let (re, im) = (v["det_n"]["re"].as_f64().unwrap(), v["det_n"]["im"].as_f64().unwrap());
        assert!(re.hypot(im) < 1e-10, "mu = {mu}: |Δ| = {}", re.hypot(im));
    }
}

#[test]
fn simulate_with_period_report() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let report = dir.path().join("period.json");
    let o = psdde(&[
        "simulate", "--model", "blowflies", "--n", "12", "--t-end", "200", "--history", "const:1.0",
        "--report", report.to_str().unwrap(), "--output", traj.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let p = rep["period"].as_f64().unwrap();
    assert!((p - 4.47).abs() < 0.3, "{p}");
    let (header, rows) = csv_rows(&std::fs::read_to_string(&traj).unwrap());
    assert_eq!(header, ["t", "x0"]);
    assert_eq!(rows.first().unwrap()[0], "0.0");
    assert_eq!(rows.last().unwrap()[0].parse::<f64>().unwrap(), 200.0);
    assert!(Path::new(&traj).exists());
}

#[test]
fn eig_and_chart_tables() {
    let o = psdde(&["eig", "--model", "fluidflow", "--n", "6"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["re", "im"]);
    assert_eq!(rows.len(), 14);

    let o = psdde(&["chart-blowfly", "--n", "4", "--omega-min", "0.2", "--omega-max", "3", "--steps", "30"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["curve", "branch", "omega", "b1", "b2", "mu", "beta_over_mu", "re_c"]);
    assert!(rows.iter().any(|r| r[0] == "dde") && rows.iter().any(|r| r[0] == "ps"));
}
