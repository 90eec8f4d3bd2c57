use std::path::Path;
use std::process::{Command, Output};

use dce_cli::config::RunConfig;

fn dce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dce"))
        .args(args)
        .env_remove("DCE_THREADS")
        .output()
        .expect("dce runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "dce failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn energy_density_csv() {
    let text = stdout(&dce(&["energy-density", "--r", "0.99", "--alpha-eff", "0.9", "--K", "2", "--points", "4096"]));
    assert!(!text.contains('\r'));
    let t = rows(&text);
    assert_eq!(t[0], ["u_over_period", "e_u_in_hbar_Omega2"]);
    assert_eq!(t.len(), 4097);
    let e: Vec<f64> = t[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(e.iter().all(|x| x.is_finite()));
    let peak = e.iter().cloned().fold(f64::MIN, f64::max);
    assert!(peak > 1e-4 && peak < 1e-2, "peak {peak}");
}

#[test]
fn spectrum_with_envelope() {
    let text = stdout(&dce(&[
        "spectrum", "--K", "3", "--alpha-eff", "0.9", "--r", "0.99", "--nu-max", "3", "--envelope", "--points", "30",
    ]));
    let t = rows(&text);
    assert_eq!(t[0], ["nu", "n_nu", "n_nu_envelope"]);
    assert_eq!(t.len(), 31);
    for r in &t[1..] {
        let nu: f64 = r[0].parse().unwrap();
        let n: f64 = r[1].parse().unwrap();
        assert!((0.0..0.2025).contains(&n), "n({nu}) = {n}");
        if (nu - nu.round()).abs() < 1e-12 {
            assert!(n < 1e-10);
        }
    }
}

#[test]
fn energy_report_json() {
    let text = stdout(&dce(&["energy", "--K", "1", "--rho", "0.005", "--alpha", "0.002"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["e_u", "e_v", "e_total", "e_intracavity", "approx_e", "balance_ratio"] {
        assert!(v[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert_eq!(v["threshold_status"], "nonlinear_below_threshold");
    assert_eq!(v["approx_intracavity"].as_f64(), Some(0.0));
}

#[test]
fn exit_codes() {
    let both = dce(&["energy", "--K", "1", "--rho", "0.005", "--alpha", "0.002", "--alpha-eff", "0.1"]);
    assert_eq!(both.status.code(), Some(2));
    let neither = dce(&["energy", "--K", "1", "--rho", "0.005"]);
    assert_eq!(neither.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&neither.stderr).contains("error [usage]"));

    let energy = dce(&["energy", "--K", "1", "--rho", "0.005", "--alpha", "0.005"]);
    assert_eq!(energy.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&energy.stderr).contains("error [energy_divergent]"));
    let density = dce(&["energy-density", "--K", "2", "--r", "0.99", "--alpha-eff", "1"]);
    assert_eq!(density.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&density.stderr).contains("error [density_divergent]"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    stdout(&dce(&["spectrum", "--single", "--alpha", "0.5", "--points", "4", "--save-config", path(&cfg)]));
    let mut c = RunConfig::from_json(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    c.series.max_terms = 2;
    std::fs::write(&cfg, c.to_json()).unwrap();
    let starved = dce(&["run", path(&cfg)]);
    assert_eq!(starved.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&starved.stderr).contains("error [resource]"));

    let text = std::fs::read_to_string(&cfg).unwrap().replace("\"format\"", "\"colour\": 1, \"format\"");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(dce(&["run", path(&cfg)]).status.code(), Some(2));
}

#[test]
fn saved_config_round_trips_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("density.json");
    let args = ["energy-density", "--R1", "0.95", "--R2", "0.99", "--alpha", "0.004", "--K", "3", "--points", "64"];
    let direct = stdout(&dce(&args));
    let mut save = args.to_vec();
    save.extend(["--save-config", path(&cfg)]);
    stdout(&dce(&save));
    let text = std::fs::read_to_string(&cfg).unwrap();
    assert_eq!(RunConfig::from_json(&text).unwrap().to_json(), text);
    assert_eq!(stdout(&dce(&["run", path(&cfg)])), direct);
}

#[test]
fn output_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("s{i}.csv"));
        stdout(&dce(&[
            "sweep", "--K", "1,3", "--rho", "0.005,0.05", "--alpha-over-rho", "0.1,0.45,1", "--threads", threads, "--out", path(&out),
        ]));
        outputs.push(std::fs::read(&out).unwrap());
    }
    let env = Command::new(env!("CARGO_BIN_EXE_dce"))
        .args(["sweep", "--K", "1,3", "--rho", "0.005,0.05", "--alpha-over-rho", "0.1,0.45,1"])
        .env("DCE_THREADS", "2")
        .output()
        .unwrap();
    outputs.push(env.stdout);
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn sweep_rows_are_finite_below_threshold() {
    let text = stdout(&dce(&["sweep", "--K", "3", "--rho", "0.005,0.01,0.05", "--alpha-over-rho", "0.1,0.3,0.45"]));
    let t = rows(&text);
    assert_eq!(t.len(), 10);
    let col = |name: &str| t[0].iter().position(|h| h == name).unwrap();
    for (i, r) in t[1..].iter().enumerate() {
        assert_eq!(r[col("index")], i.to_string());
        for name in ["e_u", "e_v", "e_total", "e_intracavity", "balance_ratio"] {
            assert!(r[col(name)].parse::<f64>().unwrap().is_finite());
        }
        assert_eq!(r[col("error")], "");
    }
}

#[test]
fn sweep_marks_divergent_points_in_row() {
    let text = stdout(&dce(&["sweep", "--K", "2", "--rho", "0.01", "--alpha", "0.004,0.01,0.002"]));
    let t = rows(&text);
    assert_eq!(t.len(), 4);
    let status = t[0].iter().position(|h| h == "threshold_status").unwrap();
    assert_eq!(t[2][status], "energy_divergent");
    assert_eq!(t[2].last().unwrap(), "energy_divergent");
    assert_eq!(t[1][status], "nonlinear_below_threshold");
    assert_eq!(t[3][status], "nonlinear_below_threshold");
}

#[test]
fn verify_reports_injected_breach() {
    let ok = dce(&["verify", "--filter", "homography.mean_derivative,cli."]);
    let text = stdout(&ok);
    assert!(text.contains("PASS,invariant,homography.mean_derivative"));
    assert!(text.contains("PASS,invariant,cli.csv_determinism"));

    let bad = dce(&["verify", "--filter", "homography.mean_derivative", "--tolerance-scale", "1e-30"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL,invariant,homography.mean_derivative"));
}
