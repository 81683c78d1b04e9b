use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const GAMMA_STAR_100: f64 = 6.474600379589358;

fn powergame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_powergame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Header and rows of a CSV table.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(text: &str, name: &str) -> Vec<String> {
    let (header, rows) = csv(text);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.into_iter().map(|r| r[i].clone()).collect()
}

fn floats(text: &str, name: &str) -> Vec<f64> {
    column(text, name).iter().map(|v| v.parse().unwrap()).collect()
}

fn scenario(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn three_users(dir: &TempDir) -> PathBuf {
    scenario(
        dir,
        "three.json",
        r#"{"users": [{"distance_m": 100}, {"distance_m": 200}, {"distance_m": 300}]}"#,
    )
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gamma_star_default_packet() {
    let out = stdout(&powergame(&["gamma-star"]));
    let gs = floats(&out, "gamma_star")[0];
    assert!((gs - GAMMA_STAR_100).abs() < 1e-12);
    assert_eq!(column(&out, "packet_size"), vec!["100"]);
    let f = floats(&out, "f_gamma_star")[0];
    assert!((f - (-(-gs).exp_m1()).powi(100)).abs() < 1e-12);
}

#[test]
fn gamma_star_without_interior_maximizer_is_domain_error() {
    let out = powergame(&["gamma-star", "--packet-size", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(powergame(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(powergame(&["gamma-star", "--packet-size", "x"]).status.code(), Some(1));
    assert_eq!(powergame(&["--help"]).status.code(), Some(0));
}

#[test]
fn equilibrium_balances_sir_for_every_receiver() {
    let dir = TempDir::new().unwrap();
    let config = three_users(&dir);
    let mut powers = Vec::new();
    for receiver in ["mf", "mf-seq", "de", "mmse"] {
        let out = stdout(&powergame(&[
            "--tol",
            "1e-14",
            "equilibrium",
            "--config",
            arg(&config),
            "--receiver",
            receiver,
        ]));
        for sir in floats(&out, "sir") {
            assert!((sir - GAMMA_STAR_100).abs() < 1e-8 * GAMMA_STAR_100, "{receiver}: {sir}");
        }
        assert!(column(&out, "status").iter().all(|s| s == "converged"));
        powers.push(floats(&out, "power_w"));
    }
    // Same target SIR, different interference suppression.
    let (de, mmse) = (&powers[2], &powers[3]);
    assert!(de.iter().zip(mmse).all(|(d, m)| m <= d));
    assert!(de.iter().zip(mmse).any(|(d, m)| (d - m).abs() > 1e-6 * d));
}

#[test]
fn equilibrium_utility_matches_power_and_sir() {
    let dir = TempDir::new().unwrap();
    let out = stdout(&powergame(&["equilibrium", "--config", arg(&three_users(&dir))]));
    let (p, sir, u) = (floats(&out, "power_w"), floats(&out, "sir"), floats(&out, "utility_bpj"));
    for k in 0..p.len() {
        let direct = 1e4 * (-(-sir[k]).exp_m1()).powi(100) / p[k];
        assert!((u[k] - direct).abs() <= 1e-12 * direct);
    }
}

#[test]
fn overloaded_cell_saturates_everyone() {
    let dir = TempDir::new().unwrap();
    let users = vec![r#"{"distance_m": 1000}"#; 30].join(", ");
    let config = scenario(&dir, "crowd.json", &format!(r#"{{"users": [{users}]}}"#));
    let out = stdout(&powergame(&["equilibrium", "--config", arg(&config)]));
    assert!(floats(&out, "power_w").iter().all(|&p| p == 1.0));
    assert!(column(&out, "status").iter().all(|s| s == "infeasible-all-max-power"));
    assert!(floats(&out, "sir").iter().all(|&s| s < GAMMA_STAR_100));
}

#[test]
fn malformed_config_names_line_and_field() {
    let dir = TempDir::new().unwrap();
    let config = scenario(&dir, "bad.json", "{\"users\": [\n  {\"distance_m\": \"far\"}\n]}");
    let out = powergame(&["equilibrium", "--config", arg(&config)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:2:"), "{err}");
    assert!(err.contains("users[0].distance_m"), "{err}");

    let config = scenario(&dir, "typo.json", r#"{"users": [{"distance_m": 100}], "sytem": {}}"#);
    let out = powergame(&["equilibrium", "--config", arg(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sytem"));

    let out = powergame(&["equilibrium", "--config", arg(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn matched_filter_rejects_antenna_arrays() {
    let dir = TempDir::new().unwrap();
    let config = scenario(
        &dir,
        "array.json",
        r#"{"system": {"rx_antennas": 2}, "users": [{"distance_m": 100}, {"distance_m": 150}]}"#,
    );
    let out = powergame(&["equilibrium", "--config", arg(&config), "--receiver", "mf"]);
    assert_eq!(out.status.code(), Some(1));
    let out = stdout(&powergame(&["equilibrium", "--config", arg(&config), "--receiver", "mmse"]));
    assert_eq!(column(&out, "status"), vec!["converged"; 2]);
}

#[test]
fn runs_are_reproducible_and_seeded() {
    let args = ["sweep-load", "--alpha", "0.1:0.2:0.1", "--trials", "3", "--gain", "64"];
    let first = stdout(&powergame(&args));
    assert_eq!(first, stdout(&powergame(&args)));
    let mut reseeded = vec!["--seed", "99"];
    reseeded.extend(args);
    assert_ne!(first, stdout(&powergame(&reseeded)));
}

#[test]
fn json_output_keeps_columns_and_nulls_nan() {
    let out = stdout(&powergame(&[
        "--format", "json", "sweep-load", "--alpha", "0.5:0.5:0.1", "--receivers", "mf", "--trials", "2", "--gain", "64",
    ]));
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    let row = &rows.as_array().unwrap()[0];
    assert_eq!(row["receiver"], "mf");
    assert_eq!(row["users"], 32);
    assert!(row["utility_large_system"].is_null());
    assert_eq!(row["status"], "infeasible");
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("g.csv");
    let out = powergame(&["--out", arg(&path), "gamma-star", "--packet-size", "50"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(column(&text, "packet_size"), vec!["50"]);
}

#[test]
fn sweep_load_emits_one_row_per_load_and_receiver() {
    let out = stdout(&powergame(&["sweep-load", "--alpha", "0.1:0.3:0.1", "--trials", "2", "--gain", "64"]));
    assert_eq!(column(&out, "receiver").len(), 9);
    assert_eq!(column(&out, "users")[..3], ["6", "6", "6"]);
    for (status, ls) in column(&out, "status").iter().zip(floats(&out, "utility_large_system")) {
        assert_eq!(status == "feasible", ls.is_finite());
    }
}

#[test]
fn single_user_multicarrier_picks_one_carrier() {
    let out = stdout(&powergame(&["multicarrier", "--users", "1:1:1", "--trials", "4"]));
    let joint = floats(&out, "total_utility_joint");
    let independent = floats(&out, "total_utility_independent");
    // Spreading over both carriers spends energy on the weaker one.
    for (j, i) in joint.iter().zip(&independent) {
        assert!(j > i, "{j} vs {i}");
    }
    for split in column(&out, "split") {
        assert!(split == "1/0" || split == "0/1");
    }
}

#[test]
fn delay_qos_curves_are_monotone() {
    let out = stdout(&powergame(&["delay-qos", "--delay-range", "1e4:1e6", "--points-per-decade", "5"]));
    let (rate, phi, cap) = (floats(&out, "source_rate_pps"), floats(&out, "size_phi"), floats(&out, "capacity_K"));
    assert_eq!(rate.len(), 11 * 3);
    for lambda in [10.0, 50.0, 100.0] {
        let idx: Vec<usize> = (0..rate.len()).filter(|&i| rate[i] == lambda).collect();
        for w in idx.windows(2) {
            assert!(phi[w[1]] <= phi[w[0]]);
            assert!(cap[w[1]] >= cap[w[0]]);
        }
    }
}

#[test]
fn pricing_reports_every_price() {
    let out = stdout(&powergame(&[
        "pricing",
        "--instances",
        "2",
        "--price-range",
        "1e-9:1e-6",
        "--points-per-decade",
        "2",
    ]));
    assert_eq!(column(&out, "instance").len(), 2 * 7);
    assert!(column(&out, "pareto_improving").iter().any(|v| v == "true"));
}
