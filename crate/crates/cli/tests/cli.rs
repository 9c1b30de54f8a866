use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spincool"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_fixture(cmd: &str, name: &str, extra: &[&str]) -> Output {
    let path = fixture(name);
    let mut args = vec![cmd, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

#[test]
fn chain_runs_with_exit_zero() {
    let v = json(&run_fixture(
        "chain",
        "table_s1_5k_10db.toml",
        &["--format", "json"],
    ));
    let planes = v["planes"].as_array().unwrap();
    assert_eq!(planes.first().unwrap()["noise_temp_off_k"], 294.0);
    assert_eq!(planes.last().unwrap()["plane"], 8);
    let light = &v["cavity"][1];
    assert_eq!(light["state"], "light");
    assert!((light["gamma"].as_f64().unwrap() - 0.6457).abs() < 1e-4);
}

#[test]
fn negative_loss_exits_2_naming_the_stage() {
    let out = run_fixture("chain", "negative_loss.toml", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cable_a"), "{err}");
    assert!(err.contains("loss_db"), "{err}");
}

#[test]
fn missing_block_exits_2() {
    // The chain fixture has no [scenario] block.
    let out = run_fixture("predict", "table_s1_5k_10db.toml", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario"));
}

#[test]
fn missing_file_and_bad_arguments_exit_2() {
    assert_eq!(
        run(&["chain", "--config", "/nonexistent/x.toml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["chain"]).status.code(), Some(2));
}

#[test]
fn malformed_toml_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[chain]\nfrequency_hz = \n").unwrap();
    let out = run(&["chain", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn passthrough_chain_reproduces_the_source() {
    let v = json(&run_fixture(
        "chain",
        "passthrough.toml",
        &["--format", "json"],
    ));
    for row in v["planes"].as_array().unwrap() {
        let off = row["noise_temp_off_k"].as_f64().unwrap();
        let on = row["noise_temp_on_k"].as_f64().unwrap();
        assert!((off - 294.0).abs() < 1e-9, "{row}");
        assert!((on - 11760.0).abs() < 1e-6, "{row}");
    }
}

#[test]
fn fit_is_repeatable_for_a_fixed_seed() {
    let extra = ["--samples", "200", "--seed", "7", "--format", "csv"];
    let a = stdout(&run_fixture("fit", "table1_measurements.toml", &extra));
    let b = stdout(&run_fixture("fit", "table1_measurements.toml", &extra));
    assert_eq!(a, b);
    let c = stdout(&run_fixture(
        "fit",
        "table1_measurements.toml",
        &["--samples", "200", "--seed", "8", "--format", "csv"],
    ));
    assert_ne!(a, c);
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let extra = ["--samples", "200"];
    let csv_text = stdout(&run_fixture(
        "fit",
        "table1_measurements.toml",
        &[extra.as_slice(), &["--format", "csv"]].concat(),
    ));
    let v = json(&run_fixture(
        "fit",
        "table1_measurements.toml",
        &[extra.as_slice(), &["--format", "json"]].concat(),
    ));
    let rows = v["fit"].as_array().unwrap();
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let records: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), rows.len());
    for (rec, row) in records.iter().zip(rows) {
        for key in ["t_m_k", "ci_low_k", "ci_high_k", "delta_noise_sa_pred_db"] {
            let j = headers.iter().position(|h| h == key).unwrap();
            let from_csv: f64 = rec[j].parse().unwrap();
            assert_eq!(from_csv, row[key].as_f64().unwrap(), "{key}");
        }
    }
}

#[test]
fn output_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run_fixture(
        "sweep",
        "mode_cooling.toml",
        &["--format", "csv", "--output", path.to_str().unwrap()],
    );
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,kappa_int_hz,t_mode_k,n_planck,n_rj"));
    assert_eq!(lines.filter(|l| !l.is_empty()).count(), 41);
}

#[test]
fn sweep_cools_monotonically_with_q() {
    let v = json(&run_fixture(
        "sweep",
        "mode_cooling.toml",
        &["--format", "json"],
    ));
    let t: Vec<f64> = v["sweep"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["t_mode_k"].as_f64().unwrap())
        .collect();
    assert!(t.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn predict_reports_the_calibrated_pair() {
    let v = json(&run_fixture(
        "predict",
        "mode_cooling.toml",
        &["--format", "json"],
    ));
    let rows = v["predict"].as_array().unwrap();
    let t = |q: f64| {
        rows.iter().find(|r| r["q"].as_f64() == Some(q)).unwrap()["t_mode_k"]
            .as_f64()
            .unwrap()
    };
    assert!((t(320.0) - 0.63).abs() < 1e-6);
    assert!((t(1000.0) - 0.22).abs() < 0.01);
    assert_eq!(v["calibration"].as_array().unwrap().len(), 4);
}

#[test]
fn spins_with_unit_ratios_stay_thermal() {
    let v = json(&run_fixture(
        "spins",
        "nv_spins.toml",
        &["--format", "json"],
    ));
    let pops = v["populations"].as_array().unwrap();
    for key in ["p_minus", "p_zero", "p_plus"] {
        let a = pops[0][key].as_f64().unwrap();
        let b = pops[1][key].as_f64().unwrap();
        assert!((a - b).abs() < 1e-12);
    }
    for row in v["transitions"].as_array().unwrap() {
        assert!((row["spin_temp_light_k"].as_f64().unwrap() - 5.0).abs() < 1e-9);
        assert_eq!(row["regime"], "absorbing");
    }
}

#[test]
fn table_format_is_human_readable() {
    let text = stdout(&run_fixture("chain", "table_s1_5k_10db.toml", &[]));
    assert!(text.contains("planes"));
    assert!(text.contains("lna"));
}

#[test]
fn zero_sigma_fit_gives_a_point_estimate() {
    let v = json(&run_fixture(
        "fit",
        "zero_sigma.toml",
        &["--format", "json"],
    ));
    let row = &v["fit"][0];
    assert!(row["ci_low_k"].is_null() && row["ci_high_k"].is_null());
    assert_eq!(row["n_samples"], 0);
    assert_eq!(row["t_m_k"], row["t_m_nominal_k"]);
    assert!((row["t_m_k"].as_f64().unwrap() - 2.76).abs() < 0.01);
    assert_eq!(row["status"], "ok");
}
