//! End-to-end tests of the command-line surface: exit codes, determinism,
//! config-file precedence, and re-parsing of emitted files.

use kryloscope_cli::output::CsvTable;
use std::path::Path;
use std::process::{Command, Output};

fn kryloscope(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kryloscope"))
        .args(args)
        .current_dir(dir)
        .env_remove("KRYLOSCOPE_OUT_DIR")
        .output()
        .expect("binary runs")
}

#[test]
fn evolve_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = kryloscope(
            &[
                "evolve",
                "--profile",
                "su11:alpha=1,k=0.5",
                "--tmax",
                "1.5",
                "--steps",
                "15",
                "--out-dir",
                run,
            ],
            tmp.path(),
        );
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(tmp.path().join("a/evolve.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/evolve.csv")).unwrap();
    assert_eq!(a, b, "identical configs must produce byte-identical CSVs");
    let ma = std::fs::read(tmp.path().join("a/manifest.json")).unwrap();
    let mb = std::fs::read(tmp.path().join("b/manifest.json")).unwrap();
    assert_eq!(ma, mb);
}

#[test]
fn emitted_tables_reparse() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kryloscope(
        &[
            "evolve",
            "--profile",
            "sqrt:g=1",
            "--tmax",
            "1.0",
            "--steps",
            "10",
            "--distributions",
            "true",
            "--out-dir",
            "run",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let table = CsvTable::read(&tmp.path().join("run/evolve.csv")).unwrap();
    assert_eq!(table.columns[0], "t");
    assert_eq!(table.rows.len(), 11);
    let dist = CsvTable::read(&tmp.path().join("run/distributions.csv")).unwrap();
    assert_eq!(dist.rows.len(), 11);
    // Distributions sum to one.
    for row in &dist.rows {
        let total: f64 = row[1..].iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    // The manifest parses and echoes the full configuration.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap())
            .unwrap();
    for key in ["profile", "tmax", "steps", "leak_tol", "truncation", "step_tol", "distributions"] {
        assert!(manifest["config"].get(key).is_some(), "manifest missing {key}");
    }
    assert_eq!(manifest["subcommand"], "evolve");
}

#[test]
fn malformed_profile_file_exits_2_and_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad_profile.csv");
    std::fs::write(&bad, "# kryloscope-profile v1\n1,2.0\n2,oops\n").unwrap();
    let out = kryloscope(
        &["evolve", "--profile", bad.to_str().unwrap(), "--tmax", "1", "--out-dir", "run"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let report: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).expect("machine-readable report");
    assert_eq!(report["kind"], "config");
    assert!(report["message"].as_str().unwrap().contains("line 3"), "{report}");
}

#[test]
fn flagged_trajectory_exits_1_unless_allowed() {
    let tmp = tempfile::tempdir().unwrap();
    // A 16-site box is far too small for g√n growth to t = 3.
    let args = [
        "evolve",
        "--profile",
        "sqrt:g=1",
        "--tmax",
        "3",
        "--steps",
        "10",
        "--truncation",
        "16",
        "--out-dir",
        "run",
    ];
    let out = kryloscope(&args, tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(report["kind"], "numerical");

    let mut allowed = vec!["--allow-flagged"];
    allowed.extend(args);
    let out = kryloscope(&allowed, tmp.path());
    assert_eq!(out.status.code(), Some(0));
    // The manifest still records the flags.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap())
            .unwrap();
    assert!(!manifest["flags_raised"].as_array().unwrap().is_empty());
}

#[test]
fn config_file_is_used_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        "[semiclassics]\nprofile = \"linear:alpha=1\"\nn0 = 1.0\np0 = -1.5707963267948966\ntmax = 1.0\nsteps = 10\n",
    )
    .unwrap();
    let out = kryloscope(
        &["semiclassics", "--config", config.to_str().unwrap(), "--out-dir", "c1"],
        tmp.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = CsvTable::read(&tmp.path().join("c1/semiclassics.csv")).unwrap();
    assert_eq!(table.rows.len(), 11);

    // Flag overrides the steps value from the file.
    let out = kryloscope(
        &[
            "semiclassics",
            "--config",
            config.to_str().unwrap(),
            "--steps",
            "5",
            "--out-dir",
            "c2",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let table = CsvTable::read(&tmp.path().join("c2/semiclassics.csv")).unwrap();
    assert_eq!(table.rows.len(), 6);

    // Unknown keys in the config file are a config error.
    std::fs::write(&config, "[semiclassics]\nbogus = 1\n").unwrap();
    let out = kryloscope(
        &["semiclassics", "--config", config.to_str().unwrap(), "--out-dir", "c3"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_required_parameter_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kryloscope(&["evolve", "--tmax", "1", "--out-dir", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert!(report["message"].as_str().unwrap().contains("profile"));
}

#[test]
fn validate_passes_and_emits_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kryloscope(&["validate", "--tmax", "1.5", "--out-dir", "run"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("sqrt_hopping"), "{stdout}");
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/validate.json")).unwrap())
            .unwrap();
    for row in rows.as_array().unwrap() {
        assert_eq!(row["pass"], true, "{row}");
    }
}

#[test]
fn fcs_outputs_parse_and_normalize() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kryloscope(
        &[
            "fcs",
            "--profile",
            "sqrt:g=1",
            "--tmax",
            "1.0",
            "--steps",
            "10",
            "--chi-points",
            "8",
            "--cumulants",
            "2",
            "--out-dir",
            "run",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = CsvTable::read(&tmp.path().join("run/fcs.csv")).unwrap();
    // t + 8 complex Z columns + 2 cumulants.
    assert_eq!(table.columns.len(), 1 + 16 + 2);
    // χ = π is the last grid point; Z(π, 1) = e^{-2} for the Poisson model.
    let last = table.rows.last().unwrap();
    let re_z_pi = last[15];
    assert!((re_z_pi - (-2.0_f64).exp()).abs() < 1e-6);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("run/fcs_summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["rate_function"]["scaled_cgf"].as_array().unwrap().len() > 10);
}

#[test]
fn fluct_and_sweep_tables_reparse() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kryloscope(
        &[
            "fluct",
            "--profile",
            "linear:alpha=1",
            "--tmax",
            "1",
            "--steps",
            "10",
            "--mc-samples",
            "1000",
            "--seed",
            "11",
            "--out-dir",
            "rf",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = CsvTable::read(&tmp.path().join("rf/fluct.csv")).unwrap();
    assert_eq!(table.columns.len(), 10);
    assert_eq!(table.rows.len(), 11);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("rf/fluct_summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["mc_check"]["covariance"].is_array());

    let out = kryloscope(&["sweep", "--h-grid", "10,1", "--out-dir", "rs"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = CsvTable::read(&tmp.path().join("rs/sweep.csv")).unwrap();
    assert_eq!(table.rows.len(), 2);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("rs/sweep_summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["trend"]["slope"].is_number());
    assert!(summary["chi_hat_definition"].is_string());
}

#[test]
fn out_dir_env_variable_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kryloscope"))
        .args(["overlap", "--profile", "sqrt:g=1", "--w", "1"])
        .current_dir(tmp.path())
        .env("KRYLOSCOPE_OUT_DIR", "env_out")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("env_out/overlap.json").exists());
    assert!(tmp.path().join("env_out/manifest.json").exists());
}
