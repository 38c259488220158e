use std::path::Path;
use std::process::Command;

use clap::Parser;
use curveforge_cli::{execute, run, Cli, RunConfig, RunRecord, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, OUT_ENV};

fn config(args: &[&str]) -> Result<RunConfig, curveforge_cli::ConfigError> {
    let mut full = vec!["curveforge", "--out", "/nonexistent/never-written"];
    full.extend_from_slice(args);
    Cli::try_parse_from(full).unwrap().run_config()
}

fn run_in(dir: &Path, args: &[&str]) -> (i32, RunRecord) {
    let mut full = vec!["curveforge", "--out", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    let code = run(full);
    let rec = RunRecord::from_json(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    (code, rec)
}

#[test]
fn out_of_range_parameters_are_named() {
    let cases: &[(&[&str], &str)] = &[
        (&["solve", "--N", "6", "--m", "4"], "m"),
        (&["solve", "--N", "7"], "N"),
        (&["solve", "--m", "3", "--N", "256"], "N"),
        (&["solve", "--kappa", "16"], "kappa"),
        (&["solve", "--dt", "-1"], "dt"),
        (&["solve", "--T", "0"], "T"),
        (&["solve", "--t0", "2"], "t0"),
        (&["solve", "--s", "1"], "s"),
        (&["solve", "--s", "20"], "s"),
        (&["solve", "--D", "0"], "D"),
        (&["solve", "--tol", "0"], "tol"),
        (&["solve", "--max-iters", "1"], "max-iters"),
        (&["solve", "--dt", "0.5"], "dt"),
        (&["solve", "--rtilde", "sin(x"], "rtilde"),
        (&["solve", "--phi", "sin(t2)"], "phi"),
        (&["verify-curvature", "--resolutions", "8,7"], "resolutions"),
        (&["verify-curvature", "--base-conformal", "cos("], "base-conformal"),
        (&["energy-report", "--u", "exp(x)"], "u"),
        (&["reproduce", "thm99"], "preset"),
        (&["solve-linear"], "config"),
    ];
    for (args, field) in cases {
        let err = config(args).expect_err(&format!("{args:?} should be rejected"));
        assert_eq!(err.field, *field, "{args:?}: {err}");
    }
}

#[test]
fn linear_toml_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "N = 16\nkappa = 8\n").unwrap();
    let err = config(&["solve-linear", "--config", path.to_str().unwrap()]).unwrap_err();
    assert_eq!(err.field, "kappa");
    std::fs::write(&path, "alpha = \"1 +\"\n").unwrap();
    let err = config(&["solve-linear", "--config", path.to_str().unwrap()]).unwrap_err();
    assert_eq!(err.field, "alpha");
    std::fs::write(&path, "wave_speed = 2\n").unwrap();
    let err = config(&["solve-linear", "--config", path.to_str().unwrap()]).unwrap_err();
    assert_eq!(err.field, "config");
}

#[test]
fn small_data_solve_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rec) = run_in(
        dir.path(),
        &["solve", "--mode", "small-data", "--rtilde", "1e-3*sin(x)*sin(t)", "--m", "1", "--T", "1"],
    );
    assert_eq!(code, EXIT_PASS);
    assert!(rec.pass && !rec.partial);
    for f in ["solution.csv", "residual.csv", "energy.csv", "report.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let d = &rec.diagnostics;
    assert!(d["iterations"]["converged"].as_bool().unwrap());
    assert!(d["small_data"]["within_d"].as_bool().unwrap());
    assert_eq!(d["t0_history"].as_array().unwrap().len(), 1);
    assert!(!d["iterations"]["windows"][0]["ratios"].as_array().unwrap().is_empty());
}

#[test]
fn small_data_mode_rejects_initial_data() {
    let err = config(&["solve", "--mode", "small-data", "--phi", "sin(x)"]).unwrap();
    let (rec, err2) = execute(err);
    assert!(rec.partial);
    assert!(matches!(err2, Some(curveforge_cli::CmdError::Config(ref c)) if c.field == "phi"));
}

#[test]
fn divergence_is_a_computation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rec) = run_in(
        dir.path(),
        &["solve", "--mode", "small-data", "--rtilde", "50*sin(x)*sin(t)", "--max-iters", "8"],
    );
    assert_eq!(code, EXIT_FAIL);
    assert!(rec.partial && !rec.pass);
    assert!(rec.error.is_some());
    assert!(rec.diagnostics["iterations"]["windows"].as_array().is_some());
}

#[test]
fn standing_wave_preset() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rec) = run_in(dir.path(), &["solve-linear", "--preset", "standing-wave"]);
    assert_eq!(code, EXIT_PASS);
    assert!(rec.diagnostics["error"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn linear_toml_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.toml");
    std::fs::write(
        &path,
        r#"
N = 32
kappa = 8
dt = 1e-3
T = 1.0
alpha = "1 + 0.2*sin(x)"
a = "0.1*cos(x)"
beta = "0.05*sin(x)"
gamma = "0.1"
phi = "sin(x)"
# f for u = cos(t) sin(x): a u_t − 0.05 cos²x cos t − 0.1 u + 0.2 sin²x cos t
f = "-0.05*sin(2*x)*sin(t) - 0.025*cos(t) - 0.025*cos(2*x)*cos(t) - 0.1*cos(t)*sin(x) + 0.1*cos(t) - 0.1*cos(2*x)*cos(t)"
exact = "cos(t)*sin(x)"
max_error = 5e-5
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, rec) = run_in(&out, &["solve-linear", "--config", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS, "{}", rec.table());
}

#[test]
fn zero_energy_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rec) = run_in(dir.path(), &["energy-report", "--u", "0"]);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(rec.diagnostics["sup_sqrt_energy"].as_f64(), Some(0.0));
    let csv = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(vals[1..vals.len() - 1].iter().all(|&v| v == 0.0), "{line}");
    }
}

#[test]
fn verify_curvature_presets() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rec) = run_in(&dir.path().join("flat"), &["verify-curvature", "--preset", "flat-zero", "--resolutions", "16,32"]);
    assert_eq!(code, EXIT_PASS, "{}", rec.table());
    let (code, rec) = run_in(&dir.path().join("sine"), &["verify-curvature", "--preset", "sine-m1"]);
    assert_eq!(code, EXIT_PASS, "{}", rec.table());
    for row in rec.diagnostics["rows"].as_array().unwrap() {
        if let Some(q) = row["ratio"].as_f64() {
            assert!((3.0..=5.0).contains(&q), "{row}");
        }
    }
    let csv = std::fs::read_to_string(dir.path().join("sine/curvature.csv")).unwrap();
    assert!(csv.starts_with("N,identity,max_error,ratio\n"));
    assert_eq!(csv.lines().count(), 1 + 9);
}

#[test]
fn record_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (_, rec) = run_in(dir.path(), &["solve", "--rtilde", "0.01*cos(x)*cos(t)", "--T", "0.5", "--seed", "3"]);
    let back = RunRecord::from_json(&rec.to_json()).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.to_json(), rec.to_json());
}

#[test]
fn identical_config_gives_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["solve", "--rtilde", "0.05*sin(x)*cos(t)", "--phi", "0.1*cos(x)", "--T", "0.5", "--seed", "5"];
    let (_, a) = run_in(dir.path(), &args);
    let (_, b) = run_in(dir.path(), &args);
    assert_eq!(a.stable_json(), b.stable_json());
}

#[test]
fn environment_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_curveforge"))
        .args(["energy-report", "--u", "0"])
        .env(OUT_ENV, dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_PASS));
    assert!(dir.path().join("report.json").is_file());
    let flag = dir.path().join("flag");
    let status = Command::new(env!("CARGO_BIN_EXE_curveforge"))
        .args(["--out", flag.to_str().unwrap(), "energy-report", "--u", "0"])
        .env(OUT_ENV, dir.path().join("ignored"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_PASS));
    assert!(flag.join("report.json").is_file());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_curveforge");
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| Command::new(bin).args(args).env(OUT_ENV, dir.path()).output().unwrap().status.code();
    assert_eq!(code(&["solve", "--N", "3"]), Some(EXIT_CONFIG));
    assert_eq!(code(&["frobnicate"]), Some(EXIT_CONFIG));
    assert_eq!(code(&["--help"]), Some(EXIT_PASS));
    assert_eq!(code(&["solve", "--mode", "small-data", "--rtilde", "50*sin(x)*sin(t)", "--max-iters", "8"]), Some(EXIT_FAIL));
}

#[test]
fn leading_minus_expressions_parse() {
    let cfg = config(&["solve", "--rtilde", "-0.01*sin(x)*cos(t)", "--phi", "-0.1*cos(x)", "--dt", "0.02"]).unwrap();
    assert_eq!(cfg.rtilde.as_deref(), Some("-0.01*sin(x)*cos(t)"));
    assert_eq!(cfg.phi.as_deref(), Some("-0.1*cos(x)"));
}
