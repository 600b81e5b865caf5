//! Black-box checks of the command-line interface: exit codes, emitted
//! files, determinism, and the one-line error contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_micromacro");

fn micromacro(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("failed to launch the binary")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

/// Small, fast case shared by most tests.
const SMALL_RUN: &str = r#"{
  "sigma": {"kind": "constant"},
  "f_left": {"kind": "linear_v"},
  "f_right": {"kind": "zero"},
  "epsilon": 1e-2,
  "N_space": 9,
  "M_velocity": 8,
  "t_final": 0.02,
  "snapshot_times": [0.01, 0.02],
  "scheme": "lme"
}"#;

#[test]
fn run_writes_profiles_and_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("out");
    let out = micromacro(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    for name in ["rho_t0.01.csv", "rho_t0.02.csv"] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,rho"), "{name} header");
        // N = 9 interior nodes plus both walls
        assert_eq!(lines.count(), 11, "{name} row count");
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scheme"], "lme");
    assert_eq!(report["profiles"].as_array().unwrap().len(), 2);
    assert!(report["kappa"].as_f64().unwrap() > 0.0);
    // times land exactly on the requested snapshots
    assert_eq!(report["profiles"][0]["time"].as_f64().unwrap(), 0.01);
    assert_eq!(report["profiles"][1]["time"].as_f64().unwrap(), 0.02);
}

#[test]
fn identical_configs_give_byte_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let out = micromacro(&["run", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    for name in ["rho_t0.01.csv", "rho_t0.02.csv", "report.json"] {
        let a = fs::read(dirs[0].join(name)).unwrap();
        let b = fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn overrides_replace_the_grid_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("out");
    let out = micromacro(&[
        "run",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--cells",
        "4",
        "--nodes",
        "4",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("rho_t0.02.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6); // header + 4 interior + walls
}

#[test]
fn invalid_config_fails_with_a_one_line_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_RUN.replace("1e-2", "-1.0"));
    let out = micromacro(&["run", &cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with("error:"), "stderr: {err}");
}

#[test]
fn missing_config_fails() {
    let out = micromacro(&["run", "/nonexistent/config.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn kernels_writes_the_closed_form_family() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("kernels");
    let out = micromacro(&["kernels", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("kernels.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("v,"), "header: {header}");
    for col in ["K0", "K1", "K2", "K3"] {
        assert!(header.contains(col), "header {header} lacks {col}");
    }
    // stdout reports one normalization per kernel, all close to 1
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains("normalization=")).count(), 4);
}

#[test]
fn sweep_prints_one_row_per_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out = micromacro(&["sweep", &cfg, "--eps", "1e-2,1e-3"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("epsilon,boundary_value,sup_distance"));
    assert_eq!(lines.count(), 2);

    // an increasing list violates the precondition
    let out = micromacro(&["sweep", &cfg, "--eps", "1e-3,1e-2"]);
    assert!(!out.status.success());
}

#[test]
fn compare_reports_zero_for_identical_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        assert!(micromacro(&["run", &cfg, "--out", d.to_str().unwrap()]).status.success());
    }
    let a = dirs[0].join("report.json");
    let b = dirs[1].join("report.json");
    for norm in ["sup", "l2"] {
        let out = micromacro(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--norm", norm]);
        assert!(out.status.success());
        let stdout = String::from_utf8_lossy(&out.stdout);
        for line in stdout.lines() {
            assert!(line.ends_with("=0"), "nonzero difference: {line}");
        }
        assert_eq!(stdout.lines().count(), 2);
    }

    let out = micromacro(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--norm", "manhattan"]);
    assert!(!out.status.success());
}
