//! End-to-end tests of the binary: exit codes, file outputs, round-trips
//! and tamper detection.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_robust-merton")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rm-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const MERTON_LOG_COARSE: &str = r#"
horizon = 1.0
grid-step = 0.05
w0 = 1.0
epsilon = 2.0

[utility]
family = "crra-log"

[[segments]]
end-time = 1.0

[[segments.vertices]]
drift = [0.08]
covariance = [0.04]
atoms = []
"#;

const DRIFT_HULL_COARSE: &str = r#"
horizon = 1.0
grid-step = 0.05
w0 = 1.0
epsilon = 2.0

[utility]
family = "crra-log"

[[segments]]
end-time = 1.0

[[segments.vertices]]
drift = [0.05]
covariance = [0.04]
atoms = []

[[segments.vertices]]
drift = [0.10]
covariance = [0.04]
atoms = []
"#;

#[test]
fn check_passes_on_valid_spec() {
    let dir = tmp_dir("check-ok");
    let spec = write_spec(&dir, "m.toml", MERTON_LOG_COARSE);
    let out = run(&["check", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn check_rejects_one_sided_jump_support() {
    let dir = tmp_dir("check-onesided");
    let spec = write_spec(
        &dir,
        "m.toml",
        &MERTON_LOG_COARSE.replace("atoms = []", "atoms = [{ z = [0.2], w = 1.0 }]"),
    );
    let out = run(&["check", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn check_rejects_sharpe_violation() {
    let dir = tmp_dir("check-sharpe");
    let spec = write_spec(
        &dir,
        "m.toml",
        &MERTON_LOG_COARSE
            .replace("drift = [0.08]", "drift = [0.6]")
            .replace("family = \"crra-log\"", "family = \"crra-power\"\np = -1.0"),
    );
    let out = run(&["check", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_covariance_is_a_parse_error() {
    let dir = tmp_dir("check-malformed");
    let spec = write_spec(
        &dir,
        "m.toml",
        &MERTON_LOG_COARSE.replace("covariance = [0.04]", "covariance = [-0.04]"),
    );
    let out = run(&["check", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["check", "--nonsense"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_writes_expected_summary() {
    let dir = tmp_dir("solve");
    let spec = write_spec(&dir, "m.toml", MERTON_LOG_COARSE);
    let sol = dir.join("sol");
    let out = run(&[
        "solve",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(sol.join("summary.csv")).unwrap();
    let value: f64 = summary.lines().nth(1).unwrap().split(',').last().unwrap().parse().unwrap();
    let target = 0.08 * 1.5 - 2.0 * 2.0f64.ln();
    assert!((value - target).abs() < 1e-9, "u(1) = {value}");

    // idempotent: solving again reproduces identical bytes
    let cells_before = std::fs::read(sol.join("cells.csv")).unwrap();
    let out = run(&[
        "solve",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(cells_before, std::fs::read(sol.join("cells.csv")).unwrap());
}

#[test]
fn two_segment_solve_has_two_blocks() {
    let dir = tmp_dir("two-seg");
    let spec = write_spec(
        &dir,
        "m.toml",
        r#"
horizon = 1.0
grid-step = 0.25
w0 = 1.0
epsilon = 2.0

[utility]
family = "crra-log"

[[segments]]
end-time = 0.5

[[segments.vertices]]
drift = [0.05]
covariance = [0.04]

[[segments.vertices]]
drift = [0.10]
covariance = [0.04]

[[segments]]
end-time = 1.0

[[segments.vertices]]
drift = [0.02]
covariance = [0.04]

[[segments.vertices]]
drift = [0.04]
covariance = [0.04]
"#,
    );
    let sol = dir.join("sol");
    let out = run(&["solve", "--spec", spec.to_str().unwrap(), "--out", sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cells = std::fs::read_to_string(sol.join("cells.csv")).unwrap();
    let kernels: Vec<f64> = cells
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(kernels.len(), 4);
    assert!((kernels[0] - 0.03125).abs() < 1e-9);
    assert!((kernels[1] - 0.03125).abs() < 1e-9);
    assert!((kernels[2] - 0.005).abs() < 1e-9);
    assert!((kernels[3] - 0.005).abs() < 1e-9);
}

#[test]
fn evaluate_confirms_stored_summary() {
    let dir = tmp_dir("evaluate");
    let spec = write_spec(&dir, "m.toml", MERTON_LOG_COARSE);
    let sol = dir.join("sol");
    run(&["solve", "--spec", spec.to_str().unwrap(), "--out", sol.to_str().unwrap()]);
    let out = run(&[
        "evaluate",
        "--spec",
        spec.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_round_trips_through_both_formats() {
    let dir = tmp_dir("report");
    let spec = write_spec(&dir, "m.toml", DRIFT_HULL_COARSE);
    let sol = dir.join("sol");
    run(&["solve", "--spec", spec.to_str().unwrap(), "--out", sol.to_str().unwrap()]);
    let jsonl = dir.join("jsonl");
    let back = dir.join("back");
    let out = run(&[
        "report",
        "--spec",
        spec.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
        "--out",
        jsonl.to_str().unwrap(),
        "--format",
        "json-lines",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "report",
        "--spec",
        spec.to_str().unwrap(),
        "--solution",
        jsonl.to_str().unwrap(),
        "--out",
        back.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(sol.join("cells.csv")).unwrap(),
        std::fs::read(back.join("cells.csv")).unwrap(),
        "csv -> jsonl -> csv must be lossless"
    );
    assert_eq!(
        std::fs::read(sol.join("summary.csv")).unwrap(),
        std::fs::read(back.join("summary.csv")).unwrap()
    );
}

#[test]
fn simulate_writes_estimate() {
    let dir = tmp_dir("simulate");
    let spec = write_spec(&dir, "m.toml", MERTON_LOG_COARSE);
    let sol = dir.join("sol");
    run(&["solve", "--spec", spec.to_str().unwrap(), "--out", sol.to_str().unwrap()]);
    let est = dir.join("est");
    let out = run(&[
        "simulate",
        "--spec",
        spec.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
        "--paths",
        "2000",
        "--seed",
        "9",
        "--out",
        est.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(est.join("estimate.csv")).unwrap();
    assert!(text.starts_with("mean,std_error,paths,seed,step\n"));
}

#[test]
fn verify_passes_on_clean_solution_and_fails_on_tampered_consumption() {
    let dir = tmp_dir("verify-tamper-c");
    let spec = write_spec(&dir, "m.toml", MERTON_LOG_COARSE);
    let sol = dir.join("sol");
    run(&["solve", "--spec", spec.to_str().unwrap(), "--out", sol.to_str().unwrap()]);
    let out = run(&[
        "verify",
        "--spec",
        spec.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
        "--paths",
        "2000",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    // set c* of one cell to 1.2: range check must fail with exit code 4
    let cells_path = sol.join("cells.csv");
    let cells = std::fs::read_to_string(&cells_path).unwrap();
    let tampered: Vec<String> = cells
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 2 {
                let mut fields: Vec<&str> = line.split(',').collect();
                fields[6] = "1.2";
                fields.join(",")
            } else {
                line.to_string()
            }
        })
        .collect();
    std::fs::write(&cells_path, tampered.join("\n") + "\n").unwrap();
    let out = run(&[
        "verify",
        "--spec",
        spec.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
        "--paths",
        "200",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("consumption-range: FAIL"), "{stdout}");
}

#[test]
fn verify_fails_on_tampered_worst_case_measure() {
    let dir = tmp_dir("verify-tamper-theta");
    let spec = write_spec(&dir, "m.toml", DRIFT_HULL_COARSE);
    let sol = dir.join("sol");
    run(&["solve", "--spec", spec.to_str().unwrap(), "--out", sol.to_str().unwrap()]);

    // swap the hull weights to the non-worst vertex on every cell
    let cells_path = sol.join("cells.csv");
    let cells = std::fs::read_to_string(&cells_path).unwrap();
    let tampered: Vec<String> = cells
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 0 {
                line.to_string()
            } else {
                let mut fields: Vec<&str> = line.split(',').collect();
                assert_eq!(fields[4], "1;0");
                fields[4] = "0;1";
                fields.join(",")
            }
        })
        .collect();
    std::fs::write(&cells_path, tampered.join("\n") + "\n").unwrap();
    let out = run(&[
        "verify",
        "--spec",
        spec.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
        "--paths",
        "200",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("saddle-certificate: FAIL"), "{stdout}");
}

const CARA_COARSE: &str = r#"
horizon = 2.0
grid-step = 0.05
w0 = 1.0
epsilon = 2.0

[utility]
family = "cara"
a = 1.0

[[segments]]
end-time = 2.0

[[segments.vertices]]
drift = [0.05]
covariance = [0.04]
atoms = []
"#;

#[test]
fn thread_count_env_does_not_change_results() {
    let dir = tmp_dir("threads");
    // CARA exercises the per-cell parallel solve
    for (name, body) in [("m.toml", MERTON_LOG_COARSE), ("c.toml", CARA_COARSE)] {
        let spec = write_spec(&dir, name, body);
        let sol1 = dir.join(format!("{name}-sol1"));
        let sol2 = dir.join(format!("{name}-sol2"));
        let run_with = |threads: &str, out_dir: &Path| {
            Command::new(bin())
                .args([
                    "solve",
                    "--spec",
                    spec.to_str().unwrap(),
                    "--out",
                    out_dir.to_str().unwrap(),
                ])
                .env("ROBUST_MERTON_THREADS", threads)
                .output()
                .unwrap()
        };
        assert_eq!(run_with("1", &sol1).status.code(), Some(0));
        assert_eq!(run_with("4", &sol2).status.code(), Some(0));
        assert_eq!(
            std::fs::read(sol1.join("cells.csv")).unwrap(),
            std::fs::read(sol2.join("cells.csv")).unwrap(),
            "{name}: results must not depend on thread count"
        );
    }
}
