//! End-to-end runs of the `broadwell` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use broadwell::DataField;

const BASE: &str = "\
problem.a1 = 0
problem.b1 = 1
problem.a2 = 0
problem.b2 = 1
problem.T = 1
problem.c = 1
problem.S = 1
solver.grid.n = 12
";

/// Smooth compatible data: species 1 and 4 vary in y only, 2 and 3 in x only.
const WAVE_FIELDS: &str = "\
problem.default.kind = sinusoid
problem.default.offset = 1/1000
problem.default.amplitude = 1/8000
problem.default.pa = 1.5707963267948966
problem.default.kb = 6.283185307179586
problem.init2.kind = sinusoid
problem.init2.offset = 1/1000
problem.init2.amplitude = 1/8000
problem.init2.ka = 6.283185307179586
problem.init2.pb = 1.5707963267948966
problem.init3.kind = sinusoid
problem.init3.offset = 1/1000
problem.init3.amplitude = 1/8000
problem.init3.ka = 6.283185307179586
problem.init3.pb = 1.5707963267948966
oracle.nx = 24
oracle.ny = 24
";

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn constant(value: &str) -> String {
    format!("{BASE}problem.default.kind = constant\nproblem.default.value = {value}\n")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_broadwell"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .to_string()
}

fn number(text: &str, key: &str) -> f64 {
    value(text, key).parse().unwrap()
}

#[test]
fn check_gate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write_config(dir.path(), "zero.cfg", &constant("0"));
    let o = run(&["check-gate", "--config", zero.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(number(&stdout(&o), "q"), 0.0);
    assert_eq!(value(&stdout(&o), "gate"), "ok");

    let edge = write_config(dir.path(), "edge.cfg", &constant("1/432"));
    let o = run(&["check-gate", "--config", edge.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!((number(&text, "pq") - 0.25).abs() <= 1e-12);
    assert!((number(&text, "bound_B") - 1.0 / 72.0).abs() <= 1e-12);
    assert!((number(&text, "max_scale") - 1.0).abs() <= 1e-12);
    assert_eq!(value(&text, "compatibility"), "ok");

    let doubled = write_config(dir.path(), "double.cfg", &constant("2/432"));
    let o = run(&["check-gate", "--config", doubled.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!((number(&text, "pq") - 0.5).abs() <= 1e-12);
    assert!((number(&text, "max_scale") - 0.5).abs() <= 1e-12);
    assert_eq!(value(&text, "gate"), "violated");
}

#[test]
fn parse_errors_exit_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.cfg",
        &format!("{}problem.c = fast\n", BASE.replace("problem.c = 1\n", "")),
    );
    let o = run(&["check-gate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.cfg:8"), "{err}");
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate", "--config", "x"]).status.code(), Some(2));
}

#[test]
fn constant_solve_writes_constant_fields_after_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "k.cfg",
        &format!(
            "{}output.nx = 5\noutput.ny = 4\noutput.moments = true\n",
            constant("1/500")
        ),
    );
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--slices", "0,0.25,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(value(&summary, "iterations"), "1");
    assert_eq!(value(&summary, "status"), "converged");
    assert_eq!(value(&summary, "slices"), "0,0.25,1");
    for k in 0..3 {
        let text = std::fs::read_to_string(out.join(format!("fields_t{k}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,y,n1,n2,n3,n4"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 20);
        for row in rows {
            let cols: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
            for v in &cols[3..] {
                assert_eq!(*v, 1.0 / 500.0);
            }
        }
        let moments = std::fs::read_to_string(out.join(format!("moments_t{k}.csv"))).unwrap();
        assert!(moments.starts_with("t,x,y,rho,u,v\n"));
    }
}

#[test]
fn fields_round_trip_through_the_csv_reader() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "w.cfg",
        &format!("{BASE}{WAVE_FIELDS}output.nx = 7\noutput.ny = 6\n"),
    );
    let o = run(&["solve", "--quiet", "--config", cfg.to_str().unwrap(), "--slices", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let out = dir.path().join("out");
    let fields = std::fs::read_to_string(out.join("fields_t0.csv")).unwrap();
    let rows: Vec<Vec<f64>> = fields
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    for s in 1..=4 {
        let f = DataField::from_csv(&out.join(format!("n{s}_t0.csv"))).unwrap();
        assert_eq!(f.grid_shape(), Some((7, 6)));
        for row in &rows {
            assert_eq!(f.eval(row[1], row[2]), row[2 + s]);
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let body = format!("{BASE}{WAVE_FIELDS}output.dir = run{run_id}\n");
        let cfg = write_config(dir.path(), &format!("r{run_id}.cfg"), &body);
        assert_eq!(
            run(&["solve", "--quiet", "--config", cfg.to_str().unwrap()])
                .status
                .code(),
            Some(0)
        );
        outputs.push(std::fs::read(dir.path().join(format!("run{run_id}/fields_t1.csv"))).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn free_streaming_summary_reports_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{}{WAVE_FIELDS}", BASE.replace("problem.S = 1", "problem.S = 0"));
    let cfg = write_config(dir.path(), "s0.cfg", &body);
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let dev = number(&stdout(&o), "free_streaming_max_deviation");
    assert!(dev <= 1e-15, "{dev}");
}

#[test]
fn gate_boundary_run_stays_below_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "edge.cfg", &constant("1/432"));
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(value(&text, "within_bound_B"), "true");
    assert!(number(&text, "sup_norm") <= number(&text, "bound_B"));
}

#[test]
fn gate_violation_needs_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "big.cfg", &constant("1/300"));
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("gate"));
    assert!(!dir.path().join("out/summary.txt").exists());
    let o = run(&["solve", "--quiet", "--override-gate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert_eq!(value(&summary, "gate_overridden"), "true");
}

#[test]
fn slices_outside_horizon_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.cfg", &constant("1/500"));
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--slices", "0,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_on_zero_and_smooth_data() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("zero.cfg", constant("0")),
        ("wave.cfg", format!("{BASE}{WAVE_FIELDS}")),
    ] {
        let cfg = write_config(dir.path(), name, &body);
        let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
        let text = stdout(&o);
        assert_eq!(o.status.code(), Some(0), "{name}\n{text}");
        assert_eq!(value(&text, "overall"), "pass");
        assert!(!text.contains("FAIL"));
    }
}

#[test]
fn verify_flags_incompatible_corners() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{}problem.inflow1.kind = constant\nproblem.inflow1.value = 1/1000\n",
        constant("1/500")
    );
    let cfg = write_config(dir.path(), "bad.cfg", &body);
    let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("compatibility")).unwrap();
    assert!(row.contains("FAIL"), "{row}");
    let o = run(&["verify", "--quiet", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn compare_oracle_reports_relative_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "wave.cfg", &format!("{BASE}{WAVE_FIELDS}"));
    let o = run(&["compare-oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(number(&text, "relative_error") <= 0.05);
    assert_eq!(value(&text, "oracle_grid"), "24x24x24");
}
