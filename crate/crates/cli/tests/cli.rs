use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wcg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcg"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Copies the two-state instance into `dir` and writes a small scenario beside it.
fn small_scenario(dir: &Path, policy: &str, grid: &str) -> PathBuf {
    std::fs::copy(scenarios().join("two_state.json"), dir.join("two_state.json")).unwrap();
    let path = dir.join("scenario.json");
    std::fs::write(
        &path,
        format!(
            r#"{{
  "name": "cli-test",
  "instance": {{"path": "two_state.json"}},
  "policy": {policy},
  "grid": {grid},
  "metrics": ["deviation", "reward", "lp_gap"],
  "outputs": {{"trajectories": "traj.csv"}}
}}
"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn validate_accepts_shipped_files() {
    let dir = scenarios();
    for f in ["two_state.json", "convergence.json", "alp_gap.json", "oalp.json", "ompi.json"] {
        let o = wcg(&["validate", f], &dir);
        assert!(o.status.success(), "{f}: {}", stderr(&o));
        assert!(stdout(&o).starts_with("ok:"));
    }
}

#[test]
fn empty_grid_exits_with_two_and_a_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = small_scenario(tmp.path(), r#"{"kind": "alp"}"#, r#"{"h": [], "horizon": [5], "seeds": [0]}"#);
    let o = wcg(&["validate", path.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.h (line 5)"), "{}", stderr(&o));
}

#[test]
fn malformed_json_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.json");
    std::fs::write(&path, "{\n  \"classes\": [\n").unwrap();
    let o = wcg(&["validate", path.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":3:"), "{}", stderr(&o));
}

#[test]
fn invalid_instance_lists_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenarios().join("two_state.json")).unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, text.replacen("0.7", "0.9", 1)).unwrap();
    let o = wcg(&["validate", path.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("validation"), "{}", stderr(&o));
}

#[test]
fn whittle_on_non_binary_instance_is_a_solver_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenarios().join("two_state.json")).unwrap();
    let mut inst: serde_json::Value = serde_json::from_str(&text).unwrap();
    // A second constraint makes the Whittle computation inapplicable.
    let extra = inst["constraints"]["constraints"][0].clone();
    inst["constraints"]["constraints"].as_array_mut().unwrap().push(extra);
    inst["constraints"]["budget_label"] = false.into();
    std::fs::write(tmp.path().join("two_state.json"), inst.to_string()).unwrap();
    let path = tmp.path().join("scenario.json");
    std::fs::write(
        &path,
        r#"{"name": "w", "instance": {"path": "two_state.json"}, "policy": {"kind": "whittle"},
            "grid": {"h": [1], "horizon": [3], "seeds": [0]}, "metrics": ["reward"]}"#,
    )
    .unwrap();
    let o = wcg(&["sweep", path.to_str().unwrap(), "--out-dir", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn lp_reports_bound_and_widened_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = scenarios().join("two_state.json");
    let o = wcg(&["lp", inst.to_str().unwrap(), "--horizon", "4", "--eps", "0.02", "--out-dir", "o"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let nominal = report["objective"].as_f64().unwrap();
    let widened = report["eps"]["objective"].as_f64().unwrap();
    assert!(widened >= nominal - 1e-9);
    assert!(report["eps"]["upper_bound"].as_f64().unwrap() >= widened - 1e-9);
    let text = std::fs::read_to_string(tmp.path().join("o/lp.txt")).unwrap();
    assert!(text.starts_with("MAXIMIZE") && text.ends_with("END\n"));
    let o = wcg(&["lp", inst.to_str().unwrap(), "--eps", "-1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn indices_are_written() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = scenarios().join("two_state.json");
    let o = wcg(&["indices", inst.to_str().unwrap(), "--out-dir", "o"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let tables: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("o/indices.json")).unwrap()).unwrap();
    assert_eq!(tables[0]["entries"].as_array().unwrap().len(), 2);
    assert_eq!(tables[0]["pcl"], true);
}

#[test]
fn sweep_output_is_byte_identical_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let path = small_scenario(tmp.path(), r#"{"kind": "randomized"}"#, r#"{"h": [1, 3], "horizon": [6], "seeds": {"start": 0, "count": 4}}"#);
    let p = path.to_str().unwrap();
    for (dir, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let o = wcg(&["sweep", p, "--out-dir", dir, "--threads", threads, "--seed", "11"], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["metrics.csv", "aggregates.json", "traj.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
        assert_eq!(a, std::fs::read(tmp.path().join("c").join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(tmp.path().join("a/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4 * 3);
    let o = wcg(&["sweep", p, "--out-dir", "d", "--seed", "12"], tmp.path());
    assert!(o.status.success());
    assert_ne!(csv, std::fs::read_to_string(tmp.path().join("d/metrics.csv")).unwrap());
}

#[test]
fn run_writes_one_replicate() {
    let tmp = tempfile::tempdir().unwrap();
    let path = small_scenario(tmp.path(), r#"{"kind": "alp"}"#, r#"{"h": [2, 4], "horizon": [5], "seeds": [7, 8]}"#);
    let o = wcg(&["run", path.to_str().unwrap(), "--out-dir", "o"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("lp_gap = "));
    let csv = std::fs::read_to_string(tmp.path().join("o/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.contains(",2,5,7,,")));
    let traj = std::fs::read_to_string(tmp.path().join("o/traj.csv")).unwrap();
    assert!(traj.lines().count() > 6);
}
