use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcavoid"))
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

const EMPTY: &str = r#"
name = "empty"
duration = 15.0
[start]
position = [0.0, 0.0, 1.0]
[goal]
position = [9.0, 0.0, 1.0]
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn goal_run_writes_outputs_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "empty.toml", EMPTY);
    let out = tmp.path().join("out");
    let status = bin().arg(&sc).arg("--out").arg(&out).output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    for f in ["events.log", "trace.csv", "trajectory.csv", "timings.csv", "report.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["outcome"], "goal_reached");
    assert_eq!(report["replan_count"], 0);
    assert!(out.join("snapshots").read_dir().unwrap().count() >= 2);
}

#[test]
fn malformed_scenario_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "bad.toml", &EMPTY.replace("duration = 15.0", "duration = \"soon\""));
    let out = tmp.path().join("out");
    let res = bin().arg(&sc).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(!out.exists());
}

#[test]
fn outcome_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "empty.toml", EMPTY);
    let timeout = bin()
        .arg(&sc)
        .args(["--set", "duration=1.0", "--out"])
        .arg(tmp.path().join("t"))
        .output()
        .unwrap();
    assert_eq!(timeout.status.code(), Some(5));

    // goal buried in a block: every plan fails, the UAV hovers, then gives up
    let walled = format!(
        "{EMPTY}\n[[obstacles]]\nname = \"block\"\nshape = {{ type = \"box\", min = [8.0, -1.0, 0.0], max = [10.0, 1.0, 2.0] }}\n"
    );
    let sc = write(tmp.path(), "walled.toml", &walled);
    let failure = bin().arg(&sc).arg("--out").arg(tmp.path().join("f")).output().unwrap();
    assert_eq!(failure.status.code(), Some(4));
    let log = std::fs::read_to_string(tmp.path().join("f/events.log")).unwrap();
    assert!(log.contains("hover"));
    assert!(log.contains("outcome=planner_failure"));
}

#[test]
fn unknown_override_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "empty.toml", EMPTY);
    let res = bin()
        .arg(&sc)
        .args(["--set", "planner.clearence=0.5", "--out"])
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("clearence"));
}

#[test]
fn bench_single_repetition_table() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "empty.toml", EMPTY);
    let res = bin().arg(&sc).args(["--bench", "1"]).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    let table = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "stage,count,min_ms,mean_ms,p95_ms,max_ms");
    let plan: Vec<&str> = lines.iter().find(|l| l.starts_with("plan,")).unwrap().split(',').collect();
    assert_eq!(plan[1], "1");
    // one sample: min = mean = p95 = max
    assert!(plan[2..].windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn bench_rejects_zero_repetitions() {
    let res = bin().arg(scenarios().join("indoor_bar.toml")).args(["--bench", "0"]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn compare_maps_writes_table_and_slices() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    let res = bin()
        .arg(scenarios().join("thin_bar_compare.toml"))
        .args(["--compare-maps", "--set", "compare.frames=10", "--set", "compare.resolutions=[0.3]", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("grid_slice_0.30.txt").is_file());
    assert!(out.join("compare.json").is_file());
}
