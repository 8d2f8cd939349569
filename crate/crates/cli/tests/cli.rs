use std::path::Path;
use std::process::{Command, Output};

fn rm_dpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rm-dpg")).args(args).env_remove("RM_DPG_THREADS").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn missing_config_exits_2() {
    let o = rm_dpg(&["run", "--config", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_and_usage_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"problem": "poly", "t": 0.01, "levels": 3}"#);
    assert_eq!(rm_dpg(&["run", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(rm_dpg(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rm_dpg(&["run"]).status.code(), Some(2));
}

#[test]
fn zero_levels_gives_one_row_and_no_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"problem": "poly", "t": 0.01}"#);
    let out = dir.path().join("out");
    let o = rm_dpg(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("rates"));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("level,n_triangles,dofs,t,"));
}

#[test]
fn run_prints_rates_and_thread_count_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"problem": "lshape", "t": 0.001, "n_refinements": 3, "adaptive": true, "output": {"csv": "ls.csv", "estimators": true}}"#,
    );
    let mut csvs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}"));
        let o = rm_dpg(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("rates vs #T"));
        assert!(out.join("estimators_level3.csv").exists());
        csvs.push(std::fs::read(out.join("ls.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn env_var_sets_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"problem": "poly", "t": 0.1}"#);
    let o = Command::new(env!("CARGO_BIN_EXE_rm-dpg"))
        .args(["run", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()])
        .env("RM_DPG_THREADS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_and_detects_sign_flip() {
    let o = rm_dpg(&["verify", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 4);
    let o = rm_dpg(&["verify", "--inject-trace-sign-flip"]);
    assert_eq!(o.status.code(), Some(1));
    let failing: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("FAIL")).map(String::from).collect();
    assert_eq!(failing.len(), 1);
    assert!(failing[0].contains("trace orthogonality"));
}

#[test]
fn plotdata_is_idempotent_and_has_guides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"problem": "poly", "t": 0.01, "n_refinements": 1}"#);
    let out = dir.path().join("out");
    assert!(rm_dpg(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]).status.success());
    let csv = out.join("convergence.csv");
    let a = rm_dpg(&["plotdata", csv.to_str().unwrap()]);
    let b = rm_dpg(&["plotdata", csv.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2);
    let c = rm_dpg(&["plotdata", csv.to_str().unwrap(), "--slope", "-0.3333333333333333"]);
    assert!(stdout(&c).contains("-3.3333333333333331e-1"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "level,n_triangles\n0,abc\n").unwrap();
    assert_eq!(rm_dpg(&["plotdata", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn mesh_info_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"problem": "lshape", "t": 0.001}"#);
    let m = dir.path().join("m.txt");
    let o = rm_dpg(&["mesh-info", "--config", &cfg, "--levels", "2", "--write", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("triangles 96"));
    let o2 = rm_dpg(&["mesh-info", "--mesh", m.to_str().unwrap()]);
    assert_eq!(stdout(&o), stdout(&o2));
    assert_eq!(rm_dpg(&["mesh-info"]).status.code(), Some(2));
}
