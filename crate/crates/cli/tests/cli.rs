use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patchbeam"))
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("patchbeam-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn bad_config_exits_with_two() {
    let d = scratch("bad");
    let cfg = d.join("bad.cfg");
    fs::write(&cfg, "study.eps = 0.1, 0.2\n").unwrap();
    let out = bin().args(["study", "--config"]).arg(&cfg).arg("--out").arg(&d).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly decreasing"));

    let out = bin().args(["limit", "--tol", "2"]).arg("--out").arg(&d).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["limit", "--config"]).arg(d.join("missing.cfg")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn limit_writes_outputs() {
    let d = scratch("limit");
    let cfg = d.join("ok.cfg");
    fs::write(&cfg, "regime.p = 2\nload.f1 = 1\nlimit.elements = 8\nlimit.section_h = 0.25\n").unwrap();
    let out = bin().args(["limit", "--config"]).arg(&cfg).arg("--out").arg(&d).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 7);
    let limit = fs::read_to_string(d.join("limit.csv")).unwrap();
    assert!(limit.starts_with("y1,zeta1,zeta2,zeta3,c"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("cubic-to-linear"));
}

#[test]
fn study_zero_loads_passes_strict() {
    let d = scratch("study");
    let cfg = d.join("zero.cfg");
    fs::write(&cfg, "study.eps = 0.4\nlimit.elements = 6\nlimit.section_h = 0.3\n").unwrap();
    let out = bin().args(["study", "--strict", "--threads", "2", "--config"]).arg(&cfg).arg("--out").arg(&d).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(d.join("summary.txt")).unwrap().contains("verdict: PASS"));
    assert!(d.join("study.csv").exists());
}
