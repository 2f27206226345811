use std::path::Path;
use std::process::Command;

fn hpe2d() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hpe2d"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SINGLE: &str = r#"scenario = "single"
output = "out"
grid.h = 1.0
grid.nx = 12
grid.nz = 10
robin.alpha1 = 0.5
robin.alpha2 = 1.0
robin.alpha3 = 0.25
solver.dt = 2e-3
solver.t_end = 0.04
initial.profile = "random"
initial.seed = 3
forcing.profile = "cosine"
"#;

#[test]
fn run_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "single.toml", SINGLE);
    let out = hpe2d().arg("run").arg(&cfg).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("[PASS] constraint"));
    let ledger = dir.path().join("out/ledger.csv");
    assert!(dir.path().join("out/final.snap").exists());
    let v = hpe2d().arg("verify").arg(&ledger).output().unwrap();
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stdout));
    assert!(String::from_utf8_lossy(&v.stdout).contains("0 mismatches"));
}

#[test]
fn rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "single.toml", SINGLE);
    for o in ["a", "b"] {
        let s = hpe2d().arg("run").arg(&cfg).arg("--output").arg(dir.path().join(o)).output().unwrap().status;
        assert!(s.success());
    }
    for f in ["ledger.csv", "final.snap", "summary.txt"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between reruns");
    }
}

#[test]
fn ensemble_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = SINGLE.replace("\"single\"", "\"ensemble\"") + "ensemble.amplitudes = [0.5, 1.0, 2.0]\nensemble.transient = 0.02\n";
    let cfg = write(dir.path(), "ens.toml", &text);
    for (w, o) in [("1", "w1"), ("3", "w3")] {
        let s = hpe2d()
            .args(["run", "--workers", w])
            .arg(&cfg)
            .arg("--output")
            .arg(dir.path().join(o))
            .output()
            .unwrap();
        assert!(s.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&s.stderr));
    }
    for j in 0..3 {
        let f = format!("ledger_{j:02}.csv");
        assert_eq!(std::fs::read(dir.path().join("w1").join(&f)).unwrap(), std::fs::read(dir.path().join("w3").join(&f)).unwrap());
    }
    assert_eq!(
        std::fs::read(dir.path().join("w1/summary.txt")).unwrap(),
        std::fs::read(dir.path().join("w3/summary.txt")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &(SINGLE.to_string() + "solver.viscosty = 1.0\n"));
    let out = hpe2d().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("viscosty"));
    let out = hpe2d().arg("verify").arg(dir.path().join("missing.csv")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn restart_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let first = write(dir.path(), "first.toml", &SINGLE.replace("0.04", "0.02").replace("\"out\"", "\"first\""));
    assert!(hpe2d().arg("run").arg(&first).output().unwrap().status.success());
    let second = SINGLE
        .replace("\"out\"", "\"second\"")
        .replace("initial.profile = \"random\"\ninitial.seed = 3", "initial.profile = \"snapshot\"\ninitial.path = \"first/final.snap\"");
    let second = write(dir.path(), "second.toml", &second);
    assert!(hpe2d().arg("run").arg(&second).output().unwrap().status.success());
    let whole = write(dir.path(), "whole.toml", &SINGLE.replace("\"out\"", "\"whole\""));
    assert!(hpe2d().arg("run").arg(&whole).output().unwrap().status.success());
    let a = hpe2d_core::experiment::load_snapshot(&dir.path().join("second/final.snap")).unwrap();
    let b = hpe2d_core::experiment::load_snapshot(&dir.path().join("whole/final.snap")).unwrap();
    assert_eq!(a.step, b.step);
    let d = a.theta.values().iter().zip(b.theta.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(d <= 1e-13 * b.theta.max_abs(), "{d}");
}
