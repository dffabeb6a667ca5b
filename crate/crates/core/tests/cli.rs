use std::path::Path;
use std::process::{Command, Output};

fn qhydro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhydro"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn manifest(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("manifest.txt")).unwrap()
}

#[test]
fn presets_are_listed() {
    let o = qhydro(&["presets"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "harmonic-A",
        "harmonic-B",
        "harmonic-C",
        "harmonic-D",
        "doublewell-mwls",
        "doublewell-dvr",
        "doublewell-compare",
    ] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn completed_run_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qhydro(&["run", "harmonic-C", "--out", out, "--override", "integration.t_end=50"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trajectories.dat", "records.dat", "density.dat", "manifest.txt", "comparison.dat"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let m = manifest(dir.path());
    assert!(m.contains("result.termination = t_end reached"), "{m}");
    assert!(m.contains("system.mass = 2000"));
    assert!(m.contains("integration.t_end = 50"));
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = qhydro(&[
            "run",
            "harmonic-A",
            "--out",
            d.path().to_str().unwrap(),
            "--override",
            "integration.t_end=40",
        ]);
        assert_eq!(code(&o), 0);
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("trajectories.dat")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn crossing_exits_with_physics_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhydro(&[
        "run",
        "harmonic-D",
        "--out",
        dir.path().to_str().unwrap(),
        "--override",
        "integration.t_end=300",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));
    let m = manifest(dir.path());
    let onset: f64 = m
        .lines()
        .find_map(|l| l.strip_prefix("result.crossing_onset = "))
        .expect("onset recorded")
        .parse()
        .unwrap();
    assert!(onset > 150.0 && onset < 300.0, "{onset}");
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\n[system]\nmas = 10\n").unwrap();
    for args in [
        vec!["run", bad.to_str().unwrap()],
        vec!["run", "no-such-preset"],
        vec!["run", "harmonic-C", "--override", "mwls.bogus=1"],
        vec!["run", "harmonic-C", "--override", "dvr.n_points=0"],
        vec!["frobnicate"],
    ] {
        let o = qhydro(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn compare_subcommand_reads_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = qhydro(&[
        "run",
        "harmonic-C",
        "--out",
        run.to_str().unwrap(),
        "--override",
        "integration.t_end=30",
    ]);
    assert_eq!(code(&o), 0);
    let report = dir.path().join("cmp.dat");
    let o = qhydro(&[
        "compare",
        run.to_str().unwrap(),
        run.join("analytic_trajectories.dat").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(report).unwrap();
    let worst = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .take(100)
        .map(|l| l.split_whitespace().nth(1).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
}
