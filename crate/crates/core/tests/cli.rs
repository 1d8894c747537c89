use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn branchlight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_branchlight")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key} in {text}")).parse().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn cost_of_a_single_edge() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write(dir.path(), "single_edge.json", r#"{"nodes":[[0,0],[3,4]],"edges":[[0,1]],"sinks":{"1":1.0}}"#);
    let o = branchlight(&["cost", "--tree", &tree, "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "cost=5.0");
}

#[test]
fn closed_form_prints_branch_lengths_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cf");
    let o = branchlight(&[
        "closed-form",
        "--alpha",
        "1",
        "--c",
        "0.5",
        "--theta0",
        "0.7853981634",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "ell1=2.0"), "{text}");
    assert!((value(&text, "ell0") - 2.0).abs() < 1e-9);
    assert!((value(&text, "mass0") - 2.0 * std::f64::consts::FRAC_PI_4.sin()).abs() < 1e-9);
    let csv = fs::read_to_string(out.join("gamma1.csv")).unwrap();
    assert!(csv.starts_with("s,q,z,u\n"));
    assert!(out.join("measure.svg").exists());
}

#[test]
fn sunlight_of_a_horizontal_segment() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"segments":[{"a":[0,0],"b":[2,0],"pieces":[{"t0":0,"t1":1,"density":1}]}],"atoms":[]}"#,
    );
    let o = branchlight(&["sunlight", "--measure", &m, "--theta0", "1.5707963267948966"]);
    assert_eq!(o.status.code(), Some(0));
    let s = value(&stdout(&o), "sunlight");
    assert!((s - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-11);
}

#[test]
fn alpha_zero_uniform_field() {
    let o = branchlight(&["alpha-zero", "--uniform", "--c", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!((value(&text, "K") - 4.0).abs() < 1e-6);
    assert!(text.contains("verdict=UNBOUNDED"));
    let o = branchlight(&["alpha-zero", "--uniform", "--c", "5"]);
    assert!(stdout(&o).contains("verdict=ZERO"));
}

#[test]
fn optimize_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.json",
        r#"{"alpha":0.75,"c":1.0,"theta0":0.7853981633974483,"angles":[0.0,1.5707963267948966,2.356194490192345],"cells":48}"#,
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_branchlight"))
            .args(["optimize", "--config", &cfg, "--out-dir", out.to_str().unwrap()])
            .env("BRANCHLIGHT_THREADS", "2")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (o.stdout, fs::read(out.join("densities.csv")).unwrap(), fs::read(out.join("report.json")).unwrap())
    };
    let (a, b) = (run("one"), run("two"));
    assert_eq!(a, b);
    assert!(dir.path().join("one/family.svg").exists());
}

#[test]
fn optimize_flags_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.json",
        r#"{"alpha":0.75,"c":1.0,"theta0":0.7853981633974483,"angles":[0.0,2.356194490192345],"cells":32,"max_passes":1,"seeds":[1]}"#,
    );
    assert_eq!(branchlight(&["optimize", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn phototropism_table() {
    let o = branchlight(&["phototropism", "--alpha", "1", "--c", "0.5", "--theta0", "0.7853981633974483"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let diff: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(diff > 0.0);
    }
}

#[test]
fn check_theory_small_grid() {
    let o = branchlight(&["check-theory", "--grid", "40", "--g-points", "1000", "--samples", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.starts_with("check,alpha,points,worst,argmin,pass\n"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn input_errors_exit_one() {
    assert_eq!(branchlight(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(branchlight(&["cost", "--alpha", "1", "--bogus"]).status.code(), Some(1));
    let o = branchlight(&["sunlight", "--measure", "/definitely/missing.json", "--theta0", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = Command::new(env!("CARGO_BIN_EXE_branchlight"))
        .args(["alpha-zero", "--uniform", "--c", "1"])
        .env("BRANCHLIGHT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
