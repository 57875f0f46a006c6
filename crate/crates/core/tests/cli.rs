use std::process::{Command, Output};

fn covrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covrecon"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: &[&str] = &["--set", "n=16", "--set", "M=128", "--set", "L=4", "--replicates", "2"];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(args: &[String]) -> Output {
    covrecon(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn reconstruct_is_byte_deterministic() {
    let args = with(&["reconstruct"], SMALL);
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("seed,L,h,M"));
    assert_eq!(rows.len(), 3);
}

#[test]
fn exact_covariance_bypass_zeroes_e3() {
    let args = with(&["reconstruct", "--set", "exact_covariance=true"], SMALL);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let e3 = header.iter().position(|h| *h == "e3").unwrap();
    for row in lines {
        let v: f64 = row.split(',').nth(e3).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn config_file_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\n[reconstruct]\nn = 8\nL = 3\nM = 64\nreplicates = 1\n").unwrap();
    let out_path = dir.path().join("out.csv");
    let out = covrecon(&[
        "reconstruct",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("# n = 8"));
    assert!(text.contains("# M = 64"));
}

#[test]
fn config_errors_exit_one_and_name_the_field() {
    let out = covrecon(&["reconstruct", "--set", "bogus=3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    let out = covrecon(&["reconstruct", "--set", "tau=5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
    let out = covrecon(&["plan", "--set", "eps=2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_invariants_passes_and_detects_corruption() {
    let ok = covrecon(&["check-invariants"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    // defaults are documented in the header
    assert!(text.contains("# model = brownian-1d"));
    assert!(!text.contains("FAIL"));

    let bad = covrecon(&["check-invariants", "--set", "corrupt_mass=true"]);
    assert_eq!(bad.status.code(), Some(2));
    let text = String::from_utf8(bad.stdout).unwrap();
    assert!(text.contains("spectral_solver,mass-orthonormality,FAIL"));
    assert!(text.contains("spectral_solver,weyl,FAIL"));
}

#[test]
fn sample_then_estimate_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    let out = covrecon(&["sample", "--set", "n=8", "--set", "L=4", "--set", "M=50", "--out", samples.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let est = covrecon(&["estimate", "--input", samples.to_str().unwrap(), "--set", "tau=4", "--set", "n=8", "--set", "L=4"]);
    assert_eq!(est.status.code(), Some(0), "{}", String::from_utf8_lossy(&est.stderr));
    let text = String::from_utf8(est.stdout).unwrap();
    assert!(text.contains("# kind=tapered"));
    assert!(text.contains("# tau=4"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 9);
}

#[test]
fn spectrum_and_plan_outputs() {
    let out = covrecon(&["spectrum", "--set", "n=32", "--set", "L=3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);

    let out = covrecon(&["plan", "--eps", "0.2,0.1,0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 9);
    assert!(text.lines().filter(|l| l.starts_with("1.0000000000000000e-2")).all(|l| l.contains(",22,")));
}

#[test]
fn converge_truncation_axis() {
    let out = covrecon(&["converge", "--axis", "truncation", "--sweep", "8,16,32,64"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let slope: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# slope="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope + 1.5).abs() < 0.05);
    let out = covrecon(&["converge", "--axis", "truncation", "--sweep", "8,16"]);
    assert_eq!(out.status.code(), Some(1));
}
