use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use triharm::{parse_config, run_experiment, ExperimentSpec};

fn triharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triharm"))
        .args(args)
        .env_remove(triharm::SEED_ENV)
        .output()
        .expect("spawn triharm")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn canonical_run_writes_five_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "canonical.cfg", "# canonical instance\nmode = theorem1\n");
    let out = dir.path().join("out");
    let o = triharm(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["geometry.csv", "iterations.csv", "u1.csv", "u2.csv", "report.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("verdict: CERTIFIED"));

    let u1 = fs::read_to_string(out.join("u1.csv")).unwrap();
    assert!(!u1.contains('\r'));
    let mut lines = u1.lines();
    assert_eq!(lines.next(), Some("x,u"));
    assert_eq!(lines.clone().count(), 129);
    for field in lines.next().unwrap().split(',') {
        // d.dddddddddddddddde±x: 17 significant digits
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
    let iters = fs::read_to_string(out.join("iterations.csv")).unwrap();
    assert!(iters.starts_with("phase,iter,J,residual,x_norm,gap\n"));
    assert!(iters.contains("\nmountain_pass,") && iters.contains("\nekeland,"));
}

#[test]
fn lambda_above_bar_names_the_gate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "big.cfg", "[problem]\nlambda = 50\n");
    let out = dir.path().join("out");
    let o = triharm(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "failure: lambda_gate");
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("clause: lambda_gate"), "{report}");
}

#[test]
fn unwritable_out_dir_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "");
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = triharm(&["run", &cfg, "--out", blocker.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(triharm(&["geometry", missing.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "mode = theorem1\n[grid]\nnodez = 65\n");
    let o = triharm(&["geometry", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn geometry_verb_prints_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.cfg", "[grid]\nnodes = 65\n");
    let o = triharm(&["geometry", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("quantity,value\nrho,5.0000000000000000e-1\n"), "{text}");
    assert!(text.contains("\nlambda_bar,") && text.contains("\nalpha,"));
}

#[test]
fn seed_comes_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_triharm"))
        .arg("verify")
        .env(triharm::SEED_ENV, "11")
        .output()
        .unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("triharm verification battery, seed 11\n"), "{text}");
    assert!(o.status.success(), "{text}");
}

#[test]
fn library_run_matches_config_round_trip() {
    let spec = ExperimentSpec::theorem2_default();
    assert_eq!(parse_config(&spec.to_config()).unwrap(), spec);
    let dir = tempfile::tempdir().unwrap();
    let o = run_experiment(&spec, dir.path()).unwrap();
    assert!(o.certified, "{}", o.report);
    assert!(o.report.contains("mode: theorem2"));
}
