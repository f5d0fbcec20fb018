//! End-to-end checks of the binary: exit codes, file outputs and seeded
//! reproducibility through the actual command-line surface.

use std::path::{Path, PathBuf};
use std::process::Command;

fn famlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_famlab"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).expect("output file exists")
}

#[test]
fn run_emits_certificate_and_report() {
    let out = tempfile::tempdir().unwrap();
    let status = famlab()
        .arg("run")
        .arg(fixture("fam_limit_run.json"))
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let report = read(out.path(), "report.csv");
    assert!(report.lines().skip(1).all(|l| l.ends_with("pass")));
    let cert = read(out.path(), "certificate.json");
    assert!(cert.contains("\"h_star\": 16"));
}

#[test]
fn verify_round_trips_a_certificate() {
    let out = tempfile::tempdir().unwrap();
    assert!(famlab()
        .arg("run")
        .arg(fixture("fam_limit_exhaustive.json"))
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap()
        .success());
    let verify_dir = tempfile::tempdir().unwrap();
    let status = famlab()
        .arg("verify")
        .arg(out.path().join("certificate.json"))
        .arg("--out-dir")
        .arg(verify_dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let report = read(verify_dir.path(), "verify.csv");
    assert!(report.lines().skip(1).all(|l| l.ends_with("pass")));
}

#[test]
fn tampered_certificate_is_rejected() {
    let out = tempfile::tempdir().unwrap();
    assert!(famlab()
        .arg("run")
        .arg(fixture("fam_limit_exhaustive.json"))
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap()
        .success());
    let path = out.path().join("certificate.json");
    let body = std::fs::read_to_string(&path).unwrap();
    // inflate the reported success average
    let tampered = body.replace("\"success_averages\": [\n      \"1\"", "\"success_averages\": [\n      \"2\"");
    assert_ne!(body, tampered, "tamper target present");
    std::fs::write(&path, tampered).unwrap();
    let status = famlab()
        .arg("verify")
        .arg(&path)
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn exit_codes_distinguish_failures() {
    // missing input -> 3
    let status = famlab().arg("run").arg("/definitely/not/here.json").status().unwrap();
    assert_eq!(status.code(), Some(3));
    // parse error -> 2
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kind\": \"nope\"}").unwrap();
    let status = famlab().arg("run").arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));
    // exhausted budget -> 4
    let status = famlab()
        .arg("run")
        .arg(fixture("fam_limit_run.json"))
        .arg("--budget")
        .arg("1")
        .arg("--out-dir")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn seed_env_and_flag_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(famlab()
        .arg("run")
        .arg(fixture("fam_limit_run.json"))
        .arg("--seed")
        .arg("99")
        .arg("--out-dir")
        .arg(a.path())
        .status()
        .unwrap()
        .success());
    assert!(famlab()
        .arg("run")
        .arg(fixture("fam_limit_run.json"))
        .env("FAMLAB_SEED", "99")
        .arg("--out-dir")
        .arg(b.path())
        .status()
        .unwrap()
        .success());
    assert_eq!(
        read(a.path(), "certificate.json"),
        read(b.path(), "certificate.json")
    );
}

#[test]
fn threaded_run_matches_description() {
    // more workers may find a different witness, but the run must still
    // succeed and verify; with one worker it is byte-identical to default
    let out = tempfile::tempdir().unwrap();
    let status = famlab()
        .arg("run")
        .arg(fixture("fam_limit_run.json"))
        .arg("--threads")
        .arg("4")
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let report = read(out.path(), "report.csv");
    assert!(report.lines().skip(1).all(|l| l.ends_with("pass")));
}

#[test]
fn suites_and_sweeps_run_clean() {
    let out = tempfile::tempdir().unwrap();
    for f in ["density_sweep.json", "intnum_sandwich.json", "tree_audit.json"] {
        let status = famlab()
            .arg("run")
            .arg(fixture(f))
            .arg("--out-dir")
            .arg(out.path())
            .status()
            .unwrap();
        assert!(status.success(), "{f} failed");
    }
    let output = famlab().arg("suite").arg("integration").output().unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("suite integration: pass"));
}
