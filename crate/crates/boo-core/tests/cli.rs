//! End-to-end smoke tests for the `boo` binary: exit codes, file output,
//! and the documented help defaults.

use std::process::Command;

use boo_core::harness;
use boo_core::optimizers::Algorithm;

fn boo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_boo"))
}

#[test]
fn list_functions_prints_the_registry() {
    let out = boo().arg("list-functions").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in boo_core::benchmarks::names() {
        assert!(text.contains(name), "{name} missing from listing");
    }
}

#[test]
fn unknown_function_is_a_usage_error_listing_the_registry() {
    let out = boo().args(["run", "--func", "nosuch"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stderr).unwrap();
    assert!(text.contains("hartmann3"), "registry not listed: {text}");
}

#[test]
fn run_writes_trace_and_aggregate_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = boo()
        .args([
            "run",
            "--func",
            "quadratic2d",
            "--algo",
            "soo",
            "--m",
            "2",
            "--budget",
            "20",
            "--hyper",
            "fixed",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = dir
        .path()
        .join(harness::trace_file_name(Algorithm::Soo, "quadratic2d", 0));
    let rows = harness::read_trace_csv(&trace).unwrap();
    assert!(rows.last().unwrap().eval <= 20, "budget overrun");
    assert!(dir.path().join(harness::aggregate_file_name("quadratic2d")).exists());
}

#[test]
fn ablate_rejects_m_without_an_integer_root() {
    let out = boo()
        .args(["ablate", "--func", "hartmann3", "--m", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stderr).unwrap();
    assert!(
        text.contains("8") && text.contains("27"),
        "nearest valid m not suggested: {text}"
    );
}

#[test]
fn help_documents_the_confidence_and_scheme_defaults() {
    let out = boo().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("beta_p = 2*ln(pi^2*p^3 / (3*eta))"));
    assert!(text.contains("a = max(2, floor((sqrt(N)/2)^(1/D)))"));
    assert!(text.contains("floor(sqrt(p))"));
}
