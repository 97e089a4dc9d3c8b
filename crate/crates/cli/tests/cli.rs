use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../core/corpus/{name}"))
}

fn invar_opt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invar-opt"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn compile_emits_strict_ir() {
    let out = invar_opt(&["compile", corpus("g.moo").to_str().unwrap()]);
    assert!(out.status.success());
    let ir = String::from_utf8(out.stdout).unwrap();
    assert!(ir.contains("!invariant.group"));
    assert!(ir.contains("strip"));
}

#[test]
fn opt_lowers_by_default_and_reports() {
    let out = invar_opt(&["opt", corpus("bar.moo").to_str().unwrap()]);
    assert!(out.status.success());
    let ir = String::from_utf8(out.stdout).unwrap();
    assert!(!ir.contains("!invariant"));
    let report = String::from_utf8(out.stderr).unwrap();
    assert!(report.contains("devirtualized_calls=2"), "{report}");
}

#[test]
fn run_prints_the_trace() {
    let out = invar_opt(&["run", corpus("g.moo").to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "print 1\nprint 2\n");
}

#[test]
fn diff_with_support_unit_is_equal() {
    let out = invar_opt(&[
        "diff",
        corpus("outline_ctor_user.moo").to_str().unwrap(),
        corpus("outline_ctor_impl.moo").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("equal"));
}

#[test]
fn diff_reports_skipped_on_ub() {
    let out = invar_opt(&["diff", corpus("ub_placement.moo").to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("stale-dynamic-info"));
}

#[test]
fn fuzz_honors_seed_env() {
    let out = Command::new(env!("CARGO_BIN_EXE_invar-opt"))
        .args(["fuzz", "--count", "10", "--seed", "1"])
        .env("INVAR_OPT_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("10 programs"));
}

#[test]
fn usage_errors_exit_3_and_missing_file_exits_1() {
    assert_eq!(invar_opt(&["bogus"]).status.code(), Some(3));
    assert_eq!(invar_opt(&["compile", "no-such-file.moo"]).status.code(), Some(1));
}
