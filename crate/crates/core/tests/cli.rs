mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use ndarray::concatenate;
use ndarray::Axis;

fn kpcovr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpcovr")).args(args).output().unwrap()
}

fn combined_csv(dir: &Path) -> String {
    let (x, y) = planted(9, 24, 3, 1, 0.1);
    let header: Vec<String> = ["f0", "f1", "f2", "targets:y"].iter().map(|s| s.to_string()).collect();
    let path = dir.join("data.csv");
    write_csv(&path, &header, concatenate(Axis(1), &[x.view(), y.view()]).unwrap().view());
    path.to_str().unwrap().to_string()
}

fn assert_rejected(args: &[&str], needle: &str) {
    let out = kpcovr(args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(1), "{args:?} should fail, stderr: {stderr}");
    assert!(stderr.contains(needle), "{args:?}: expected '{needle}' in {stderr}");
}

#[test]
fn invalid_configurations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = combined_csv(dir.path());
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let base = ["run", "--features", &data, "--out", out];
    let with = |extra: &[&'static str]| base.iter().copied().chain(extra.iter().copied()).collect::<Vec<&str>>();

    assert_rejected(&with(&["--method", "pca", "--alpha", "0.3"]), "error:");
    assert_rejected(&with(&["--method", "kpcovr", "--alpha", "1.5"]), "error:");
    assert_rejected(&with(&["--method", "kpcovr", "--m-active", "5"]), "error:");
    assert_rejected(&with(&["--method", "kpcovr", "--kernel", "linear", "--gamma", "0.1"]), "--gamma");
    assert_rejected(&with(&["--method", "pcovr", "--kernel", "rbf"]), "error:");
    assert_rejected(&with(&["--method", "pcovr", "--groups", "missing"]), "missing");
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b,targets:y\n1,2,3\n4,oops,6\n").unwrap();
    let out = dir.path().join("o");
    assert_rejected(
        &["run", "--features", path.to_str().unwrap(), "--method", "ridge", "--out", out.to_str().unwrap()],
        ":3:",
    );
}

#[test]
fn run_writes_both_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = combined_csv(dir.path());
    let prefix = dir.path().join("map");
    let out = kpcovr(&["run", "--features", &data, "--method", "sparse-kpcovr", "--m-active", "6", "--out", prefix.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("map.losses.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "alpha,n_latent,split,l_proj,l_regr,l_total");
    assert_eq!(table.lines().count(), 3);
    let doc = dir.path().join("map.map.json");
    assert!(kpcovr(&["rescore", doc.to_str().unwrap()]).status.success());
}
