//! End-to-end runs of the `pmlconv` binary: exit codes, output formats and the
//! failure manifest.

use std::path::Path;
use std::process::{Command, Output};

use pmlconv::harness::RunConfig;

fn pmlconv(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pmlconv"));
    cmd.args(args).arg("--out").arg(out).env_remove("PMLP_THREADS");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "ini") {
            let cfg = RunConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 5);
    let group_i = RunConfig::from_file(&dir.join("group_i.ini")).unwrap();
    assert_eq!(group_i.sweep.k_values, vec![3.1, 3.01, 3.001, 3.0]);
    let group_ii = RunConfig::from_file(&dir.join("group_ii.ini")).unwrap();
    assert_eq!(group_ii.sweep.k_values, vec![1.5, 3.0, 6.0]);
}

#[test]
fn sweep_writes_curves_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.ini",
        "[problem]\nsurface = sine\n[discretization]\nresolution = 8\n[sweep]\nk_values = 1.5\nl_values = 0.5, 1\n",
    );
    let out = dir.path().join("out");
    let r = pmlconv(&["sweep", "--threads", "1"], Some(&cfg), &out);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(out.join("sweep_k1.5.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("L,ReP,ImP,E_rel"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        for field in row.split(',') {
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17, "{field}");
        }
    }
    let dat = std::fs::read_to_string(out.join("sweep_k1.5.dat")).unwrap();
    assert!(dat.starts_with("# L E_rel"));
    let summary = std::fs::read_to_string(out.join("sweep_summary.txt")).unwrap();
    assert!(summary.contains("reference_l = 1.5000000000000000e0"), "{summary}");
    assert!(summary.contains("[sweep_k1.5]"));
    assert!(!out.join("failures.csv").exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad_key = write(dir.path(), "a.ini", "[pml]\nwidth = 2\n");
    assert_eq!(pmlconv(&["solve"], Some(&bad_key), &out).status.code(), Some(1));
    let bad_l = write(dir.path(), "b.ini", "[pml]\nthickness = -1\n");
    assert_eq!(pmlconv(&["solve"], Some(&bad_l), &out).status.code(), Some(1));
    let source_in_pml = write(dir.path(), "c.ini", "[problem]\nsource_x2 = 3.5\n");
    assert_eq!(pmlconv(&["solve"], Some(&source_in_pml), &out).status.code(), Some(1));
    assert_eq!(pmlconv(&["sweep", "--threads", "0"], None, &out).status.code(), Some(1));
    assert_eq!(pmlconv(&["bogus"], None, &out).status.code(), Some(1));
    assert_eq!(pmlconv(&["solve"], Some(&dir.path().join("missing.ini")), &out).status.code(), Some(1));
}

#[test]
fn point_failures_give_a_partial_run_with_manifest() {
    // Four doublings are too few for the lateral coupling of this PML to die out.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.ini",
        "[problem]\nsurface = sine\n[discretization]\nresolution = 8\nmax_level = 4\n[sweep]\nk_values = 1.5\nl_values = 0.5, 2\n",
    );
    let out = dir.path().join("out");
    let r = pmlconv(&["sweep"], Some(&cfg), &out);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    let manifest = std::fs::read_to_string(out.join("failures.csv")).unwrap();
    let mut lines = manifest.lines();
    assert_eq!(lines.next(), Some("k,L,error"));
    assert!(lines.next().unwrap().contains("insufficient PML absorption"), "{manifest}");
    assert_eq!(std::fs::read_to_string(out.join("sweep_k1.5.csv")).unwrap(), "L,ReP,ImP,E_rel\n");
    assert!(out.join("sweep_summary.txt").exists());
}
