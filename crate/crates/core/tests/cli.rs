use std::process::Command;

use gwpt_hwp::experiment::{Example, ExperimentConfig, ReferenceSource, CSV_COLUMNS, CSV_VERSION_LINE};
use gwpt_hwp::IndexNorm;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gwpt-hwp"))
}

const QUICK: [&str; 10] = ["--eps", "1/64", "--packets", "6", "--tf", "1/16", "--dt-c", "1/64", "--dt-gt", "1/256"];

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.cfg");
    std::fs::write(
        &path,
        "# 2D cosine example, long run\nexample = cosine2d\neps = 1/128\nn = 9\nindex_norm = l1\nquad = 50\n\
         dt_c = 1/128\ndt_gt = 1/2048\nt_final = 2\nreference = load:/tmp/ref.bin\n",
    )
    .unwrap();
    let mut cfg = ExperimentConfig::from_file(&path).unwrap();
    assert_eq!(cfg.example, Example::Cosine2d);
    assert_eq!(cfg.dimension(), 2);
    assert_eq!(cfg.index_norm, IndexNorm::L1);
    assert_eq!(cfg.nq(), 50);
    assert_eq!(cfg.t_final, 2.0);
    assert_eq!(cfg.reference, ReferenceSource::Load("/tmp/ref.bin".into()));
    cfg.validate().unwrap();
    cfg.set("eps", "0.01").unwrap();
    assert_eq!(cfg.eps, 0.01);
}

#[test]
fn run_prints_versioned_csv() {
    let out = bin().arg("run").args(QUICK).args(["--reference", "none"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_VERSION_LINE);
    assert_eq!(lines[1], CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 3);
    assert!(lines[2].contains(",NaN,"));
}

#[test]
fn config_errors_exit_with_two() {
    for args in [
        vec!["run", "--dt-c", "1/128", "--dt-gt", "1/384"],
        vec!["run", "--eps", "abc"],
        vec!["run", "--set", "nonsense=1"],
        vec!["run", "--example", "cosine3d"],
        vec!["sweep", "--axis", "bogus", "--values", "1"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = bin().args(["run", "--config", "/nonexistent/gwpt.cfg"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn invariant_abort_exits_with_one() {
    // RK4 at Δt_gt = 1/2 breaks the symplectic identities well beyond 1e-6
    let out =
        bin().args(["run", "--dt-c", "1", "--dt-gt", "1/2", "--tf", "4", "--reference", "none"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invariant violated"));
}

#[test]
fn sweep_writes_one_row_per_value_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = bin()
        .arg("sweep")
        .args(QUICK)
        .args(["--axis", "n", "--values", "4,6,8", "--out"])
        .arg(&csv)
        .args(["--cache-dir"])
        .arg(dir.path().join("cache"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.contains("order"));
    assert_eq!(std::fs::read_dir(dir.path().join("cache")).unwrap().count(), 1);
}

#[test]
fn profile_row_counts_match_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("fig1");
    let out = bin()
        .arg("profile")
        .args(QUICK)
        .args(["--set", "profile_eta_points=101", "--set", "profile_x_stride=4", "--out"])
        .arg(&base)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let w = std::fs::read_to_string(dir.path().join("fig1_w.csv")).unwrap();
    let psi = std::fs::read_to_string(dir.path().join("fig1_psi.csv")).unwrap();
    assert_eq!(w.lines().count(), 2 + 101);
    // 1D grid at ε = 1/64: 4096 points, every fourth kept
    assert_eq!(psi.lines().count(), 2 + 1024);
}

#[test]
fn profile_at_time_zero_matches_the_datum() {
    let out = bin()
        .args(["profile", "--eps", "1/64", "--packets", "4", "--tf", "0", "--set", "profile_x_stride=16"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let psi_section = text.split(CSV_VERSION_LINE).nth(2).unwrap();
    for line in psi_section.lines().skip(2) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - v[3]).abs() < 1e-12 && (v[2] - v[4]).abs() < 1e-12, "{line}");
    }
}

#[test]
fn timing_reports_each_pair() {
    let out = bin()
        .arg("timing")
        .args(QUICK)
        .args(["--n-values", "0,4", "--eps-values", "1/64,1/256", "--repeats", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2 + 4);
    assert!(text.lines().nth(1).unwrap().starts_with("n,eps,wall_time_core_s"));
}

#[test]
fn series_samples_every_interval() {
    let out = bin().arg("series").args(QUICK).args(["--every", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    // t = 0, 1/32, 1/16
    assert_eq!(text.lines().count(), 2 + 3);
    for line in text.lines().skip(2) {
        let err: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(err < 1e-6, "{line}");
    }
}
