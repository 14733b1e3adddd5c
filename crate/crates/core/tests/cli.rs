use std::path::Path;
use std::process::{Command, Output};

use darkfringe::formats;

fn darkfringe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_darkfringe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = darkfringe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stage_by_stage_matches_the_object() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let grid = ["--rows", "4", "--cols", "5", "--seed", "11"];
    let with = |extra: &[&str], out: &Path| -> Vec<String> {
        let mut v: Vec<String> = grid.iter().map(|a| a.to_string()).collect();
        v.extend(["--out".to_string(), s(out).to_string()]);
        v.extend(extra.iter().map(|a| a.to_string()));
        v
    };
    let run = |extra: &[&str], out: &Path| {
        let args = with(extra, out);
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    };

    run(&["simulate"], &d.join("sim"));
    let images: Vec<String> = (1..=4).map(|j| s(&d.join(format!("sim/image_{j}.pgm"))).to_string()).collect();
    let mut detect = vec!["detect"];
    detect.extend(images.iter().map(String::as_str));
    run(&detect, &d.join("det"));

    let maps: Vec<String> = (1..=4).map(|j| s(&d.join(format!("det/fringe_maps_{j}.csv"))).to_string()).collect();
    let mut mark = vec!["mark-invalid"];
    mark.extend(maps.iter().map(String::as_str));
    run(&mark, &d.join("inv"));

    let (ma, mb) = (d.join("inv/matrix_a.csv"), d.join("inv/matrix_b.csv"));
    run(&["paths", "--matrix-a", s(&ma), "--matrix-b", s(&mb)], &d.join("paths"));
    let plan = formats::read_path_plan(&d.join("paths/paths.csv")).unwrap();
    assert!(plan.unreachable().is_empty());

    let ratios = d.join("inv/edge_ratios.csv");
    let truth = d.join("sim/object.cf32");
    let mut rec = vec!["reconstruct", "--matrix-a", s(&ma), "--matrix-b", s(&mb), "--ratios", s(&ratios), "--truth", s(&truth)];
    rec.extend(images.iter().map(String::as_str));
    run(&rec, &d.join("rec"));
    let metrics = formats::read_metrics_csv(&d.join("rec/metrics.csv")).unwrap();
    assert_eq!(metrics.phase_rmse, 0.0);
    assert_eq!(metrics.unknown_frac, 0.0);

    let reconstruction = d.join("rec/reconstruction.cf32");
    let out = ok(&["metrics", "--reconstruction", s(&reconstruction), "--truth", s(&truth)]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("phase_rmse=0 "));
}

#[test]
fn pipeline_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["pipeline", "--rows", "3", "--cols", "3", "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("phase_rmse=0"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["unknown_frac"], 0.0);
    for f in manifest["files"].as_array().unwrap() {
        assert!(dir.path().join(f["name"].as_str().unwrap()).exists());
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn single_unit_pipeline_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["pipeline", "--rows", "1", "--cols", "1", "--out", s(dir.path())]);
    let a = formats::read_bool_matrix(&dir.path().join("matrix_a.csv")).unwrap();
    let b = formats::read_bool_matrix(&dir.path().join("matrix_b.csv")).unwrap();
    assert_eq!((a.dim(), b.dim()), ((1, 0), (0, 1)));
    let m = formats::read_metrics_csv(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!((m.phase_rmse, m.unknown_frac), (0.0, 0.0));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "rows = 2\ncols = 2\nm = 3\n").unwrap();
    let out = dir.path().join("p");
    ok(&["patterns", "--config", s(&cfg), "--cols", "3", "--out", s(&out)]);
    let lib = formats::read_library_csv(&out.join("reference_library.csv")).unwrap();
    assert_eq!(lib.m(), 3);
    let pattern = formats::read_pgm8(&out.join("pattern_1.pgm")).unwrap();
    assert_eq!(pattern.dim(), (64, 96));
}

#[test]
fn psf_sweep_uses_the_requested_radii() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["psf-sweep", "--kind", "gaussian", "--radii", "2,18,34", "--out", s(dir.path())]);
    let rows = formats::read_sweep_csv(&dir.path().join("fringe_minima_gaussian.csv")).unwrap();
    let mut radii: Vec<f64> = rows.iter().map(|r| r.1).collect();
    radii.dedup();
    assert_eq!(radii, vec![2.0, 18.0, 34.0]);

    ok(&["psf-sweep", "--mode", "valley", "--kind", "gaussian", "--radii", "16,2048", "--out", s(dir.path())]);
    let rows = formats::read_sweep_csv(&dir.path().join("radius_sweep_gaussian.csv")).unwrap();
    assert_eq!(rows.len(), 2);
}

#[test]
fn montecarlo_blocking_writes_stats() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["montecarlo-blocking", "--sigmas", "0.1,0.2", "--trials", "200", "--out", s(dir.path())]);
    let stats = formats::read_blocking_csv(&dir.path().join("blocking.csv")).unwrap();
    assert_eq!(stats.len(), 2);
    assert!(stats.iter().all(|s| s.trials == 200 && s.retry_block_rate <= s.single_pass_block_rate));
}

#[test]
fn exit_statuses() {
    assert_eq!(darkfringe(&["--help"]).status.code(), Some(0));
    assert_eq!(darkfringe(&["pipeline", "--bogus"]).status.code(), Some(1));
    assert_eq!(darkfringe(&["pipeline", "--set", "colour=red"]).status.code(), Some(1));
    assert_eq!(darkfringe(&["pipeline", "--rows", "0"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.pgm");
    let out = darkfringe(&["detect", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}
