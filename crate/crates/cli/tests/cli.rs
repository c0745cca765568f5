use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn driftwin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftwin")).args(args).current_dir(cwd).output().unwrap()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

const TWO_WINDOWS: &str = r#"[{"id": "w1", "intervals": [[0, 2]]}, {"id": "w2", "intervals": [[1, 3]]}]"#;

#[test]
fn atomize_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("windows.json"), TWO_WINDOWS).unwrap();
    let out = driftwin(&["atomize", "windows.json", "--out", "at"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["atoms.json", "incidence.csv"] {
        let got = fs::read_to_string(dir.path().join("at").join(name)).unwrap();
        assert_eq!(got, fs::read_to_string(golden(name)).unwrap(), "{name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("at/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "atomize");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_windows_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "[{").unwrap();
    let out = driftwin(&["atomize", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("windows JSON"));

    fs::write(dir.path().join("empty.json"), r#"[{"id": "w", "intervals": [[1, 1]]}]"#).unwrap();
    assert_eq!(driftwin(&["atomize", "empty.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn missing_input_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = driftwin(&["reconstruct", "incidence.csv", "R.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_thread_count_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_driftwin"))
        .args(["benchmark", "--runs", "1"])
        .env("DRIFTWIN_THREADS", "0")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn benchmark(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["benchmark", "--runs", "1", "--seed", "11", "--out", out];
    args.extend_from_slice(extra);
    let o = driftwin(&args, dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn benchmark_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path(), "a", &["--max-iter", "2000"]);
    benchmark(dir.path(), "b", &["--max-iter", "2000"]);
    for name in ["summary.csv", "runs.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let summary = fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    let mut ranks: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    ranks.dedup();
    assert_eq!(ranks, ["1.0", "1.4", "1.9", "2.2", "2.6"]);
    assert!(summary.contains("slsqp-constrained,not_implemented"));
}

#[test]
fn reconstruct_on_emitted_fixture() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path(), "bench", &["--ranks", "2.2", "--identifiable", "--emit-fixtures", "fx"]);
    let fx = dir.path().join("fx/rank2.2_run0");
    let inc = fx.join("incidence.csv");
    let r = fx.join("R.csv");
    let (inc, r) = (inc.to_str().unwrap(), r.to_str().unwrap());

    let cd = driftwin(&["reconstruct", inc, r, "--out", "cd.json"], dir.path());
    assert_eq!(cd.status.code(), Some(0), "{}", String::from_utf8_lossy(&cd.stderr));
    let cd: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cd.json")).unwrap()).unwrap();
    assert_eq!(cd["converged"], true);
    assert_eq!(cd["solver"], "cd");
    assert!(cd["objective"].as_f64().unwrap() < 1e-12);
    assert!(dir.path().join("cd.json.manifest.json").exists());

    let nm = driftwin(&["reconstruct", inc, r, "--solver", "nelder-mead", "--out", "nm.json"], dir.path());
    assert!(matches!(nm.status.code(), Some(0) | Some(3)));
    let nm: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("nm.json")).unwrap()).unwrap();
    assert!(nm["objective"].as_f64().unwrap() >= cd["objective"].as_f64().unwrap());

    let capped = driftwin(&["reconstruct", inc, r, "--max-iter", "1", "--out", "capped.json"], dir.path());
    assert_eq!(capped.status.code(), Some(3));
    let capped: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("capped.json")).unwrap()).unwrap();
    assert_eq!(capped["converged"], false);
}

#[test]
fn water_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let sim = driftwin(&["water", "simulate", "--households", "200", "--seed", "5", "--out", "w"], dir.path());
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let fit = driftwin(&["water", "fit", "w/logs.csv", "--out", "w/estimate.json"], dir.path());
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let pred = driftwin(
        &["water", "predict", "w/estimate.json", "--households", "1000", "--quantile", "0.95", "--out", "w/prediction.csv"],
        dir.path(),
    );
    assert!(pred.status.success(), "{}", String::from_utf8_lossy(&pred.stderr));
    assert!(start.elapsed().as_secs() < 60);

    let curve = fs::read_to_string(dir.path().join("w/prediction.csv")).unwrap();
    let rows: Vec<Vec<f64>> = curve
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|r| r[1] >= 0.0 && r[2] >= r[1]));

    let bad = driftwin(&["water", "predict", "w/estimate.json", "--households", "10", "--quantile", "1.5"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn water_accepts_paper_scale_flags() {
    let out = Command::new(env!("CARGO_BIN_EXE_driftwin"))
        .args(["water", "simulate", "--households", "12000", "--days", "28", "--reports-per-day", "4", "--help"])
        .output()
        .unwrap();
    assert!(out.status.success());
}
