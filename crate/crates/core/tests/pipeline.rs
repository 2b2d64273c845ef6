use std::fs;
use std::path::Path;

use sbdrift::experiments::{run_clt, run_edge, run_preflight, run_rate, run_stress};
use sbdrift::{Error, ExperimentConfig, RunOptions, Testbed};

fn small(root: &Path, testbeds: &[Testbed]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_testbeds(testbeds);
    cfg.output = root.to_path_buf();
    cfg.rate.m_list = Some(vec![1000, 2000]);
    cfg.rate.reps = Some(3);
    cfg.clt.m_list = vec![1000];
    cfg.clt.reps = 8;
    cfg.edge.m = 1000;
    cfg.edge.reps = 3;
    cfg.edge.offsets = vec![0.4, 0.1];
    cfg.stress.m = 1000;
    cfg.stress.reps = 3;
    cfg
}

fn read_all(paths: &[std::path::PathBuf]) -> Vec<Vec<u8>> {
    paths.iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn rate_rerun_is_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let opts = RunOptions::default();
    let ra = run_rate(&small(a.path(), &[Testbed::GG1]), &opts).unwrap();
    let rb = run_rate(&small(b.path(), &[Testbed::GG1]), &opts).unwrap();
    assert!(!ra.artifacts.raw.is_empty());
    assert_eq!(read_all(&ra.artifacts.raw), read_all(&rb.artifacts.raw));
    assert_eq!(read_all(&ra.artifacts.processed), read_all(&rb.artifacts.processed));
}

#[test]
fn seed_changes_the_raw_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let opts = RunOptions::default();
    let ca = small(a.path(), &[Testbed::GG1]);
    let mut cb = small(b.path(), &[Testbed::GG1]);
    cb.seed += 1;
    let ra = run_rate(&ca, &opts).unwrap();
    let rb = run_rate(&cb, &opts).unwrap();
    assert_ne!(read_all(&ra.artifacts.raw), read_all(&rb.artifacts.raw));
}

#[test]
fn manifest_lists_every_raw_file_with_hash_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), &[Testbed::MM1]);
    let out = run_rate(&cfg, &RunOptions::default()).unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(&out.artifacts.manifest).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
    assert_eq!(manifest["seed"], cfg.seed);
    let files = manifest["files"].as_array().unwrap();
    for raw in &out.artifacts.raw {
        let rel = raw.strip_prefix(dir.path()).unwrap().display().to_string();
        let entry = files
            .iter()
            .find(|f| f["path"] == rel.as_str())
            .expect("raw file listed");
        assert_eq!(entry["kind"], "raw");
        assert_eq!(entry["seed"], cfg.seed);
        assert_eq!(entry["config_hash"], cfg.hash());
        assert_eq!(entry["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn oracle_ratio_column_matches_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_rate(&small(dir.path(), &[Testbed::GG1]), &RunOptions::default()).unwrap();
    let path = out
        .artifacts
        .raw
        .iter()
        .find(|p| p.ends_with("rate_per_rep.csv"))
        .unwrap();
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (ie, ih, ig) = (col("err_or"), col("err_hat"), col("gamma"));
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let err_or: f64 = rec[ie].parse().unwrap();
        let err_hat: f64 = rec[ih].parse().unwrap();
        let gamma: f64 = rec[ig].parse().unwrap();
        assert!(err_hat >= err_or);
        assert!((gamma - err_hat / err_or).abs() <= 1e-12 * gamma);
        n += 1;
    }
    assert_eq!(n, 6);
}

#[test]
fn single_size_has_no_slope() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), &[Testbed::GG1]);
    cfg.rate.m_list = Some(vec![1000]);
    let out = run_rate(&cfg, &RunOptions::default()).unwrap();
    let fit = &out.fits[0];
    assert_eq!(fit.slope_oracle, None);
    assert_eq!(fit.slope_selected, None);
    assert!(fit.note.contains("insufficient points"));
}

#[test]
fn missing_testbeds_is_a_config_error() {
    let err = ExperimentConfig::from_yaml("seed: 3\n").unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    let err = ExperimentConfig::from_yaml("testbeds: [GG1]\nbogus: 1\n").unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn preflight_rerun_is_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let opts = RunOptions::default();
    let pa = run_preflight(&small(a.path(), &[Testbed::GG1, Testbed::GG2]), &opts).unwrap();
    let pb = run_preflight(&small(b.path(), &[Testbed::GG1, Testbed::GG2]), &opts).unwrap();
    assert_eq!(pa.reports.len(), 2);
    assert_eq!(read_all(&pa.artifacts.raw), read_all(&pb.artifacts.raw));
}

#[test]
fn clt_rejects_two_dimensional_testbeds() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_clt(&small(dir.path(), &[Testbed::GG2]), &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn stress_rejects_testbeds_without_a_wide_variant() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_stress(&small(dir.path(), &[Testbed::GG2]), &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn zero_threads_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_rate(&small(dir.path(), &[Testbed::GG1]), &RunOptions { threads: Some(0) }).unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn clt_and_edge_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), &[Testbed::GG1]);
    let opts = RunOptions::default();
    let clt = run_clt(&cfg, &opts).unwrap();
    assert_eq!(clt.rows.len(), 8);
    assert!(clt.rows.iter().all(|r| r.covered == r.z.map(|z| z.abs() <= 1.96)));
    let edge = run_edge(&cfg, &opts).unwrap();
    for p in edge.artifacts.raw.iter().chain(&edge.artifacts.processed) {
        assert!(fs::metadata(p).unwrap().len() > 0, "{}", p.display());
    }
    assert!(dir.path().join("manifest_clt.json").exists());
    assert!(dir.path().join("manifest_edge.json").exists());
}
