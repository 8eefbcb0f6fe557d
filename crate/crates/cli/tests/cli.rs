use etuq::fit::desk::default_desk_def;
use etuq::uq::Method;
use etuq_cli::{read_manifest, ManifestRow};
use std::path::Path;
use std::process::{Command, Output};

fn etuq(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_etuq"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_with(dir: &Path, json: &str, out: &str) -> Output {
    let cfg = write_config(dir, json);
    let out = dir.join(out);
    etuq(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[])
}

#[test]
fn sparse_grid_level_one_uses_25_solves() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), r#"{"method": "sg", "sg": {"levels": [1]}}"#, "out");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_manifest(&dir.path().join("out/manifest.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].method, rows[0].level, rows[0].solver_calls), (Method::Sg, Some(1), 25));
    assert_eq!(rows[0].rel_err_mean_pct, None);
    assert!(dir.path().join("out/runs/sg_l1.json").is_file());
}

#[test]
fn zero_samples_is_a_config_error_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), r#"{"method": "mc", "mc": {"samples": 0}}"#, "out");
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
    let o = run_with(dir.path(), r#"{"method": "mc", "threads": 0}"#, "out");
    assert_eq!(o.status.code(), Some(2));
    let o = etuq(&["run", "--config", "/nonexistent.json"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = etuq(&["run", "--method", "qmc"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

const SMALL_COMPARE: &str = r#"{
    "method": "compare",
    "mc": {"samples": 16, "seed": 3},
    "sg": {"levels": [1]},
    "tt": {"levels": [1], "sweeps": [1, 2]}
}"#;

#[test]
fn compare_enumerates_every_estimate_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), SMALL_COMPARE, "a");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = dir.path().join("a/manifest.csv");
    let rows = read_manifest(&manifest).unwrap();
    let keys: Vec<_> = rows.iter().map(|r| (r.method, r.level, r.sweeps)).collect();
    assert_eq!(
        keys,
        [(Method::Mc, None, None), (Method::Sg, Some(1), None), (Method::Tt, Some(1), Some(1)), (Method::Tt, Some(1), Some(2))]
    );
    assert!(rows[1..].iter().all(|r| r.rel_err_mean_pct.is_some() && r.rel_err_std_pct.is_some()));
    for name in ["mc", "sg_l1", "tt_l1_s1", "tt_l1_s2"] {
        let text = std::fs::read_to_string(dir.path().join(format!("a/runs/{name}.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["started_unix_s"].as_f64().unwrap() > 0.0);
    }

    // the report shows every row and the manifest re-reads unchanged
    let o = etuq(&["report", manifest.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 2 + rows.len());
    etuq_cli::write_manifest(&dir.path().join("copy.csv"), &rows).unwrap();
    assert_eq!(std::fs::read(&manifest).unwrap(), std::fs::read(dir.path().join("copy.csv")).unwrap());

    // same config and seed: byte-identical manifest, also with more threads
    let cfg = write_config(dir.path(), SMALL_COMPARE);
    let b = dir.path().join("b");
    let o = etuq(&["run", "--config", &cfg, "--out", b.to_str().unwrap()], &[("ETUQ_THREADS", "3")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&manifest).unwrap(), std::fs::read(b.join("manifest.csv")).unwrap());
}

#[test]
fn environment_and_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"method": "sg", "mc": {"samples": 4}, "sg": {"levels": [1]}}"#);
    let out = dir.path().join("o");
    let o = etuq(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[("ETUQ_METHOD", "mc"), ("ETUQ_SEED", "11")]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<ManifestRow> = read_manifest(&out.join("manifest.csv")).unwrap();
    assert_eq!((rows[0].method, rows[0].solver_calls), (Method::Mc, 4));
    let text = std::fs::read_to_string(out.join("runs/mc.json")).unwrap();
    assert!(text.contains("\"seed\": 11"));
}

#[test]
fn solver_failure_exits_with_three_and_keeps_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut def = default_desk_def();
    def.config.newton_max_iter = 1;
    def.config.newton_tol = 1e-15;
    let model = dir.path().join("model.json");
    std::fs::write(&model, def.to_json().unwrap()).unwrap();
    let out = dir.path().join("o");
    let o = etuq(
        &["run", "--method", "sg", "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read_manifest(&out.join("manifest.csv")).unwrap().is_empty());
}

#[test]
fn report_handles_empty_and_malformed_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    etuq_cli::write_manifest(&empty, &[]).unwrap();
    let o = etuq(&["report", empty.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "method,level\nmc,abc\n").unwrap();
    assert_eq!(etuq(&["report", bad.to_str().unwrap()], &[]).status.code(), Some(2));
    assert_eq!(etuq(&["report", "/nonexistent.csv"], &[]).status.code(), Some(2));
}

#[test]
fn trace_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = etuq(&["trace", "--delta", "0.17", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 52 * 12);
    let o = etuq(&["trace", "--delta", "0.1,0.2", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
}
