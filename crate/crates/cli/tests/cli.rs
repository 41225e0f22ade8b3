use std::path::Path;
use std::process::{Command, Output};

use kinshock_cli::run::sha256_hex;
use proptest::prelude::*;

fn kinshock(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kinshock"));
    cmd.args(args).env_remove("KINSHOCK_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn passing_run_exits_zero_and_lists_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", "[model]\npreset = \"demo-m1\"\n");
    let out = tmp.path().join("nested").join("out");
    let o = kinshock(&["reduce", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "9"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["scenario"], "reduce");
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["pass"], true);
    let files = m["files"].as_array().unwrap();
    assert!(files.len() >= 4);
    for f in files {
        let bytes = std::fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
}

#[test]
fn failed_verdict_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", "[model]\npreset = \"demo-m0\"\n[tolerances]\nhypothesis = 1e-300\n");
    let out = tmp.path().join("out");
    let o = kinshock(&["check-hypotheses", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert_eq!(manifest(&out)["pass"], false);
}

#[test]
fn precondition_mismatch_is_a_skip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", "[model]\npreset = \"demo-m0\"\n");
    let out = tmp.path().join("out");
    let o = kinshock(&["profile", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&out)["verdicts"][0]["status"], "skip");
}

#[test]
fn usage_and_config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "good.toml", "[model]\npreset = \"demo-m1\"\n");
    assert_eq!(kinshock(&["reduce"], &[]).status.code(), Some(2));
    assert_eq!(kinshock(&["bogus", "--config", &good], &[]).status.code(), Some(2));
    assert_eq!(kinshock(&["reduce", "--config", "/nonexistent/run.toml"], &[]).status.code(), Some(2));
    let bad = write_config(tmp.path(), "bad.toml", "[model]\npreset = \"demo-m1\"\n[stable]\ntol = -1.0\n");
    let o = kinshock(&["reduce", "--config", &bad], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stable.tol"));
    let o = kinshock(&["reduce", "--config", &good, "--out", tmp.path().to_str().unwrap()], &[("KINSHOCK_WORKERS", "many")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("KINSHOCK_WORKERS"));
    let pinned = write_config(tmp.path(), "pinned.toml", "scenario = \"sweep\"\n[model]\npreset = \"demo-m1\"\n");
    let o = kinshock(&["reduce", "--config", &pinned], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'sweep'"));
    let huge = (i64::MAX as u64 + 1).to_string();
    assert_eq!(kinshock(&["reduce", "--config", &good, "--seed", &huge], &[]).status.code(), Some(2));
    assert_eq!(kinshock(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn worker_override_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", "workers = 3\n[model]\npreset = \"demo-m1\"\n");
    let out = tmp.path().join("out");
    let o = kinshock(&["check-hypotheses", "--config", &cfg, "--out", out.to_str().unwrap()], &[("KINSHOCK_WORKERS", "2")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&out)["workers"], 2);
}

#[test]
fn model_file_is_resolved_next_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let cfg = write_config(tmp.path(), "run.toml", "[model]\npreset = \"demo-m1\"\n");
    let o = kinshock(&["check-hypotheses", "--config", &cfg, "--out", first.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    // Reload the emitted model through a file source: identical model text.
    let cfg2 = write_config(&first, "run.toml", "[model]\nfile = \"model.toml\"\n");
    let second = tmp.path().join("second");
    let o = kinshock(&["check-hypotheses", "--config", &cfg2, "--out", second.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read_to_string(first.join("model.toml")).unwrap();
    let b = std::fs::read_to_string(second.join("model.toml")).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trip_idempotent(
        seed in 0..=i64::MAX as u64,
        workers in 0usize..64,
        eps in 1e-4f64..0.5,
        sweep in prop::collection::vec(1e-4f64..0.5, 2..6),
        order in 3usize..6,
        band in 0.01f64..1.0,
    ) {
        let mut cfg = kinshock_cli::RunConfig::for_preset("demo-m1");
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.profile.eps = eps;
        cfg.profile.sweep = sweep;
        cfg.profile.taylor_order = order;
        cfg.tolerances.order_band = band;
        let text = cfg.to_toml();
        let back = kinshock_cli::parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = kinshock_cli::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.build_model().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
