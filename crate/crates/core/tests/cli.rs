use std::path::Path;
use std::process::{Command, Output};

use mixview::experiment::{sha256_hex, Manifest, COMPARE_FILES, MANIFEST_FILE};

fn mixview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixview"))
        .args(args)
        .env_remove("MIXVIEW_SEED")
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn compare_is_byte_reproducible_and_manifest_is_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = mixview(&["compare", "--preset", "tiny", "--seed", "7", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let m = manifest(&a);
    let mut listed: Vec<&str> = m.files.iter().map(|f| f.file.as_str()).collect();
    listed.sort();
    let mut documented = COMPARE_FILES.to_vec();
    documented.sort();
    assert_eq!(listed, documented);
    let mut on_disk: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    let mut expected: Vec<String> = COMPARE_FILES.iter().map(|s| s.to_string()).collect();
    expected.push(MANIFEST_FILE.into());
    expected.sort();
    assert_eq!(on_disk, expected);
    for entry in &m.files {
        let bytes = std::fs::read(a.join(&entry.file)).unwrap();
        assert_eq!(entry.sha256, sha256_hex(&bytes));
        assert_eq!(entry.bytes, bytes.len());
        assert_eq!(bytes, std::fs::read(b.join(&entry.file)).unwrap(), "{}", entry.file);
    }
    assert_eq!(m.seed, 7);
    assert_eq!(
        std::fs::read(a.join(MANIFEST_FILE)).unwrap(),
        std::fs::read(b.join(MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn zero_rate_compare_gives_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# frozen weights\ntrain.eta = 0\ntrain.iters = 3\n").unwrap();
    let out = mixview(&[
        "compare",
        "--preset",
        "tiny",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let read = |f: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o").join(f)).unwrap()).unwrap()
    };
    let (erm, mm) = (read("report_erm.json"), read("report_midpoint_mixup.json"));
    assert_eq!(erm["features"], mm["features"]);
    for key in ["lambda", "c", "bsize", "delta", "max_offdiag", "train_acc"] {
        assert_eq!(erm["final_record"][key], mm["final_record"][key], "{key}");
    }
}

#[test]
fn train_then_diagnose_reads_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("train");
    let out = mixview(&["train", "--preset", "tiny", "--objective", "erm", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["summary"]["objective"], "erm");
    let csv = std::fs::read_to_string(dir.join("trajectory_erm.csv")).unwrap();
    assert!(csv.starts_with("t,loss,train_acc,lambda_0_1,"));
    let weights = dir.join("weights.json");
    let diag = tmp.path().join("diag");
    let out = mixview(&[
        "diagnose",
        "--preset",
        "tiny",
        "--weights",
        weights.to_str().unwrap(),
        "--out",
        diag.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(diag.join("diagnose.json").exists());
    assert_eq!(manifest(&diag).command, "diagnose");
}

#[test]
fn gen_data_respects_seed_env_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &Path, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixview"));
        cmd.args(["gen-data", "--preset", "tiny", "--out", dir.to_str().unwrap()]);
        cmd.env_remove("MIXVIEW_SEED");
        if let Some(s) = env {
            cmd.env("MIXVIEW_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(dir.join("dataset.json")).unwrap()
    };
    let from_env = run(&tmp.path().join("e"), Some("11"), None);
    let from_flag = run(&tmp.path().join("f"), None, Some("11"));
    let other = run(&tmp.path().join("g"), None, Some("12"));
    assert_eq!(from_env, from_flag);
    assert_ne!(from_env, other);
    assert_eq!(manifest(&tmp.path().join("e")).seed, 11);
}

#[test]
fn gradcheck_on_tiny_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mixview(&["gradcheck", "--preset", "tiny", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    let err = stdout_json(&out)["summary"]["max_rel_error"].as_f64().unwrap();
    assert!(err <= 1e-5);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = mixview(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn config_errors_are_machine_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "data.k = 10\ndata.d = 4\n").unwrap();
    let out = mixview(&["gen-data", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["violations"].to_string().contains("2k"), "{err}");

    std::fs::write(&cfg, "data.k = 3\nnot a line\n").unwrap();
    let out = mixview(&["gen-data", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["line"], 2);
}
