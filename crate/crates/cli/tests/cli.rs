use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_judgerag"))
}

fn raw_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mini/raw")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("--version").output().unwrap()), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&bin().arg("--bogus").output().unwrap()), 2);
    assert_eq!(code(&bin().args(["--mock", "--k", "0", "query", "x"]).output().unwrap()), 2);
    assert_eq!(code(&bin().args(["--mock", "summarize", "x", "--budget", "0"]).output().unwrap()), 2);
}

#[test]
fn live_mode_without_providers_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .arg("summarize")
        .arg(raw_dir())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--mock"));
}

#[test]
fn bad_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "mock = true\nunknown_key = 1\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).args(["query", "x"]).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_index_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--mock", "query", "rent", "--index"])
        .arg(dir.path().join("absent.idx"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
}

#[test]
fn unreachable_provider_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[providers]\n\
         base_endpoint = \"http://127.0.0.1:9/generate\"\n\
         base_model = \"m\"\n\
         finetuned_endpoint = \"http://127.0.0.1:9/generate\"\n\
         finetuned_model = \"m\"\n\
         embedding_endpoint = \"http://127.0.0.1:9/embed\"\n\
         embedding_model = \"e\"\n\
         embedding_dim = 8\n\
         timeout_secs = 1\n",
    )
    .unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["--variant", "abstractive", "summarize"])
        .arg(raw_dir())
        .arg("--out")
        .arg(dir.path().join("s.jsonl"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_ingest_dir_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = bin()
        .args(["--mock", "ingest"])
        .arg(&empty)
        .arg("--out")
        .arg(dir.path().join("c.jsonl"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let all = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    assert!(all.to_lowercase().contains("no "), "{all}");
}
