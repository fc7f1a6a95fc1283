use std::path::Path;
use std::process::{Command, Output};

fn flakesim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flakesim"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    flakesim(dir, args).status.code().unwrap()
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["--help"]), 0);
    assert_eq!(code(d, &["--frobnicate", "generate"]), 1);
    assert_eq!(code(d, &["launch"]), 1);
    assert_eq!(code(d, &["--jobs", "0", "generate"]), 1);
    assert_eq!(code(d, &["--seed", "minus-one", "generate"]), 1);

    std::fs::write(d.join("typo.toml"), "schema_version = 1\nseeed = 3\n").unwrap();
    assert_eq!(code(d, &["--config", "typo.toml", "config"]), 1);
    std::fs::write(d.join("bad.toml"), "schema_version = 1\ntau = -1.0\n").unwrap();
    assert_eq!(code(d, &["--config", "bad.toml", "config"]), 1);
    std::fs::write(d.join("future.toml"), "schema_version = 99\n").unwrap();
    assert_eq!(code(d, &["--config", "future.toml", "config"]), 2);
    assert_eq!(code(d, &["--config", "missing.toml", "config"]), 2);

    assert_eq!(code(d, &["--out", "empty", "run"]), 2);
    assert_eq!(code(d, &["--out", "empty", "compare"]), 2);
}

#[test]
fn config_prints_the_effective_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = flakesim(dir.path(), &["--seed", "42", "--out", "elsewhere", "config"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 42"));
    assert!(text.contains("out = \"elsewhere\""));
    assert!(text.contains("schema_version = 1"));
}

#[test]
fn truncated_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tiny.toml"), "schema_version = 1\n[corpus]\nsize = 5\n").unwrap();
    assert_eq!(code(d, &["--config", "tiny.toml", "--out", "o", "generate"]), 0);
    let corpus = d.join("o/corpus.json");
    let text = std::fs::read_to_string(&corpus).unwrap();
    std::fs::write(&corpus, &text[..text.len() / 2]).unwrap();
    let out = flakesim(d, &["--config", "tiny.toml", "--out", "o", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
