#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn burnscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_burnscan"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn burnscan")
}

pub fn burnscan_ok(args: &[&str]) -> Output {
    let out = burnscan(args);
    assert!(
        out.status.success(),
        "burnscan {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// All regular files under `dir`, sorted, with their bytes.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
