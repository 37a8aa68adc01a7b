#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

pub fn sample_props(name: &str, composition: Value) -> Value {
    json!({
        "name": name,
        "location": "shelf 3",
        "dimensions_mm": [10.0, 10.0, 5.0],
        "composition": composition,
    })
}

pub fn step_props(index: i64, protocol: &str, abrasive: &str, seconds: f64) -> Value {
    json!({
        "sequence_index": index,
        "protocol_name": protocol,
        "abrasive": abrasive,
        "lubricant": "water",
        "duration": seconds,
    })
}

pub fn entry_props(title: &str) -> Value {
    json!({ "title": title })
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the built `rdm` binary against a repository under `dir`.
pub fn rdm(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_rdm"))
        .current_dir(dir)
        .env_remove("RDM_TOKEN")
        .env("RDM_JOURNAL", dir.join("rdm.journal"))
        .env("RDM_BLOBROOT", dir.join("blobs"))
        .args(args)
        .output()
        .expect("rdm binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Like [`rdm`] but requires success and returns trimmed stdout.
pub fn rdm_ok(dir: &Path, args: &[&str]) -> String {
    let o = rdm(dir, args);
    assert_eq!(o.code, 0, "rdm {args:?} failed: {}", o.stderr);
    o.stdout.trim().to_string()
}

pub fn fixtures(dir: &Path) -> PathBuf {
    let fx = dir.join("fx");
    rdm_ok(dir, &["fixtures", "--out", fx.to_str().unwrap()]);
    fx
}

/// A multipart/form-data body with text fields and one file.
pub fn multipart(boundary: &str, fields: &[(&str, &str)], file: (&str, &[u8])) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, value) in fields {
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes(),
        );
    }
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{}\"\r\n\
             Content-Type: application/octet-stream\r\n\r\n",
            file.0
        )
        .as_bytes(),
    );
    body.extend_from_slice(file.1);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    body
}
