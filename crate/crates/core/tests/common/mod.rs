#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;

use mmapq::model::{validate_model, ModelConfig, ValidatedModel};
use mmapq::model_file::load_model_file;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_config(name: &str) -> ModelConfig {
    load_model_file(&fixture_path(name)).unwrap()
}

pub fn fixture(name: &str) -> ValidatedModel {
    validate_model(&fixture_config(name)).unwrap()
}

/// Writes past the test harness capture so the verdict shows in every run.
pub fn verdict(criterion: u32, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "acceptance criterion {criterion:>2} {word}: {detail}").unwrap();
    out.flush().unwrap();
}
