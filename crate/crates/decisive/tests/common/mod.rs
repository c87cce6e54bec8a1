//! Shared helpers for the integration suites.

use std::path::PathBuf;

use decisive::shs::{parse_model, HybridSystem};

pub fn load(name: &str) -> HybridSystem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path:?}: {e}"));
    parse_model(&text).unwrap_or_else(|e| panic!("parse {name}: {e}"))
}
