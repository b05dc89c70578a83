#![allow(dead_code)]

pub mod corpus;
pub mod fixture;
pub mod oracle;
pub mod prompts;
pub mod stub;

use std::path::PathBuf;

/// ML-100K directory (u.data + u.item). `SEQBENCH_ML100K` overrides the
/// default `<workspace>/data/ml-100k`, which `scripts/fetch_ml100k.py` fills.
pub fn ml100k_dir() -> PathBuf {
    match std::env::var_os("SEQBENCH_ML100K") {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k"),
    }
}

pub fn require_ml100k() -> PathBuf {
    let dir = ml100k_dir();
    assert!(
        dir.join("u.data").is_file() && dir.join("u.item").is_file(),
        "ML-100K not found at {}; run `python3 scripts/fetch_ml100k.py` or set SEQBENCH_ML100K",
        dir.display()
    );
    dir
}
