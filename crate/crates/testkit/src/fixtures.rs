//! Paths and loaders for the bundled fixture corpus.
//!
//! ```text
//! fixtures/
//!   specs/        frozen spec snapshots (petstore3, catfact, items)
//!   completions/  canned model output, including malformed variants
//!   tables/       routing tables for the scripted provider
//!   goldens/      rendered prompts, their bindings and generate.py
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use restbench_core::spec_model::{parse_spec, ApiSpecification};
use sha2::{Digest, Sha256};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn spec_path(name: &str) -> PathBuf {
    fixture_dir().join("specs").join(name)
}

pub fn spec_text(name: &str) -> std::io::Result<String> {
    std::fs::read_to_string(spec_path(name))
}

/// Parses a bundled spec; panics on a broken fixture.
pub fn spec(name: &str) -> ApiSpecification {
    let text = spec_text(name).unwrap_or_else(|e| panic!("fixture {name}: {e}"));
    parse_spec(&text, name).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn completion(name: &str) -> String {
    let path = fixture_dir().join("completions").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn table_path(name: &str) -> PathBuf {
    fixture_dir().join("tables").join(name)
}

pub fn goldens_dir() -> PathBuf {
    fixture_dir().join("goldens")
}

/// Bindings used to render each golden prompt, keyed by template store key.
pub fn golden_bindings() -> BTreeMap<String, BTreeMap<String, String>> {
    let text = std::fs::read_to_string(goldens_dir().join("bindings.json")).expect("golden bindings");
    serde_json::from_str(&text).expect("golden bindings are JSON")
}

/// SHA-256 of the frozen spec snapshots, relative to `fixtures/`.
pub const PINNED: [(&str, &str); 3] = [
    ("specs/catfact.json", "36ec9759a8554fd80a7f743174e2df9c95f5cde6b639b9cc452cffb9abfbffad"),
    ("specs/items.json", "8a9ca20c4e4e64e75ca9c1c5ec2860537247c44c9c1b88ee2637d34ac8fdce8e"),
    ("specs/petstore3.json", "34e3a47c59f9cc770c194fe5a549cdf90cd4bb72ece541092155f3c73ecc9b2b"),
];

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Pinned fixtures whose content changed, with the hash found.
pub fn pinned_mismatches() -> Vec<(String, String)> {
    PINNED
        .iter()
        .filter_map(|(rel, expected)| {
            let found = sha256_file(&fixture_dir().join(rel)).unwrap_or_else(|e| e.to_string());
            (found != *expected).then(|| (rel.to_string(), found))
        })
        .collect()
}
