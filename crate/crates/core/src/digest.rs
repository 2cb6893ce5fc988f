//! Content digests for emitted artifacts.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

/// SHA-256 over `"blob <len>\0" + bytes`, as lowercase hex, prefixed with
/// `sha256:`. Same construction as a SHA-256 git blob id.
pub fn blob_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    let mut out = String::from("sha256:");
    for b in h.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn file_digest(path: &Path) -> io::Result<String> {
    Ok(blob_digest(&std::fs::read(path)?))
}
