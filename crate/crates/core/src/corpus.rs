//! Locating benchmark files.
//!
//! Files are looked up in the directory named by `MIDICOTH_CORPUS`, falling
//! back to a caller-supplied default. `enwik8_3M` may also be derived from a
//! full `enwik8` by taking its first 3,000,000 bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const ENV_VAR: &str = "MIDICOTH_CORPUS";
pub const ENWIK8_3M: &str = "enwik8_3M";
pub const ENWIK8_3M_LEN: usize = 3_000_000;

/// The eleven files of the Canterbury corpus.
pub const CANTERBURY: [&str; 11] = [
    "alice29.txt",
    "asyoulik.txt",
    "cp.html",
    "fields.c",
    "grammar.lsp",
    "kennedy.xls",
    "lcet10.txt",
    "plrabn12.txt",
    "ptt5",
    "sum",
    "xargs.1",
];

/// `MIDICOTH_CORPUS` if set, else `fallback`.
pub fn dir_or(fallback: impl Into<PathBuf>) -> PathBuf {
    std::env::var_os(ENV_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| fallback.into())
}

/// Reads `name` from `dir`.
pub fn load(dir: &Path, name: &str) -> io::Result<Vec<u8>> {
    match fs::read(dir.join(name)) {
        Err(e) if e.kind() == io::ErrorKind::NotFound && name == ENWIK8_3M => {
            let mut full = fs::read(dir.join("enwik8"))?;
            if full.len() < ENWIK8_3M_LEN {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    "enwik8 is shorter than 3,000,000 bytes",
                ));
            }
            full.truncate(ENWIK8_3M_LEN);
            Ok(full)
        }
        other => other,
    }
}
