//! Line-delimited JSON records: dataset manifests, histories, metrics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One line of a superdiffusion dataset manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: bool,
    pub margin: f64,
    pub split: Split,
    pub seed: u64,
    pub p1: f64,
    pub p2: f64,
    /// Selected by class balancing; test entries are always kept.
    pub kept: bool,
}

pub fn write_jsonl<T: Serialize, W: Write>(records: &[T], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    write_jsonl(records, BufWriter::new(File::create(path)?))
}

/// Reads one record per non-blank line; errors carry the line number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: k + 1, reason: e.to_string() })?);
    }
    Ok(out)
}

pub fn load_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?))
}
