//! File formats: `.mlg` networks and JSON-lines records.

mod format;
mod records;

use std::path::Path;

pub use format::{parse_mlg, write_mlg, MlgDocument};
pub use records::{load_jsonl, read_jsonl, save_jsonl, write_jsonl, ManifestEntry, Split};

use crate::error::Result;

pub fn load_mlg(path: &Path) -> Result<MlgDocument> {
    parse_mlg(&std::fs::read_to_string(path)?)
}

pub fn save_mlg(doc: &MlgDocument, path: &Path) -> Result<()> {
    std::fs::write(path, write_mlg(doc))?;
    Ok(())
}
