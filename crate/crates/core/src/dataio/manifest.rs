//! JSON Lines dataset manifest: one entry per line, order-stable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryRole {
    RawStack,
    Patch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub role: EntryRole,
    pub embryo_id: u32,
    pub time_min: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slice_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bbox: Option<BoundingBox>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<u32>,
    pub seed_used: u64,
}

fn check_unique(entries: &[ManifestEntry]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for e in entries {
        if !seen.insert(e.path.as_str()) {
            return Err(Error::Config(format!(
                "duplicate manifest path `{}`",
                e.path
            )));
        }
    }
    Ok(())
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    check_unique(entries)?;
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut f, e)?;
        writeln!(f)?;
    }
    Ok(())
}

/// Read a manifest; entry order follows the file. If `verify_base` is set,
/// every referenced file must exist under it.
pub fn read_manifest(path: &Path, verify_base: Option<&Path>) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str::<ManifestEntry>(line)?);
    }
    check_unique(&entries)?;
    if let Some(base) = verify_base {
        for e in &entries {
            let p = base.join(&e.path);
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "manifest references missing file `{}`",
                    p.display()
                )));
            }
        }
    }
    Ok(entries)
}
