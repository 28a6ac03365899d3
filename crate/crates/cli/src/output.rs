use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Version of every JSON document the CLI writes.
pub const SCHEMA: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes `body` as pretty JSON with a leading `"schema"` field.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, body: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(&Versioned { schema: SCHEMA, body })?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Writes serializable rows as an LF-terminated CSV with a header.
pub fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}

/// Finite values as-is, everything else as JSON `null`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
