//! Line-delimited JSON datasets: one candidate list per line.
//!
//! ```json
//! {"group_id":"p1","query":"...","dim":4,"items":[{"id":"r1","text":"...","embedding":[...],"point_score":7.5,"label":8.0}]}
//! ```
//!
//! `query` and `text` are optional. Unknown fields are ignored with a warning.
//! Floats are written in shortest round-trip form, so a save/load cycle
//! reproduces every value exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use resrank_core::CandidateList;
use serde_json::Value;

use crate::{Error, Result};

const LIST_FIELDS: &[&str] = &["group_id", "query", "dim", "items"];
const ITEM_FIELDS: &[&str] = &["id", "text", "embedding", "point_score", "label"];

fn warn_unknown(value: &Value, path: &Path, line: usize) {
    let Some(obj) = value.as_object() else { return };
    for key in obj.keys().filter(|k| !LIST_FIELDS.contains(&k.as_str())) {
        log::warn!("{}:{line}: ignoring unknown field {key:?}", path.display());
    }
    let Some(items) = obj.get("items").and_then(Value::as_array) else { return };
    for (i, item) in items.iter().enumerate() {
        if let Some(o) = item.as_object() {
            for key in o.keys().filter(|k| !ITEM_FIELDS.contains(&k.as_str())) {
                log::warn!("{}:{line}: item {i}: ignoring unknown field {key:?}", path.display());
            }
        }
    }
}

/// Parses and validates every non-blank line. Errors carry the 1-based line.
pub fn read_dataset<R: BufRead>(reader: R, path: &Path) -> Result<Vec<CandidateList>> {
    let mut lists = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let value: Value = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        warn_unknown(&value, path, line_no);
        let list: CandidateList = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
        list.validate().map_err(|source| Error::Validation {
            path: path.to_path_buf(),
            line: line_no,
            source,
        })?;
        lists.push(list);
    }
    Ok(lists)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<CandidateList>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_dataset(BufReader::new(file), path)
}

pub fn write_dataset<W: Write>(mut writer: W, lists: &[CandidateList]) -> std::io::Result<()> {
    for list in lists {
        serde_json::to_writer(&mut writer, list)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_dataset(path: impl AsRef<Path>, lists: &[CandidateList]) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    write_dataset(BufWriter::new(file), lists).map_err(io)
}
