//! Data sources, JSON-lines records, CSV reports and checksummed checkpoints.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};

/// Prefix for data files compiled into the binary.
pub const BUNDLED_PREFIX: &str = "bundled:";

/// Files shipped in `data/`, embedded so the binary runs without them.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "groups_illustrative.csv",
        include_str!("../data/groups_illustrative.csv"),
    ),
    (
        "groups_extended.csv",
        include_str!("../data/groups_extended.csv"),
    ),
    ("kinetics.csv", include_str!("../data/kinetics.csv")),
    ("density.csv", include_str!("../data/density.csv")),
    ("conductivity.csv", include_str!("../data/conductivity.csv")),
    (
        "heat_capacity.csv",
        include_str!("../data/heat_capacity.csv"),
    ),
    ("experimental.csv", include_str!("../data/experimental.csv")),
];

/// Text of a data source: `bundled:<name>` or a filesystem path.
pub fn read_source(source: &str) -> Result<String> {
    if let Some(name) = source.strip_prefix(BUNDLED_PREFIX) {
        return BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| (*text).to_string())
            .ok_or_else(|| PipelineError::Config(format!("no bundled file named {name:?}")));
    }
    fs::read_to_string(source).map_err(|e| PipelineError::io(source, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir.display().to_string(), e))?;
        }
    }
    fs::write(path, text).map_err(|e| PipelineError::io(path.display().to_string(), e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path.display().to_string(), e))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(
            &serde_json::to_string(it).map_err(|e| PipelineError::Numerical(e.to_string()))?,
        );
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_text(path, &to_jsonl(items)?)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let label = path.display().to_string();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| PipelineError::schema(&label, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| PipelineError::Numerical(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| PipelineError::Numerical(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_text(path, &to_csv(rows)?)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let label = path.display().to_string();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(|e| PipelineError::schema(&label, e.to_string())))
        .collect()
}

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Self-describing model file. `sha256` covers the compact JSON of `payload`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub schema_version: u32,
    pub kind: String,
    pub sha256: String,
    pub payload: T,
}

pub fn save_checkpoint<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<()> {
    let compact =
        serde_json::to_vec(payload).map_err(|e| PipelineError::Numerical(e.to_string()))?;
    let ck = Checkpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        kind: kind.to_string(),
        sha256: sha256_hex(&compact),
        payload,
    };
    let text = serde_json::to_string(&ck).map_err(|e| PipelineError::Numerical(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn load_checkpoint<T: DeserializeOwned + Serialize>(path: &Path, kind: &str) -> Result<T> {
    let label = path.display().to_string();
    let ck: Checkpoint<T> = serde_json::from_str(&read_text(path)?)
        .map_err(|e| PipelineError::schema(&label, e.to_string()))?;
    if ck.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(PipelineError::schema(
            &label,
            format!("unsupported schema version {}", ck.schema_version),
        ));
    }
    if ck.kind != kind {
        return Err(PipelineError::schema(
            &label,
            format!("expected a {kind} checkpoint, found {}", ck.kind),
        ));
    }
    let compact =
        serde_json::to_vec(&ck.payload).map_err(|e| PipelineError::Numerical(e.to_string()))?;
    if sha256_hex(&compact) != ck.sha256 {
        return Err(PipelineError::schema(&label, "checksum mismatch"));
    }
    Ok(ck.payload)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| PipelineError::Numerical(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| PipelineError::schema(path.display().to_string(), e.to_string()))
}
