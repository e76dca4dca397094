//! JSON documents, config hashing and CSV output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use roadnoise_core::PipelineConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex digits kept from the SHA-256 digest.
const HASH_HEX_LEN: usize = 16;

/// Stable hash of any serializable value: SHA-256 of its compact JSON
/// form, truncated to 16 hex digits.
pub fn stable_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("value serializes to JSON");
    let digest = Sha256::digest(&json);
    digest
        .iter()
        .take(HASH_HEX_LEN / 2)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn config_hash(config: &PipelineConfig) -> String {
    stable_hash(config)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes to JSON");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json_string(value).as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a config file, or the defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let config = match path {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

/// Provenance written next to outputs that cannot carry it inline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactMeta {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
}

impl ArtifactMeta {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// `<artifact>.meta.json`
pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_meta(artifact: &Path, meta: &ArtifactMeta) -> Result<()> {
    write_json(&meta_path(artifact), meta)
}

/// Minimal CSV writer for numeric tables with plain-text identifiers.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.row(header)?;
        Ok(w)
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        let line = fields.iter().map(|f| escape(f.as_ref())).collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Shortest decimal that round-trips the value.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
