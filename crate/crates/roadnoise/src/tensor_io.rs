//! Feature tensors as a flat little-endian `f64` file plus a JSON sidecar
//! (`<file>.json`) carrying the shape, the config hash and one entry per
//! tensor row.

use std::fs;
use std::path::{Path, PathBuf};

use roadnoise_core::eval::SurfaceLabel;
use roadnoise_core::features::FeatureTensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files::{read_json, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub recording_id: String,
    pub label: SurfaceLabel,
    pub event_index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSidecar {
    pub frames: usize,
    pub bins: usize,
    pub count: usize,
    pub config_hash: String,
    pub condition: String,
    pub entries: Vec<TensorEntry>,
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut name = data.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_tensors(path: &Path, tensors: &[FeatureTensor], sidecar: &TensorSidecar) -> Result<()> {
    if tensors.len() != sidecar.count || sidecar.entries.len() != sidecar.count {
        return Err(Error::format(path, "tensor count disagrees with the sidecar"));
    }
    let dim = sidecar.frames * sidecar.bins;
    let mut bytes = Vec::with_capacity(8 * dim * tensors.len());
    for t in tensors {
        if t.frames != sidecar.frames || t.bins != sidecar.bins {
            return Err(Error::format(path, "tensor shape disagrees with the sidecar"));
        }
        for v in &t.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), sidecar)
}

/// Reads tensors; `event_ref` of each is its row index.
pub fn read_tensors(path: &Path) -> Result<(Vec<FeatureTensor>, TensorSidecar)> {
    let sidecar: TensorSidecar = read_json(&sidecar_path(path))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let dim = sidecar.frames * sidecar.bins;
    if sidecar.entries.len() != sidecar.count || bytes.len() != 8 * dim * sidecar.count {
        return Err(Error::format(path, "file size disagrees with the sidecar shape"));
    }
    let tensors = if dim == 0 {
        Vec::new()
    } else {
        bytes
            .chunks_exact(8 * dim)
            .enumerate()
            .map(|(i, row)| {
                let values = row
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                FeatureTensor::new(values, sidecar.frames, sidecar.bins, i)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    Ok((tensors, sidecar))
}
