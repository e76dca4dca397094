//! Versioned binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "RNAE"            magic
//! u32               format version (1)
//! u32               header length in bytes
//! header            UTF-8 JSON, see ModelHeader
//! f64 * n           per layer: weights (row-major outputs x inputs), bias;
//!                   then standardizer mean, then standardizer std
//! ```

use std::fs;
use std::path::Path;

use roadnoise_core::autoencoder::{Activation, AutoencoderModel, Dense};
use roadnoise_core::features::Standardizer;
use roadnoise_core::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"RNAE";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub seed: u64,
    pub config_hash: String,
    /// Cells of the standardizer: frames x bins.
    pub frames: usize,
    pub bins: usize,
    pub parameter_count: usize,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub header: ModelHeader,
    pub model: AutoencoderModel,
    pub standardizer: Standardizer,
}

pub fn encode_model(
    model: &AutoencoderModel,
    standardizer: &Standardizer,
    config: &PipelineConfig,
    config_hash: &str,
) -> Vec<u8> {
    let header = ModelHeader {
        dims: model.dims(),
        activations: model.layers().iter().map(|l| l.activation).collect(),
        seed: model.seed(),
        config_hash: config_hash.into(),
        frames: standardizer.frames,
        bins: standardizer.bins,
        parameter_count: model.parameter_count(),
        config: config.clone(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let floats = model.parameter_count() + 2 * standardizer.mean.len();
    let mut out = Vec::with_capacity(12 + header_json.len() + 8 * floats);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    let params = model.layers().iter().flat_map(|l| l.weights.iter().chain(&l.bias));
    for v in params.chain(&standardizer.mean).chain(&standardizer.std) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn save_model(
    path: &Path,
    model: &AutoencoderModel,
    standardizer: &Standardizer,
    config: &PipelineConfig,
    config_hash: &str,
) -> Result<()> {
    let bytes = encode_model(model, standardizer, config, config_hash);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        let raw = self.take(n.checked_mul(8)?)?;
        Some(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }
}

pub fn decode_model(path: &Path, bytes: &[u8]) -> Result<SavedModel> {
    let bad = |msg: &str| Error::format(path, format!("not a model file: {msg}"));
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4) != Some(MODEL_MAGIC.as_slice()) {
        return Err(bad("magic mismatch"));
    }
    let version = cur.u32().ok_or_else(|| bad("truncated"))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("model format version {version} is not supported (expected {MODEL_FORMAT_VERSION})"),
        ));
    }
    let header_len = cur.u32().ok_or_else(|| bad("truncated"))? as usize;
    let header_bytes = cur.take(header_len).ok_or_else(|| bad("truncated header"))?;
    let header: ModelHeader = serde_json::from_slice(header_bytes).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        msg: format!("model header: {e}"),
    })?;
    if header.dims.len() < 2 || header.activations.len() != header.dims.len() - 1 {
        return Err(bad("header dims and activations disagree"));
    }
    let mut layers = Vec::with_capacity(header.activations.len());
    for (w, &activation) in header.dims.windows(2).zip(&header.activations) {
        let (inputs, outputs) = (w[0], w[1]);
        let count = inputs.checked_mul(outputs).ok_or_else(|| bad("layer too large"))?;
        let weights = cur.f64s(count).ok_or_else(|| bad("truncated parameters"))?;
        let bias = cur.f64s(outputs).ok_or_else(|| bad("truncated parameters"))?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        });
    }
    let model = AutoencoderModel::from_layers(layers, header.seed)?;
    if model.parameter_count() != header.parameter_count {
        return Err(bad("parameter count disagrees with the header"));
    }
    let cells = header.frames * header.bins;
    if cells != model.input_dim() {
        return Err(bad("standardizer shape disagrees with the model input"));
    }
    let mean = cur.f64s(cells).ok_or_else(|| bad("truncated standardizer"))?;
    let std = cur.f64s(cells).ok_or_else(|| bad("truncated standardizer"))?;
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    let standardizer = Standardizer {
        mean,
        std,
        frames: header.frames,
        bins: header.bins,
    };
    Ok(SavedModel {
        header,
        model,
        standardizer,
    })
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use roadnoise_core::autoencoder::init_model;

    fn sample() -> (AutoencoderModel, Standardizer, PipelineConfig) {
        let model = init_model(&[4, 8, 4], 9).unwrap();
        let standardizer = Standardizer {
            mean: vec![0.5, -1.0, 2.0, 0.0],
            std: vec![1.0, 2.0, 1e-8, 3.5],
            frames: 2,
            bins: 2,
        };
        (model, standardizer, PipelineConfig::default())
    }

    #[test]
    fn round_trip() {
        let (m, s, c) = sample();
        let bytes = encode_model(&m, &s, &c, "abc");
        let back = decode_model(Path::new("m"), &bytes).unwrap();
        assert_eq!(back.model, m);
        assert_eq!(back.standardizer, s);
        assert_eq!(back.header.config_hash, "abc");
        assert_eq!(back.header.config, c);
        assert_eq!(back.header.dims, vec![4, 8, 4]);
    }

    #[test]
    fn corrupt_files_rejected() {
        let (m, s, c) = sample();
        let bytes = encode_model(&m, &s, &c, "abc");
        let p = Path::new("m");
        assert!(decode_model(p, &bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_model(p, &extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert_eq!(decode_model(p, &magic).unwrap_err().kind(), "file-format");
        let mut version = bytes;
        version[4] = 9;
        assert!(decode_model(p, &version).is_err());
    }
}
