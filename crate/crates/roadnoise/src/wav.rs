//! WAV reading and writing on top of `hound`.
//!
//! Input may be 16-bit integer PCM or 32-bit float, mono or stereo. Stereo
//! is folded to mono by the per-sample mean and integers are scaled by
//! 1/32768. Output is always 32-bit float mono, so a buffer whose samples
//! are `f32` values survives a write/read round trip bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use roadnoise_core::AudioBuffer;

use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

fn decode_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            msg: "encoding is not PCM16 or float32".into(),
        },
        other => Error::WavFormat {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    }
}

pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = WavReader::new(BufReader::new(file)).map_err(|e| decode_error(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedCodec {
            path: path.to_path_buf(),
            msg: format!("{channels} channels; only mono and stereo are read"),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (format, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_path_buf(),
                msg: format!("{bits}-bit {format:?} samples"),
            })
        }
    }
    .map_err(|e| decode_error(path, e))?;
    if interleaved.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    if interleaved.len() % channels != 0 {
        return Err(Error::WavFormat {
            path: path.to_path_buf(),
            msg: "sample count is not a multiple of the channel count".into(),
        });
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved.chunks_exact(2).map(|p| (p[0] + p[1]) / 2.0).collect()
    };
    Ok(AudioBuffer::new(samples, spec.sample_rate)?)
}

/// Writes 32-bit float mono. Samples are narrowed to `f32`.
pub fn write_wav(buffer: &AudioBuffer, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let spec = WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate_hz(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::WavFormat {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    };
    let mut writer = WavWriter::new(BufWriter::new(file), spec).map_err(to_err)?;
    for &s in buffer.samples() {
        writer.write_sample(s as f32).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}
