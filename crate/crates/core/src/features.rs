//! Fixed-shape log-magnitude spectrogram patches, one per event.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::dsp::FrameAnalyzer;
use crate::error::{invalid, Error, Result};
use crate::extract::EventSegment;

/// Smallest standard deviation a standardizer divides by.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub frames: usize,
    pub bins: usize,
    pub frame_size: usize,
    pub hop: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frames: 32,
            bins: 64,
            frame_size: 256,
            hop: 128,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.bins == 0 || self.frame_size == 0 || self.hop == 0 {
            return Err(invalid("feature dimensions must be positive"));
        }
        if self.bins > self.frame_size / 2 + 1 {
            return Err(invalid(format!(
                "{} bins exceed the {} one-sided bins of a {}-sample frame",
                self.bins,
                self.frame_size / 2 + 1,
                self.frame_size
            )));
        }
        Ok(())
    }

    /// Samples taken from each event: `frames * hop + frame_size`.
    pub fn patch_len(&self) -> usize {
        self.frames * self.hop + self.frame_size
    }

    /// Flattened tensor length `frames * bins`.
    pub fn dim(&self) -> usize {
        self.frames * self.bins
    }
}

/// A `frames x bins` grid stored row-major (one row per frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub values: Vec<f64>,
    pub frames: usize,
    pub bins: usize,
    pub event_ref: usize,
}

impl FeatureTensor {
    pub fn new(values: Vec<f64>, frames: usize, bins: usize, event_ref: usize) -> Result<Self> {
        if values.len() != frames * bins {
            return Err(Error::ShapeMismatch {
                expected: frames * bins,
                actual: values.len(),
            });
        }
        Ok(Self {
            values,
            frames,
            bins,
            event_ref,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.bins..(t + 1) * self.bins]
    }

    fn check_same_shape(&self, other: &FeatureTensor) -> Result<()> {
        if self.frames != other.frames || self.bins != other.bins {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }
}

/// Reusable extractor holding the frame transform.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    analyzer: FrameAnalyzer,
    patch: Vec<f64>,
    mags: Vec<f64>,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            analyzer: FrameAnalyzer::new(config.frame_size)?,
            patch: vec![0.0; config.patch_len()],
            mags: vec![0.0; config.bins],
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Centre-crops (or symmetrically zero-pads) the segment to the patch
    /// length, then stacks `log(1 + |STFT|)` over the lowest `bins` bins.
    pub fn extract(&mut self, buffer: &AudioBuffer, segment: &EventSegment, event_ref: usize) -> Result<FeatureTensor> {
        if segment.start_sample > segment.end_sample || segment.end_sample >= buffer.len() {
            return Err(invalid(format!(
                "segment [{}, {}] outside buffer of {} samples",
                segment.start_sample,
                segment.end_sample,
                buffer.len()
            )));
        }
        let cfg = self.config;
        let patch_len = cfg.patch_len();
        let seg = &buffer.samples()[segment.start_sample..=segment.end_sample];
        self.patch.iter_mut().for_each(|v| *v = 0.0);
        if seg.len() >= patch_len {
            let off = (seg.len() - patch_len) / 2;
            self.patch.copy_from_slice(&seg[off..off + patch_len]);
        } else {
            let pad = (patch_len - seg.len()) / 2;
            self.patch[pad..pad + seg.len()].copy_from_slice(seg);
        }

        let mut values = Vec::with_capacity(cfg.dim());
        for t in 0..cfg.frames {
            let start = t * cfg.hop;
            self.analyzer
                .magnitudes(&self.patch[start..start + cfg.frame_size], &mut self.mags);
            values.extend(self.mags.iter().map(|m| libm::log1p(*m)));
        }
        FeatureTensor::new(values, cfg.frames, cfg.bins, event_ref)
    }
}

/// One-shot form of [`FeatureExtractor::extract`].
pub fn event_features(
    buffer: &AudioBuffer,
    segment: &EventSegment,
    config: &FeatureConfig,
    event_ref: usize,
) -> Result<FeatureTensor> {
    FeatureExtractor::new(*config)?.extract(buffer, segment, event_ref)
}

/// Per-cell z-scoring statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub frames: usize,
    pub bins: usize,
}

/// Fits per-cell mean and population standard deviation, flooring the
/// latter at [`STD_FLOOR`].
pub fn fit_standardizer(tensors: &[FeatureTensor]) -> Result<Standardizer> {
    let first = tensors
        .first()
        .ok_or_else(|| invalid("cannot fit a standardizer on an empty set"))?;
    for t in tensors {
        first.check_same_shape(t)?;
    }
    let n = tensors.len() as f64;
    let dim = first.dim();
    let mut mean = vec![0.0; dim];
    for t in tensors {
        for (m, v) in mean.iter_mut().zip(&t.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for t in tensors {
        for ((s, v), m) in var.iter_mut().zip(&t.values).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let std = var.into_iter().map(|s| libm::sqrt(s / n).max(STD_FLOOR)).collect();
    Ok(Standardizer {
        mean,
        std,
        frames: first.frames,
        bins: first.bins,
    })
}

impl Standardizer {
    pub fn apply(&self, tensor: &FeatureTensor) -> Result<FeatureTensor> {
        if tensor.frames != self.frames || tensor.bins != self.bins {
            return Err(Error::ShapeMismatch {
                expected: self.mean.len(),
                actual: tensor.dim(),
            });
        }
        let values = tensor
            .values
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        FeatureTensor::new(values, self.frames, self.bins, tensor.event_ref)
    }
}

pub fn apply_standardizer(tensor: &FeatureTensor, standardizer: &Standardizer) -> Result<FeatureTensor> {
    standardizer.apply(tensor)
}
