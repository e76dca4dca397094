//! The single configuration document shared by every pipeline stage.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autoencoder::TrainConfig;
use crate::dsp::BandSpec;
use crate::error::{invalid, Result};
use crate::eval::Scenario;
use crate::extract::ExtractionConfig;
use crate::features::FeatureConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Autoencoder layout. Hidden widths are integer multiples of the input
/// width, which keeps the network non-compressive by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_width_factors: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_width_factors: vec![1, 1],
        }
    }
}

impl ModelConfig {
    /// Widths from input to output for an input of `dim` cells.
    pub fn dims(&self, dim: usize) -> Vec<usize> {
        let mut d = vec![dim];
        d.extend(self.hidden_width_factors.iter().map(|f| f * dim));
        d.push(dim);
        d
    }
}

/// How normal (dry) events are divided between training, validation and
/// held-out scoring. Events are taken in corpus order; every
/// `test_every`-th one is held out, and every `val_every`-th of the rest is
/// used for validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_every: usize,
    pub val_every: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_every: 2,
            val_every: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub band: BandSpec,
    pub extraction: ExtractionConfig,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub scenarios: Vec<Scenario>,
    pub iou_min: f64,
    /// Whether single-condition commands (train, score) band-pass first.
    pub noise_reduction: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            band: BandSpec::default(),
            extraction: ExtractionConfig::default(),
            features: FeatureConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitConfig::default(),
            scenarios: vec![Scenario::summer(), Scenario::winter()],
            iou_min: 0.3,
            noise_reduction: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(invalid(alloc::format!(
                "config schema version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.band.validate()?;
        self.extraction.validate()?;
        self.features.validate()?;
        self.train.validate()?;
        if self.model.hidden_width_factors.contains(&0) {
            return Err(invalid("hidden width factors must be positive"));
        }
        if self.split.test_every < 2 || self.split.val_every < 2 {
            return Err(invalid("split strides must be at least 2"));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return Err(invalid("iou_min must lie in (0, 1]"));
        }
        Ok(())
    }
}
