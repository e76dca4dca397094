//! Driving-event extraction: sustained peaks of the smoothed envelope.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::dsp;
use crate::error::{invalid, Result};
use crate::stats;

/// Which sequence the detection percentile is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    /// Magnitude of the percentile of the raw signed samples.
    SignedAmplitude,
    /// Percentile of the smoothed envelope itself.
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub threshold_percentile: f64,
    pub threshold_source: ThresholdSource,
    pub min_duration_ms: f64,
    pub smoothing_window_ms: f64,
    pub merge_gap_ms: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            threshold_percentile: 10.0,
            threshold_source: ThresholdSource::SignedAmplitude,
            min_duration_ms: 50.0,
            smoothing_window_ms: 25.0,
            merge_gap_ms: 10.0,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_percentile > 0.0 && self.threshold_percentile < 100.0) {
            return Err(invalid("threshold percentile must lie in (0, 100)"));
        }
        if !(self.min_duration_ms.is_finite() && self.min_duration_ms > 0.0) {
            return Err(invalid("minimum duration must be positive"));
        }
        if !(self.smoothing_window_ms.is_finite() && self.smoothing_window_ms > 0.0) {
            return Err(invalid("smoothing window must be positive"));
        }
        if !(self.merge_gap_ms.is_finite() && self.merge_gap_ms >= 0.0) {
            return Err(invalid("merge gap must be nonnegative"));
        }
        Ok(())
    }
}

/// A detected (or ground-truth) event. `end_sample` is inclusive, so
/// `end_s = (end_sample + 1) / rate` and `end_s - start_s` is the duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSegment {
    pub start_sample: usize,
    pub end_sample: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub peak_envelope: f64,
    pub mean_envelope: f64,
}

impl EventSegment {
    /// Segment over an inclusive sample span with zero envelope statistics.
    pub fn from_span(start_sample: usize, end_sample: usize, sample_rate_hz: u32) -> Self {
        let rate = sample_rate_hz as f64;
        Self {
            start_sample,
            end_sample,
            start_s: start_sample as f64 / rate,
            end_s: (end_sample + 1) as f64 / rate,
            peak_envelope: 0.0,
            mean_envelope: 0.0,
        }
    }

    /// Segment covering `[start_s, end_s)` in seconds.
    pub fn from_seconds(start_s: f64, end_s: f64, sample_rate_hz: u32) -> Result<Self> {
        let rate = sample_rate_hz as f64;
        if !(start_s >= 0.0 && end_s > start_s) {
            return Err(invalid(format!("bad span [{start_s}, {end_s}) s")));
        }
        let start = libm::round(start_s * rate) as usize;
        let end = (libm::round(end_s * rate) as usize).max(start + 1) - 1;
        Ok(Self::from_span(start, end, sample_rate_hz))
    }

    pub fn len_samples(&self) -> usize {
        self.end_sample - self.start_sample + 1
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Temporal intersection over union on inclusive sample spans.
    pub fn iou(&self, other: &EventSegment) -> f64 {
        let lo = self.start_sample.max(other.start_sample);
        let hi = self.end_sample.min(other.end_sample);
        if lo > hi {
            return 0.0;
        }
        let inter = (hi - lo + 1) as f64;
        let union = (self.len_samples() + other.len_samples()) as f64 - inter;
        inter / union
    }
}

/// Nearest-rank percentile of `envelope`.
pub fn compute_threshold(envelope: &[f64], percentile: f64) -> Result<f64> {
    stats::nearest_rank(envelope, percentile)
}

/// Detection threshold for a buffer and its envelope under `config`.
pub fn detection_threshold(buffer: &AudioBuffer, envelope: &[f64], config: &ExtractionConfig) -> Result<f64> {
    match config.threshold_source {
        ThresholdSource::Envelope => compute_threshold(envelope, config.threshold_percentile),
        ThresholdSource::SignedAmplitude => Ok(compute_threshold(buffer.samples(), config.threshold_percentile)?.abs()),
    }
}

/// Turns an envelope trace into events: maximal runs strictly above
/// `threshold`, runs separated by fewer than `merge_gap_ms` worth of samples
/// joined, and survivors of at least `min_duration_ms` kept.
pub fn segments_from_envelope(
    envelope: &[f64],
    threshold: f64,
    sample_rate_hz: u32,
    config: &ExtractionConfig,
) -> Vec<EventSegment> {
    let rate = sample_rate_hz as f64;
    let merge_gap = config.merge_gap_ms * rate / 1000.0;
    let min_len = config.min_duration_ms * rate / 1000.0;

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &e) in envelope.iter().enumerate() {
        match (e > threshold, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                push_run(&mut runs, s, i - 1, merge_gap);
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        push_run(&mut runs, s, envelope.len() - 1, merge_gap);
    }

    runs.into_iter()
        .filter(|&(s, e)| (e - s + 1) as f64 >= min_len)
        .map(|(s, e)| {
            let span = &envelope[s..=e];
            let mut seg = EventSegment::from_span(s, e, sample_rate_hz);
            seg.peak_envelope = span.iter().fold(0.0f64, |m, &v| m.max(v));
            seg.mean_envelope = span.iter().sum::<f64>() / span.len() as f64;
            seg
        })
        .collect()
}

fn push_run(runs: &mut Vec<(usize, usize)>, start: usize, end: usize, merge_gap: f64) {
    if let Some(last) = runs.last_mut() {
        let gap = (start - last.1 - 1) as f64;
        if gap < merge_gap {
            last.1 = end;
            return;
        }
    }
    runs.push((start, end));
}

/// Detected events plus the trace they were read from.
#[derive(Debug, Clone)]
pub struct Detection {
    pub events: Vec<EventSegment>,
    pub envelope: Vec<f64>,
    pub threshold: f64,
}

pub fn detect(buffer: &AudioBuffer, config: &ExtractionConfig) -> Result<Detection> {
    config.validate()?;
    let envelope = dsp::smooth_envelope(buffer, config.smoothing_window_ms)?;
    let threshold = detection_threshold(buffer, &envelope, config)?;
    let events = segments_from_envelope(&envelope, threshold, buffer.sample_rate_hz(), config);
    Ok(Detection {
        events,
        envelope,
        threshold,
    })
}

/// Sorted, non-overlapping driving events of at least the minimum duration.
pub fn extract_events(buffer: &AudioBuffer, config: &ExtractionConfig) -> Result<Vec<EventSegment>> {
    detect(buffer, config).map(|d| d.events)
}

/// Checks that segments are sorted by start and do not overlap.
pub fn is_sorted_disjoint(segments: &[EventSegment]) -> bool {
    segments.windows(2).all(|w| w[0].end_sample < w[1].start_sample)
        && segments.iter().all(|s| s.start_sample <= s.end_sample)
}
