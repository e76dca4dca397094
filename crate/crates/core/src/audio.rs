use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Lowest accepted sample rate. Pipeline durations are given in
/// milliseconds, which degenerate to a handful of samples below this.
pub const MIN_SAMPLE_RATE_HZ: u32 = 1000;

/// Mono signal plus its sample rate.
///
/// Construction checks that the buffer is nonempty, the rate is at least
/// [`MIN_SAMPLE_RATE_HZ`] and every sample is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidAudio("buffer has no samples".into()));
        }
        if sample_rate_hz < MIN_SAMPLE_RATE_HZ {
            return Err(Error::InvalidAudio(format!(
                "sample rate {sample_rate_hz} Hz is below {MIN_SAMPLE_RATE_HZ} Hz"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false for a constructed buffer; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / 2.0
    }

    /// Number of samples spanned by `ms` milliseconds at this rate, rounded.
    pub fn ms_to_samples(&self, ms: f64) -> usize {
        libm::round(ms * self.sample_rate_hz as f64 / 1000.0) as usize
    }

    /// Copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|s| s * gain).collect(), self.sample_rate_hz)
    }

    /// Copy of samples `start..=end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end >= self.samples.len() {
            return Err(Error::InvalidArgument(format!(
                "span [{start}, {end}] outside buffer of {} samples",
                self.samples.len()
            )));
        }
        Self::new(self.samples[start..=end].to_vec(), self.sample_rate_hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_low_rate_and_nonfinite() {
        assert!(matches!(AudioBuffer::new(vec![], 16000), Err(Error::InvalidAudio(_))));
        assert!(AudioBuffer::new(vec![0.0], 999).is_err());
        assert!(AudioBuffer::new(vec![0.0, f64::NAN], 16000).is_err());
        assert!(AudioBuffer::new(vec![0.0, f64::INFINITY], 16000).is_err());
        assert!(AudioBuffer::new(vec![0.0], 1000).is_ok());
    }

    #[test]
    fn slice_bounds() {
        let b = AudioBuffer::new((0..10).map(f64::from).collect(), 1000).unwrap();
        assert_eq!(b.slice(2, 4).unwrap().samples(), &[2.0, 3.0, 4.0]);
        assert!(b.slice(4, 2).is_err());
        assert!(b.slice(0, 10).is_err());
    }
}
