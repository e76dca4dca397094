//! Windowing, transforms, band-pass masking, envelopes and spectra.

mod fft;

pub use fft::{dft, inverse_dft, Fft};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{invalid, Error, Result};
use crate::kernels;

/// Largest imaginary residue tolerated when returning to the time domain,
/// relative to `max(1, peak |x|)`.
const IMAG_RESIDUE_LIMIT: f64 = 1e-6;

/// Symmetric Hann window, `w[k] = 0.5 (1 - cos(2 pi k / (L - 1)))`.
///
/// A single-point window is `[1.0]`.
pub fn hann_window(length: usize) -> Result<Vec<f64>> {
    match length {
        0 => Err(invalid("window length must be at least 1")),
        1 => Ok(vec![1.0]),
        _ => {
            let denom = (length - 1) as f64;
            Ok((0..length)
                .map(|k| 0.5 * (1.0 - libm::cos(2.0 * PI * k as f64 / denom)))
                .collect())
        }
    }
}

/// Smoothed absolute amplitude.
///
/// `|x|` is convolved with a unit-sum Hann window of `round(window_ms * rate /
/// 1000)` samples, centred on each output sample, with zeros outside the
/// buffer. The output has the same length as the input.
pub fn smooth_envelope(buffer: &AudioBuffer, window_ms: f64) -> Result<Vec<f64>> {
    if !(window_ms.is_finite() && window_ms > 0.0) {
        return Err(invalid(format!("smoothing window {window_ms} ms must be positive")));
    }
    let len = buffer.ms_to_samples(window_ms);
    if len == 0 {
        return Err(invalid(format!(
            "smoothing window {window_ms} ms is shorter than one sample"
        )));
    }
    if len > buffer.len() {
        return Err(invalid(format!(
            "smoothing window of {len} samples exceeds signal of {} samples",
            buffer.len()
        )));
    }
    let mut window = hann_window(len)?;
    let total: f64 = window.iter().sum();
    if total <= 0.0 {
        // only length 2, whose Hann coefficients are both zero
        return Err(invalid("smoothing window of 2 samples has zero weight"));
    }
    for w in &mut window {
        *w /= total;
    }
    let magnitude: Vec<f64> = buffer.samples().iter().map(|x| x.abs()).collect();
    Ok(convolve_centered(&magnitude, &window))
}

/// `out[i] = sum_j w[j] * x[i + j - c]` with `c = (len(w) - 1) / 2` and zero
/// padding.
fn convolve_centered(x: &[f64], w: &[f64]) -> Vec<f64> {
    let n = x.len();
    let c = (w.len() - 1) / 2;
    (0..n)
        .map(|i| {
            let lo = c.saturating_sub(i);
            let hi = w.len().min(n + c - i);
            if lo >= hi {
                return 0.0;
            }
            kernels::dot(&w[lo..hi], &x[i + lo - c..i + hi - c])
        })
        .collect()
}

/// Kept frequency band as fractions of the Nyquist frequency.
///
/// Bins below `low_fraction * nyquist` or above `high_fraction * nyquist`
/// are removed by [`band_pass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub low_fraction: f64,
    pub high_fraction: f64,
}

impl Default for BandSpec {
    /// Drops the lowest 0.03 % and the highest 22 % of the frequency axis.
    fn default() -> Self {
        Self {
            low_fraction: 0.0003,
            high_fraction: 0.78,
        }
    }
}

impl BandSpec {
    pub fn new(low_fraction: f64, high_fraction: f64) -> Result<Self> {
        let band = Self {
            low_fraction,
            high_fraction,
        };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.low_fraction, self.high_fraction);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(invalid("band fractions must be finite"));
        }
        if !(0.0..1.0).contains(&lo) {
            return Err(invalid(format!("low fraction {lo} must lie in [0, 1)")));
        }
        if !(hi > 0.0 && hi <= 1.0) {
            return Err(invalid(format!("high fraction {hi} must lie in (0, 1]")));
        }
        if lo >= hi {
            return Err(invalid(format!("low fraction {lo} must be below high fraction {hi}")));
        }
        Ok(())
    }

    /// Kept band edges in Hz for a given sample rate.
    pub fn keep_band_hz(&self, sample_rate_hz: u32) -> (f64, f64) {
        let nyquist = sample_rate_hz as f64 / 2.0;
        (self.low_fraction * nyquist, self.high_fraction * nyquist)
    }

    /// Whether bin `k` of an `n`-point transform survives the mask. Bins above
    /// `n / 2` are negative frequencies and share the fate of bin `n - k`.
    pub fn keeps_bin(&self, k: usize, n: usize, sample_rate_hz: u32) -> bool {
        let (lo, hi) = self.keep_band_hz(sample_rate_hz);
        let f = k.min(n - k) as f64 * sample_rate_hz as f64 / n as f64;
        f >= lo && f <= hi
    }
}

/// Zero-phase band-pass by whole-buffer frequency masking.
pub fn band_pass(buffer: &AudioBuffer, band: &BandSpec) -> Result<AudioBuffer> {
    band.validate()?;
    let plan = Fft::new(buffer.len())?;
    let out = mask_with_plan(buffer.samples(), buffer.sample_rate_hz(), band, &plan)?;
    AudioBuffer::new(out, buffer.sample_rate_hz())
}

fn mask_with_plan(samples: &[f64], rate: u32, band: &BandSpec, plan: &Fft) -> Result<Vec<f64>> {
    let n = samples.len();
    let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    plan.forward(&mut data);
    for (k, z) in data.iter_mut().enumerate() {
        if !band.keeps_bin(k, n, rate) {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    plan.inverse(&mut data);
    let peak = samples.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let residue = data.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if residue >= IMAG_RESIDUE_LIMIT * peak {
        return Err(Error::Numerical(format!(
            "band-pass left imaginary residue {residue:e}"
        )));
    }
    Ok(data.into_iter().map(|z| z.re).collect())
}

/// Result of [`band_pass_on_grid`].
#[derive(Debug, Clone)]
pub struct GridFiltered {
    pub buffer: AudioBuffer,
    /// Grid spacing the samples were snapped to.
    pub step: f64,
    pub iterations: usize,
    /// True when re-filtering the output and snapping again reproduces it.
    pub converged: bool,
}

/// Band-pass followed by snapping to a uniform grid that `f32` represents
/// exactly, refined until the result is a fixed point of filter-then-snap.
///
/// Storing a filtered signal at finite precision reintroduces a little
/// out-of-band content, so a plain second pass would move some samples by
/// one step. Each refinement re-filters and re-snaps; the handful of samples
/// whose residue crosses half a step are corrected and the loop stops once
/// nothing moves.
pub fn band_pass_on_grid(buffer: &AudioBuffer, band: &BandSpec, max_iterations: usize) -> Result<GridFiltered> {
    band.validate()?;
    let rate = buffer.sample_rate_hz();
    let plan = Fft::new(buffer.len())?;
    let filtered = mask_with_plan(buffer.samples(), rate, band, &plan)?;
    let step = grid_step(&filtered);
    let mut current = snap(&filtered, step);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        let next = snap(&mask_with_plan(&current, rate, band, &plan)?, step);
        if next == current {
            converged = true;
            break;
        }
        current = next;
    }
    Ok(GridFiltered {
        buffer: AudioBuffer::new(current, rate)?,
        step,
        iterations,
        converged,
    })
}

/// Power-of-two step giving 24 significant bits over the signal's range.
fn grid_step(samples: &[f64]) -> f64 {
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut exponent = 1i32;
    while libm::ldexp(1.0, exponent) <= peak {
        exponent += 1;
    }
    libm::ldexp(1.0, exponent - 24)
}

fn snap(samples: &[f64], step: f64) -> Vec<f64> {
    samples.iter().map(|x| libm::round(x / step) * step).collect()
}

/// One-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub bin_magnitudes: Vec<f64>,
    pub bin_resolution_hz: f64,
}

impl Spectrum {
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.bin_resolution_hz
    }

    /// Magnitude-weighted mean frequency, `None` for an all-zero spectrum.
    pub fn centroid_hz(&self) -> Option<f64> {
        let total: f64 = self.bin_magnitudes.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let weighted: f64 = self
            .bin_magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| self.bin_hz(k) * m)
            .sum();
        Some(weighted / total)
    }
}

/// Reusable Hann-windowed frame transform.
#[derive(Debug, Clone)]
pub struct FrameAnalyzer {
    window: Vec<f64>,
    plan: Fft,
    scratch: Vec<Complex64>,
}

impl FrameAnalyzer {
    pub fn new(frame_size: usize) -> Result<Self> {
        Ok(Self {
            window: hann_window(frame_size)?,
            plan: Fft::new(frame_size)?,
            scratch: vec![Complex64::new(0.0, 0.0); frame_size],
        })
    }

    pub fn frame_size(&self) -> usize {
        self.window.len()
    }

    /// Writes `|X[k]|` for the first `out.len()` one-sided bins of the
    /// windowed frame.
    pub fn magnitudes(&mut self, frame: &[f64], out: &mut [f64]) {
        assert_eq!(frame.len(), self.window.len());
        assert!(out.len() <= frame.len() / 2 + 1);
        for ((z, x), w) in self.scratch.iter_mut().zip(frame).zip(&self.window) {
            *z = Complex64::new(x * w, 0.0);
        }
        self.plan.forward(&mut self.scratch);
        for (o, z) in out.iter_mut().zip(&self.scratch) {
            *o = z.norm();
        }
    }
}

/// Mean of per-frame one-sided magnitude spectra over Hann-windowed frames
/// starting every `hop` samples.
pub fn time_averaged_spectrum(buffer: &AudioBuffer, frame_size: usize, hop: usize) -> Result<Spectrum> {
    if frame_size == 0 || hop == 0 {
        return Err(invalid("frame size and hop must be positive"));
    }
    if frame_size > buffer.len() {
        return Err(invalid(format!(
            "frame size {frame_size} exceeds signal of {} samples",
            buffer.len()
        )));
    }
    let bins = frame_size / 2 + 1;
    let mut analyzer = FrameAnalyzer::new(frame_size)?;
    let mut sum = vec![0.0; bins];
    let mut frame_mags = vec![0.0; bins];
    let samples = buffer.samples();
    let mut frames = 0usize;
    let mut start = 0;
    while start + frame_size <= samples.len() {
        analyzer.magnitudes(&samples[start..start + frame_size], &mut frame_mags);
        for (s, m) in sum.iter_mut().zip(&frame_mags) {
            *s += m;
        }
        frames += 1;
        start += hop;
    }
    for s in &mut sum {
        *s /= frames as f64;
    }
    Ok(Spectrum {
        bin_magnitudes: sum,
        bin_resolution_hz: buffer.sample_rate_hz() as f64 / frame_size as f64,
    })
}

/// Root mean square of a sample slice.
pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    libm::sqrt(samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64)
}

/// Fraction of a signal's energy lying outside the kept band, from its full
/// length DFT.
pub fn energy_outside_band(buffer: &AudioBuffer, band: &BandSpec) -> Result<f64> {
    let spectrum = dft(buffer.samples())?;
    let n = spectrum.len();
    let mut total = 0.0;
    let mut outside = 0.0;
    for (k, z) in spectrum.iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        if !band.keeps_bin(k, n, buffer.sample_rate_hz()) {
            outside += e;
        }
    }
    Ok(if total > 0.0 { outside / total } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf(samples: Vec<f64>, rate: u32) -> AudioBuffer {
        AudioBuffer::new(samples, rate).unwrap()
    }

    fn tone(freq: f64, rate: u32, n: usize, amp: f64) -> AudioBuffer {
        buf(
            (0..n)
                .map(|i| amp * libm::sin(2.0 * PI * freq * i as f64 / rate as f64))
                .collect(),
            rate,
        )
    }

    #[test]
    fn hann_closed_forms() {
        assert!(hann_window(0).is_err());
        assert_eq!(hann_window(1).unwrap(), vec![1.0]);
        let w3 = hann_window(3).unwrap();
        for (a, b) in w3.iter().zip([0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let w5 = hann_window(5).unwrap();
        for (a, b) in w5.iter().zip([0.0, 0.5, 1.0, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let w8 = hann_window(8).unwrap();
        assert_eq!(w8[0], 0.0);
        assert!(w8[7].abs() < 1e-15);
        for k in 0..8 {
            assert!((w8[k] - w8[7 - k]).abs() < 1e-15);
        }
    }

    #[test]
    fn envelope_of_constant_is_constant_inside() {
        let b = buf(vec![-0.25; 400], 1000);
        let env = smooth_envelope(&b, 25.0).unwrap();
        assert_eq!(env.len(), 400);
        for e in &env[20..380] {
            assert!((e - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_of_silence_is_silent() {
        let b = buf(vec![0.0; 100], 1000);
        assert!(smooth_envelope(&b, 25.0).unwrap().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn envelope_of_impulse_is_the_window() {
        let mut x = vec![0.0; 101];
        x[50] = 1.0;
        let env = smooth_envelope(&buf(x, 1000), 25.0).unwrap();
        // independent: normalized 25-point Hann placed around sample 50
        let w: Vec<f64> = (0..25)
            .map(|k| 0.5 - 0.5 * libm::cos(2.0 * PI * k as f64 / 24.0))
            .collect();
        let s: f64 = w.iter().sum();
        for (i, e) in env.iter().enumerate() {
            let d = i as i64 - 50 + 12;
            let want = if (0..25).contains(&d) { w[d as usize] / s } else { 0.0 };
            assert!((e - want).abs() < 1e-15, "i={i}");
        }
    }

    #[test]
    fn envelope_rejects_bad_windows() {
        let b = buf(vec![0.1; 10], 1000);
        assert!(smooth_envelope(&b, 11.0).is_err());
        assert!(smooth_envelope(&b, 0.2).is_err());
        assert!(smooth_envelope(&b, -1.0).is_err());
        assert!(smooth_envelope(&b, 2.0).is_err());
        assert!(smooth_envelope(&b, 1.0).is_ok());
    }

    #[test]
    fn band_validation() {
        assert!(BandSpec::new(0.5, 0.5).is_err());
        assert!(BandSpec::new(-0.1, 0.5).is_err());
        assert!(BandSpec::new(0.1, 1.1).is_err());
        assert!(BandSpec::new(0.0, 1.0).is_ok());
        let d = BandSpec::default();
        let (lo, hi) = d.keep_band_hz(1000);
        assert!((lo - 0.15).abs() < 1e-12 && (hi - 390.0).abs() < 1e-9);
    }

    #[test]
    fn band_pass_removes_out_of_band_tone() {
        let out = band_pass(&tone(400.0, 1000, 1000, 0.5), &BandSpec::default()).unwrap();
        assert!(rms(out.samples()) < 1e-6);
    }

    #[test]
    fn band_pass_keeps_in_band_tone() {
        let input = tone(100.0, 1000, 1000, 0.5);
        let out = band_pass(&input, &BandSpec::default()).unwrap();
        let (a, b) = (rms(input.samples()), rms(out.samples()));
        assert!((a - b).abs() <= 0.01 * a);
    }

    #[test]
    fn band_pass_removes_dc() {
        let out = band_pass(&buf(vec![0.3; 777], 8000), &BandSpec::default()).unwrap();
        assert!(out.samples().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn grid_filter_is_a_fixed_point() {
        let rate = 8000;
        let x: Vec<f64> = (0..4000)
            .map(|i| {
                let t = i as f64 / rate as f64;
                0.3 * libm::sin(2.0 * PI * 440.0 * t)
                    + 0.2 * libm::sin(2.0 * PI * 3500.0 * t + 0.3)
                    + 0.1 * libm::sin(2.0 * PI * 0.7 * t)
            })
            .collect();
        let band = BandSpec::default();
        let first = band_pass_on_grid(&buf(x, rate), &band, 32).unwrap();
        assert!(first.converged);
        let again = band_pass_on_grid(&first.buffer, &band, 32).unwrap();
        assert_eq!(again.iterations, 1);
        assert_eq!(again.buffer.samples(), first.buffer.samples());
        for v in first.buffer.samples() {
            assert_eq!(*v as f32 as f64, *v);
        }
    }

    #[test]
    fn spectrum_of_silence_and_tone_peak() {
        let z = time_averaged_spectrum(&buf(vec![0.0; 4096], 16000), 1024, 512).unwrap();
        assert_eq!(z.bin_magnitudes.len(), 513);
        assert!(z.bin_magnitudes.iter().all(|&m| m == 0.0));
        assert!(z.centroid_hz().is_none());

        // bin 40 of a 1024 frame at 16 kHz is 625 Hz
        let t = tone(625.0, 16000, 8000, 0.5);
        for hop in [1usize, 100, 512, 1024, 3000] {
            let s = time_averaged_spectrum(&t, 1024, hop).unwrap();
            let argmax = s
                .bin_magnitudes
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, 40, "hop {hop}");
            assert!((s.bin_hz(40) - 625.0).abs() < 1e-9);
        }
        assert!(time_averaged_spectrum(&t, 9000, 1).is_err());
        assert!(time_averaged_spectrum(&t, 1024, 0).is_err());
    }
}
