//! Seeded generator of labelled roadside recordings with ground truth.
//!
//! Each recording holds three kinds of sources on a white background hiss:
//!
//! * driving events: band-limited noise (default 500-3000 Hz) under a Hann
//!   envelope, with a label-specific spectral colouring;
//! * wind gusts: an infrasonic pressure swell (below 2 Hz) plus hiss in the
//!   top of the spectrum (default 82-97 % of Nyquist), both under a Hann
//!   envelope, so almost all gust energy falls outside the default keep band;
//! * clicks: 2 ms decaying broadband impulses, too short to be events.
//!
//! Randomness comes from ChaCha8. Recording `r` of label index `l` (order
//! dry, slush, snow, wet) uses the generator seeded with `seed` on stream
//! `(l << 32) | r`, so recordings are independent and reproducible. Output
//! samples are rounded to `f32` precision so that a corpus written to float
//! WAV files and read back is bit-identical to the in-memory one.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::dsp::{hann_window, Fft};
use crate::error::{invalid, Error, Result};
use crate::eval::SurfaceLabel;
use crate::extract::EventSegment;
use crate::pipeline::{Corpus, Recording};

const CLICK_DURATION_S: f64 = 0.002;
const CLICK_DECAY_S: f64 = 0.0004;
/// Band edge ramps of the driving-noise spectrum, in Hz.
const BAND_RAMP_HZ: f64 = 150.0;
/// Spread of the per-event spectral tilt, dB per octave.
const EVENT_TILT_SPREAD_DB: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub seed: u64,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub recordings_per_label: usize,
    /// Poisson mean of driving events per recording.
    pub events_per_recording: f64,
    pub event_band_hz: [f64; 2],
    pub event_duration_s: [f64; 2],
    /// RMS amplitude at the envelope peak.
    pub event_amplitude: [f64; 2],
    /// Scales the wet/slush/snow colouring; 0 makes every label sound dry.
    pub anomaly_strength: f64,
    /// Master switch for gusts and clicks.
    pub contaminants: bool,
    pub gusts_per_recording: f64,
    pub gust_duration_s: [f64; 2],
    pub gust_swell_hz: [f64; 2],
    pub gust_swell_amplitude: [f64; 2],
    /// Gust hiss band as fractions of Nyquist.
    pub gust_hiss_band: [f64; 2],
    pub gust_hiss_amplitude: [f64; 2],
    pub clicks_per_recording: f64,
    pub click_amplitude: [f64; 2],
    /// Mean event RMS over background hiss RMS, in dB.
    pub background_snr_db: f64,
    /// Minimum silence between any two placed sources.
    pub min_gap_s: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            sample_rate_hz: 16000,
            duration_s: 60.0,
            recordings_per_label: 3,
            events_per_recording: 10.0,
            event_band_hz: [500.0, 3000.0],
            event_duration_s: [0.3, 1.5],
            event_amplitude: [0.15, 0.3],
            anomaly_strength: 1.0,
            contaminants: true,
            gusts_per_recording: 4.0,
            gust_duration_s: [2.0, 4.0],
            gust_swell_hz: [0.3, 0.8],
            gust_swell_amplitude: [0.2, 0.5],
            gust_hiss_band: [0.82, 0.97],
            gust_hiss_amplitude: [0.03, 0.08],
            clicks_per_recording: 3.0,
            click_amplitude: [0.3, 0.8],
            background_snr_db: 30.0,
            min_gap_s: 0.5,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], min: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] >= min && r[0] <= r[1]) {
        return Err(invalid(format!("{name} range {r:?} is invalid")));
    }
    Ok(())
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz < crate::audio::MIN_SAMPLE_RATE_HZ {
            return Err(invalid("sample rate below 1000 Hz"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid("duration must be positive"));
        }
        for (name, m) in [
            ("events", self.events_per_recording),
            ("gusts", self.gusts_per_recording),
            ("clicks", self.clicks_per_recording),
        ] {
            if !(m.is_finite() && (0.0..=500.0).contains(&m)) {
                return Err(invalid(format!("{name} per recording must lie in [0, 500]")));
            }
        }
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        check_range("event band", self.event_band_hz, 0.0)?;
        if self.event_band_hz[1] >= nyquist {
            return Err(invalid("event band reaches Nyquist"));
        }
        check_range("event duration", self.event_duration_s, 1e-3)?;
        check_range("event amplitude", self.event_amplitude, 0.0)?;
        check_range("gust duration", self.gust_duration_s, 1e-3)?;
        check_range("gust swell frequency", self.gust_swell_hz, 0.0)?;
        check_range("gust swell amplitude", self.gust_swell_amplitude, 0.0)?;
        check_range("gust hiss band", self.gust_hiss_band, 0.0)?;
        if self.gust_hiss_band[1] > 1.0 {
            return Err(invalid("gust hiss band exceeds Nyquist"));
        }
        check_range("gust hiss amplitude", self.gust_hiss_amplitude, 0.0)?;
        check_range("click amplitude", self.click_amplitude, 0.0)?;
        if !(self.anomaly_strength.is_finite() && self.anomaly_strength >= 0.0) {
            return Err(invalid("anomaly strength must be nonnegative"));
        }
        if !self.background_snr_db.is_finite() {
            return Err(invalid("background SNR must be finite"));
        }
        if !(self.min_gap_s.is_finite() && self.min_gap_s >= 0.0) {
            return Err(invalid("minimum gap must be nonnegative"));
        }
        Ok(())
    }

    /// Background hiss RMS implied by the SNR against the mid event level.
    pub fn background_rms(&self) -> f64 {
        let reference = 0.5 * (self.event_amplitude[0] + self.event_amplitude[1]);
        reference / libm::pow(10.0, self.background_snr_db / 20.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminantKind {
    WindGust,
    Click,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contaminant {
    pub kind: ContaminantKind,
    pub span: EventSegment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub id: String,
    pub label: SurfaceLabel,
    pub audio: AudioBuffer,
    /// Driving events, sorted and disjoint.
    pub events: Vec<EventSegment>,
    pub contaminants: Vec<Contaminant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub spec: CorpusSpec,
    pub recordings: Vec<SyntheticRecording>,
}

impl SyntheticCorpus {
    pub fn id(&self) -> String {
        format!("synth-seed{}", self.spec.seed)
    }

    pub fn into_corpus(self) -> Corpus {
        let id = self.id();
        Corpus {
            id,
            recordings: self
                .recordings
                .into_iter()
                .map(|r| Recording {
                    id: r.id,
                    label: r.label,
                    audio: r.audio,
                    truth: Some(r.events),
                })
                .collect(),
        }
    }
}

/// Generates `recordings_per_label` recordings for each surface label.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut recordings = Vec::with_capacity(4 * spec.recordings_per_label);
    for (li, label) in SurfaceLabel::ALL.into_iter().enumerate() {
        for r in 0..spec.recordings_per_label {
            recordings.push(generate_recording(spec, label, li, r)?);
        }
    }
    Ok(SyntheticCorpus {
        spec: spec.clone(),
        recordings,
    })
}

/// What a rendered source is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Event,
    WindGust,
    Click,
}

/// One source of a recording, rendered on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSource {
    pub kind: SourceKind,
    pub span: EventSegment,
    /// Exactly `span.len_samples()` samples, before `f32` rounding.
    pub samples: Vec<f64>,
}

/// The separate ingredients of one recording: the background hiss over the
/// whole length and every source in placement order.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingParts {
    pub id: String,
    pub label: SurfaceLabel,
    pub sample_rate_hz: u32,
    pub background: Vec<f64>,
    pub sources: Vec<RenderedSource>,
}

impl RecordingParts {
    /// Sum of the background and all sources, rounded to `f32` precision.
    pub fn mix(&self) -> Vec<f64> {
        let mut samples = self.background.clone();
        for src in &self.sources {
            let start = src.span.start_sample;
            for (s, v) in samples[start..start + src.samples.len()].iter_mut().zip(&src.samples) {
                *s += v;
            }
        }
        for s in &mut samples {
            *s = *s as f32 as f64;
        }
        samples
    }
}

pub fn generate_recording(
    spec: &CorpusSpec,
    label: SurfaceLabel,
    label_index: usize,
    index: usize,
) -> Result<SyntheticRecording> {
    let parts = recording_parts(spec, label, label_index, index)?;
    let audio = AudioBuffer::new(parts.mix(), parts.sample_rate_hz)?;
    let mut events = Vec::new();
    let mut contaminants = Vec::new();
    for src in &parts.sources {
        match src.kind {
            SourceKind::Event => events.push(src.span),
            SourceKind::WindGust => contaminants.push(Contaminant {
                kind: ContaminantKind::WindGust,
                span: src.span,
            }),
            SourceKind::Click => contaminants.push(Contaminant {
                kind: ContaminantKind::Click,
                span: src.span,
            }),
        }
    }
    events.sort_by_key(|e| e.start_sample);
    contaminants.sort_by_key(|c| c.span.start_sample);
    Ok(SyntheticRecording {
        id: parts.id,
        label,
        audio,
        events,
        contaminants,
    })
}

/// Draws and renders every part of a recording without mixing them.
pub fn recording_parts(
    spec: &CorpusSpec,
    label: SurfaceLabel,
    label_index: usize,
    index: usize,
) -> Result<RecordingParts> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((label_index as u64) << 32) | index as u64);
    let rate = spec.sample_rate_hz;
    let n = libm::round(spec.duration_s * rate as f64) as usize;
    let id = format!("{}_{index:03}", label.as_str());

    let mut sources: Vec<(SourceKind, usize)> = Vec::new();
    if spec.contaminants {
        for _ in 0..poisson(&mut rng, spec.gusts_per_recording) {
            sources.push((
                SourceKind::WindGust,
                seconds(rate, uniform(&mut rng, spec.gust_duration_s)),
            ));
        }
    }
    for _ in 0..poisson(&mut rng, spec.events_per_recording) {
        sources.push((
            SourceKind::Event,
            seconds(rate, uniform(&mut rng, spec.event_duration_s)),
        ));
    }
    if spec.contaminants {
        for _ in 0..poisson(&mut rng, spec.clicks_per_recording) {
            sources.push((SourceKind::Click, seconds(rate, CLICK_DURATION_S)));
        }
    }
    let gap = libm::round(spec.min_gap_s * rate as f64) as usize;
    let starts = place_all(&mut rng, n, gap, &mut sources).ok_or_else(|| {
        Error::Generation(format!(
            "recording {id}: cannot fit {} sources in {} s with {} s gaps; lower the density",
            sources.len(),
            spec.duration_s,
            spec.min_gap_s
        ))
    })?;

    let mut background = vec![0.0; n];
    let level = spec.background_rms();
    if level > 0.0 {
        for s in background.iter_mut() {
            *s = level * gaussian(&mut rng);
        }
    }
    let mut rendered = Vec::with_capacity(sources.len());
    for (&(kind, len), start) in sources.iter().zip(starts) {
        let samples = match kind {
            SourceKind::Event => render_event(&mut rng, spec, label, len)?,
            SourceKind::WindGust => render_gust(&mut rng, spec, len)?,
            SourceKind::Click => render_click(&mut rng, spec, len),
        };
        rendered.push(RenderedSource {
            kind,
            span: EventSegment::from_span(start, start + len - 1, rate),
            samples,
        });
    }
    Ok(RecordingParts {
        id,
        label,
        sample_rate_hz: rate,
        background,
        sources: rendered,
    })
}

fn seconds(rate: u32, s: f64) -> usize {
    (libm::round(s * rate as f64) as usize).max(1)
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    range[0] + (range[1] - range[0]) * rng.random::<f64>()
}

/// Box-Muller, one normal deviate per pair of uniforms.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

/// Knuth's multiplication method.
fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let limit = libm::exp(-mean);
    let mut k = 0;
    let mut p = rng.random::<f64>();
    while p > limit {
        k += 1;
        p *= rng.random::<f64>();
    }
    k
}

/// Lays the sources out in random order with at least `gap` samples
/// between neighbours and from the recording edges. The free time left
/// over is split across the gaps with uniform random weights. Reorders
/// `sources` and returns their start samples, or `None` if they cannot fit.
fn place_all(rng: &mut ChaCha8Rng, n: usize, gap: usize, sources: &mut [(SourceKind, usize)]) -> Option<Vec<usize>> {
    let k = sources.len();
    let occupied: usize = sources.iter().map(|s| s.1).sum::<usize>() + (k + 1) * gap;
    let free = n.checked_sub(occupied)?;
    for i in (1..k).rev() {
        let j = rng.random_range(0..=i);
        sources.swap(i, j);
    }
    let weights: Vec<f64> = (0..=k).map(|_| rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let mut starts = Vec::with_capacity(k);
    let mut cursor = 0usize;
    let mut used = 0usize;
    let mut acc = 0.0;
    for (i, &(_, len)) in sources.iter().enumerate() {
        acc += weights[i];
        let slack = if total > 0.0 {
            ((free as f64 * acc / total) as usize).min(free)
        } else {
            0
        };
        cursor += gap + (slack - used);
        used = slack;
        starts.push(cursor);
        cursor += len;
    }
    Some(starts)
}

/// White noise shaped in the frequency domain by `gain(f_hz)`, normalised
/// to unit RMS (all zeros if the gain removes everything).
fn shaped_noise(rng: &mut ChaCha8Rng, len: usize, rate: u32, gain: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let plan = Fft::new(len)?;
    let mut data: Vec<Complex64> = (0..len).map(|_| Complex64::new(gaussian(rng), 0.0)).collect();
    plan.forward(&mut data);
    for (k, z) in data.iter_mut().enumerate() {
        let f = k.min(len - k) as f64 * rate as f64 / len as f64;
        *z *= gain(f);
    }
    plan.inverse(&mut data);
    let out: Vec<f64> = data.into_iter().map(|z| z.re).collect();
    let rms = crate::dsp::rms(&out);
    Ok(if rms > 0.0 {
        out.into_iter().map(|v| v / rms).collect()
    } else {
        out
    })
}

/// Flat band `[lo, hi]` with raised-cosine ramps of `ramp` Hz inside the
/// edges.
fn band_gain(f: f64, lo: f64, hi: f64, ramp: f64) -> f64 {
    if f < lo || f > hi {
        return 0.0;
    }
    let ramp = ramp.min((hi - lo) / 2.0);
    let edge = (f - lo).min(hi - f);
    if ramp <= 0.0 || edge >= ramp {
        1.0
    } else {
        0.5 * (1.0 - libm::cos(PI * edge / ramp))
    }
}

fn tilt_gain(f: f64, db_per_octave: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    libm::pow(10.0, db_per_octave * libm::log2(f / 1000.0) / 20.0)
}

/// Spectral colouring of each surface relative to dry: a tilt in dB per
/// octave around 1 kHz plus an overlay band `(lo, hi, level)`.
fn surface_colouring(label: SurfaceLabel) -> (f64, Option<(f64, f64, f64)>) {
    match label {
        SurfaceLabel::Dry => (0.0, None),
        // spray: brighter, with hiss above the tyre band
        SurfaceLabel::Wet => (4.0, Some((2800.0, 5500.0, 0.9))),
        // slosh: darker, with a low splash band
        SurfaceLabel::Slush => (-3.0, Some((150.0, 450.0, 1.0))),
        // packed snow: muffled, faint crunch
        SurfaceLabel::Snow => (-6.0, Some((3300.0, 4800.0, 0.5))),
    }
}

fn render_event(rng: &mut ChaCha8Rng, spec: &CorpusSpec, label: SurfaceLabel, len: usize) -> Result<Vec<f64>> {
    let [lo, hi] = spec.event_band_hz;
    let natural_tilt = EVENT_TILT_SPREAD_DB * (2.0 * rng.random::<f64>() - 1.0);
    let amplitude = uniform(rng, spec.event_amplitude);
    let (tilt, overlay) = surface_colouring(label);
    let g = spec.anomaly_strength;
    let noise = shaped_noise(rng, len, spec.sample_rate_hz, |f| {
        let base = band_gain(f, lo, hi, BAND_RAMP_HZ) * tilt_gain(f, natural_tilt + g * tilt);
        let extra = overlay.map_or(0.0, |(olo, ohi, level)| {
            g * level * band_gain(f, olo, ohi, BAND_RAMP_HZ)
        });
        base + extra
    })?;
    let env = hann_window(len)?;
    Ok(noise.into_iter().zip(env).map(|(x, e)| amplitude * e * x).collect())
}

fn render_gust(rng: &mut ChaCha8Rng, spec: &CorpusSpec, len: usize) -> Result<Vec<f64>> {
    let rate = spec.sample_rate_hz as f64;
    let nyquist = rate / 2.0;
    let swell_hz = uniform(rng, spec.gust_swell_hz);
    let swell_amp = uniform(rng, spec.gust_swell_amplitude);
    let phase = 2.0 * PI * rng.random::<f64>();
    let hiss_amp = uniform(rng, spec.gust_hiss_amplitude);
    let [flo, fhi] = spec.gust_hiss_band;
    let hiss = shaped_noise(rng, len, spec.sample_rate_hz, |f| {
        band_gain(f, flo * nyquist, fhi * nyquist, 0.0)
    })?;
    let env = hann_window(len)?;
    Ok((0..len)
        .map(|i| {
            let swell = swell_amp * libm::sin(2.0 * PI * swell_hz * i as f64 / rate + phase);
            env[i] * (swell + hiss_amp * hiss[i])
        })
        .collect())
}

fn render_click(rng: &mut ChaCha8Rng, spec: &CorpusSpec, len: usize) -> Vec<f64> {
    let rate = spec.sample_rate_hz as f64;
    let amplitude = uniform(rng, spec.click_amplitude);
    (0..len)
        .map(|i| amplitude * libm::exp(-(i as f64) / (CLICK_DECAY_S * rate)) * gaussian(rng))
        .collect()
}
