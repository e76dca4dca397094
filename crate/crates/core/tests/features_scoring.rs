use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadnoise_core::autoencoder::{init_model, score_events, TrainConfig};
use roadnoise_core::config::{PipelineConfig, SplitConfig};
use roadnoise_core::extract::EventSegment;
use roadnoise_core::features::{event_features, fit_standardizer, FeatureConfig, FeatureTensor};
use roadnoise_core::pipeline::{process_recording, score_refs, split_events, train_scorer, Condition};
use roadnoise_core::stats::median;
use roadnoise_core::synth::{generate_corpus, CorpusSpec};
use roadnoise_core::AudioBuffer;

fn small_features() -> FeatureConfig {
    FeatureConfig {
        frames: 8,
        bins: 16,
        frame_size: 64,
        hop: 32,
    }
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

/// Naive Hann-windowed DFT magnitudes of one frame, `log(1 + |X_k|)`.
fn frame_oracle(frame: &[f64], bins: usize) -> Vec<f64> {
    let n = frame.len();
    (0..bins)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in frame.iter().enumerate() {
                let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
                let a = -2.0 * PI * (k * i) as f64 / n as f64;
                re += w * x * a.cos();
                im += w * x * a.sin();
            }
            (re * re + im * im).sqrt().ln_1p()
        })
        .collect()
}

#[test]
fn tensor_matches_a_naive_spectrogram() {
    let cfg = small_features();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let patch = cfg.patch_len();
    let samples = noise(&mut rng, 3 * patch);
    let buffer = AudioBuffer::new(samples.clone(), 8000).unwrap();
    // exactly one patch long, so no crop or pad
    let start = patch;
    let seg = EventSegment::from_span(start, start + patch - 1, 8000);
    let t = event_features(&buffer, &seg, &cfg, 3).unwrap();
    assert_eq!((t.frames, t.bins, t.event_ref), (cfg.frames, cfg.bins, 3));
    for f in 0..cfg.frames {
        let off = start + f * cfg.hop;
        let want = frame_oracle(&samples[off..off + cfg.frame_size], cfg.bins);
        for (a, b) in t.frame(f).iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "frame {f}: {a} vs {b}");
        }
    }
}

#[test]
fn default_shape_is_32_by_64() {
    let cfg = FeatureConfig::default();
    let buffer = AudioBuffer::new(vec![0.1; 16000], 16000).unwrap();
    for (s, e) in [(0, 159), (1000, 9000), (0, 15999)] {
        let seg = EventSegment::from_span(s, e, 16000);
        let t = event_features(&buffer, &seg, &cfg, 0).unwrap();
        assert_eq!((t.frames, t.bins, t.values.len()), (32, 64, 2048));
    }
}

fn tensors_strategy() -> impl Strategy<Value = Vec<FeatureTensor>> {
    (2usize..12, any::<u64>()).prop_map(|(count, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let scale = 0.1 + 10.0 * rng.random::<f64>();
                let values = (0..24).map(|_| scale * rng.random::<f64>() + 3.0).collect();
                FeatureTensor::new(values, 4, 6, i).unwrap()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(Config {
        cases: 64,
        rng_seed: RngSeed::Fixed(23),
        failure_persistence: None,
        ..Config::default()
    })]

    #[test]
    fn standardized_fit_set_has_zero_mean_unit_std(set in tensors_strategy()) {
        let s = fit_standardizer(&set).unwrap();
        let z: Vec<FeatureTensor> = set.iter().map(|t| s.apply(t).unwrap()).collect();
        for bin in 0..6 {
            let column: Vec<f64> = z
                .iter()
                .flat_map(|t| (0..4).map(move |f| t.frame(f)[bin]))
                .collect();
            let n = column.len() as f64;
            let mean = column.iter().sum::<f64>() / n;
            let std = (column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() <= 1e-9, "bin {} mean {}", bin, mean);
            prop_assert!((std - 1.0).abs() <= 1e-6, "bin {} std {}", bin, std);
        }
    }

    #[test]
    fn shape_is_independent_of_duration(len in 1usize..2000, offset in 0usize..500, seed in any::<u64>()) {
        let cfg = small_features();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let buffer = AudioBuffer::new(noise(&mut rng, 2600), 8000).unwrap();
        let seg = EventSegment::from_span(offset, offset + len - 1, 8000);
        let a = event_features(&buffer, &seg, &cfg, 1).unwrap();
        let b = event_features(&buffer, &seg, &cfg, 1).unwrap();
        prop_assert_eq!(a.values.len(), cfg.dim());
        prop_assert!(a.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert_eq!(a, b);
    }
}

#[test]
fn scoring_keeps_order_and_duplicates() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let set: Vec<FeatureTensor> = (0..5)
        .map(|i| FeatureTensor::new(noise(&mut rng, 12), 3, 4, 10 + i).unwrap())
        .collect();
    let s = fit_standardizer(&set).unwrap();
    let model = init_model(&[12, 12, 12], 1).unwrap();
    assert!(score_events(&model, &s, &[]).unwrap().is_empty());
    let twice = vec![set[2].clone(), set[0].clone(), set[2].clone()];
    let scores = score_events(&model, &s, &twice).unwrap();
    assert_eq!(scores.iter().map(|p| p.0).collect::<Vec<_>>(), vec![12, 10, 12]);
    assert_eq!(scores[0].1.to_bits(), scores[2].1.to_bits());
    assert!(scores.iter().all(|p| p.1 >= 0.0));
}

#[test]
fn held_out_normal_scores_below_anomalous() {
    let spec = CorpusSpec {
        duration_s: 45.0,
        recordings_per_label: 2,
        events_per_recording: 8.0,
        gusts_per_recording: 2.0,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).unwrap().into_corpus();
    let config = PipelineConfig {
        features: small_features(),
        train: TrainConfig {
            epochs: 60,
            ..TrainConfig::default()
        },
        split: SplitConfig::default(),
        ..PipelineConfig::default()
    };
    let processed: Vec<_> = corpus
        .recordings
        .iter()
        .map(|r| process_recording(r, &config, Condition::NoiseReduced).unwrap())
        .collect();
    let split = split_events(&corpus, &processed, &config.split).unwrap();
    let scorer = train_scorer(&processed, &split, &config).unwrap();
    let scored = score_refs(&corpus, &processed, &scorer, &split.scored).unwrap();
    let normal: Vec<f64> = scored.iter().filter(|s| s.label.is_normal()).map(|s| s.mse).collect();
    let anomalous: Vec<f64> = scored.iter().filter(|s| !s.label.is_normal()).map(|s| s.mse).collect();
    assert!(!normal.is_empty() && !anomalous.is_empty());
    let (mn, ma) = (median(&normal).unwrap(), median(&anomalous).unwrap());
    assert!(mn < ma, "normal median {mn} vs anomalous {ma}");
}
