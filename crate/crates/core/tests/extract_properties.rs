use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadnoise_core::dsp::smooth_envelope;
use roadnoise_core::extract::{
    compute_threshold, detect, extract_events, is_sorted_disjoint, segments_from_envelope, ExtractionConfig,
    ThresholdSource,
};
use roadnoise_core::AudioBuffer;

/// Quiet floor with a few noise bursts of random length and level.
fn bursty(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| 0.01 * (2.0 * rng.random::<f64>() - 1.0)).collect();
    for _ in 0..rng.random_range(1..6) {
        let len = rng.random_range(20..300);
        let start = rng.random_range(0..n - len);
        let level = rng.random_range(0.1..1.0);
        for v in &mut x[start..start + len] {
            *v += level * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    x
}

fn both_sources() -> [ExtractionConfig; 2] {
    [
        ExtractionConfig::default(),
        ExtractionConfig {
            threshold_source: ThresholdSource::Envelope,
            ..ExtractionConfig::default()
        },
    ]
}

#[test]
fn scale_equivariance_on_randomized_buffers() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let x = bursty(&mut rng, 3000);
        // log-uniform scale over six decades
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        for cfg in both_sources() {
            let a = extract_events(&AudioBuffer::new(x.clone(), 1000).unwrap(), &cfg).unwrap();
            let b = extract_events(&AudioBuffer::new(scaled.clone(), 1000).unwrap(), &cfg).unwrap();
            let spans = |v: &[roadnoise_core::extract::EventSegment]| {
                v.iter().map(|e| (e.start_sample, e.end_sample)).collect::<Vec<_>>()
            };
            assert_eq!(spans(&a), spans(&b), "c = {c}");
        }
    }
}

#[test]
fn segments_respect_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let buf = AudioBuffer::new(bursty(&mut rng, 4000), 1000).unwrap();
        for cfg in both_sources() {
            let d = detect(&buf, &cfg).unwrap();
            assert!(is_sorted_disjoint(&d.events));
            let min_len = cfg.min_duration_ms * 1000.0 / 1000.0;
            let merge = cfg.merge_gap_ms * 1000.0 / 1000.0;
            for e in &d.events {
                assert!(e.len_samples() as f64 >= min_len);
                let span = &d.envelope[e.start_sample..=e.end_sample];
                assert!(span[0] > d.threshold && span[span.len() - 1] > d.threshold);
                // sub-threshold holes left inside by merging
                let mut holes = Vec::new();
                let mut run = 0usize;
                for &v in span {
                    if v > d.threshold {
                        if run > 0 {
                            holes.push(run);
                        }
                        run = 0;
                    } else {
                        run += 1;
                    }
                }
                assert!(holes.iter().all(|&h| (h as f64) < merge), "{holes:?}");
                let below: usize = holes.iter().sum();
                if holes.len() <= 2 {
                    assert!(below as f64 <= 2.0 * merge);
                }
                assert!(e.peak_envelope >= e.mean_envelope);
                assert!(e.peak_envelope > d.threshold);
            }
        }
    }
}

proptest! {
    #![proptest_config(Config { cases: 64, rng_seed: RngSeed::Fixed(11), failure_persistence: None, ..Config::default() })]

    #[test]
    fn longer_min_duration_never_adds_events(seed in any::<u64>(), a in 1.0f64..200.0, b in 1.0f64..200.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let buf = AudioBuffer::new(bursty(&mut rng, 3000), 1000).unwrap();
        let (short, long) = if a <= b { (a, b) } else { (b, a) };
        for base in both_sources() {
            let n_short = extract_events(&buf, &ExtractionConfig { min_duration_ms: short, ..base }).unwrap().len();
            let n_long = extract_events(&buf, &ExtractionConfig { min_duration_ms: long, ..base }).unwrap().len();
            prop_assert!(n_long <= n_short);
        }
    }
}

#[test]
fn nearest_rank_examples() {
    let ten: Vec<f64> = (1..=10).map(f64::from).collect();
    assert_eq!(compute_threshold(&ten, 10.0).unwrap(), 1.0);
    assert_eq!(compute_threshold(&[5.0, 1.0, 3.0], 50.0).unwrap(), 3.0);
    for p in [0.5, 10.0, 50.0, 99.5] {
        assert_eq!(compute_threshold(&[0.25; 17], p).unwrap(), 0.25);
    }
    assert!(compute_threshold(&[], 10.0).is_err());
}

#[test]
fn hand_built_envelope_traces() {
    let cfg = ExtractionConfig::default();
    let burst = |ranges: &[(usize, usize)]| {
        let mut env = vec![0.0; 1000];
        for &(s, e) in ranges {
            env[s..=e].iter_mut().for_each(|v| *v = 1.0);
        }
        env
    };
    let one = segments_from_envelope(&burst(&[(100, 199)]), 0.5, 1000, &cfg);
    assert_eq!(one.len(), 1);
    assert_eq!((one[0].start_sample, one[0].end_sample), (100, 199));
    assert!(segments_from_envelope(&burst(&[(100, 129)]), 0.5, 1000, &cfg).is_empty());
    let merged = segments_from_envelope(&burst(&[(100, 159), (165, 224)]), 0.5, 1000, &cfg);
    assert_eq!(merged.len(), 1);
    assert_eq!((merged[0].start_sample, merged[0].end_sample), (100, 224));
}

#[test]
fn envelope_of_burst_buffer_yields_one_event() {
    let mut x = vec![0.0; 1000];
    x[400..500].iter_mut().for_each(|v| *v = 0.5);
    let buf = AudioBuffer::new(x, 1000).unwrap();
    let env = smooth_envelope(&buf, 25.0).unwrap();
    assert!(env.iter().all(|&v| v >= 0.0));
    for cfg in both_sources() {
        assert_eq!(extract_events(&buf, &cfg).unwrap().len(), 1);
    }
}
