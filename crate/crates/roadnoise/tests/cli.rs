use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use roadnoise::corpus_io::{load_corpus, GroundTruthFile};
use roadnoise::files::{config_hash, meta_path, read_json, write_json, ArtifactMeta};
use roadnoise::model_io::load_model;
use roadnoise::run_command;
use roadnoise::tensor_io::read_tensors;
use roadnoise::wav::{read_wav, write_wav};
use roadnoise_core::autoencoder::TrainConfig;
use roadnoise_core::features::FeatureConfig;
use roadnoise_core::pipeline::{Condition, EvaluationReport};
use roadnoise_core::synth::CorpusSpec;
use roadnoise_core::{AudioBuffer, PipelineConfig};

fn run(args: &[&str]) -> i32 {
    run_command(std::iter::once("roadnoise").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_spec() -> CorpusSpec {
    CorpusSpec {
        duration_s: 20.0,
        recordings_per_label: 1,
        events_per_recording: 4.0,
        gusts_per_recording: 1.0,
        ..CorpusSpec::default()
    }
}

fn small_config() -> PipelineConfig {
    PipelineConfig {
        features: FeatureConfig {
            frames: 8,
            bins: 16,
            frame_size: 64,
            hop: 32,
        },
        train: TrainConfig {
            epochs: 8,
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    }
}

/// Writes the small spec and config into `dir` and synthesises a corpus.
fn setup(dir: &Path) -> (PathBuf, PathBuf) {
    let spec = dir.join("spec.json");
    write_json(&spec, &small_spec()).unwrap();
    let config = dir.join("config.json");
    write_json(&config, &small_config()).unwrap();
    let corpus = dir.join("corpus");
    assert_eq!(run(&["synth", "--spec", s(&spec), "--out", s(&corpus)]), 0);
    (corpus, config)
}

fn meta(artifact: &Path) -> ArtifactMeta {
    read_json(&meta_path(artifact)).unwrap()
}

#[test]
fn synth_writes_a_reproducible_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = setup(dir.path());
    let truth: GroundTruthFile = read_json(&corpus.join("ground_truth.json")).unwrap();
    assert_eq!(truth.recordings.len(), 4);
    assert_eq!(truth.corpus_id, "synth-seed42");
    for r in &truth.recordings {
        assert!(corpus.join(&r.file).is_file(), "{}", r.file);
        assert!(r.file.starts_with(&format!("{}/", r.label)));
        for w in r.events.windows(2) {
            assert!(w[0].end_sample < w[1].start_sample);
        }
    }
    let spec: CorpusSpec = read_json(&corpus.join("corpus_spec.json")).unwrap();
    assert_eq!(spec, small_spec());

    let again = dir.path().join("again");
    assert_eq!(
        run(&["synth", "--spec", s(&dir.path().join("spec.json")), "--out", s(&again)]),
        0
    );
    for r in &truth.recordings {
        assert_eq!(
            fs::read(corpus.join(&r.file)).unwrap(),
            fs::read(again.join(&r.file)).unwrap()
        );
    }
    assert_eq!(
        fs::read(corpus.join("ground_truth.json")).unwrap(),
        fs::read(again.join("ground_truth.json")).unwrap()
    );

    // the loaded corpus matches the generated one sample for sample
    let loaded = load_corpus(&corpus).unwrap();
    let generated = roadnoise_core::synth::generate_corpus(&small_spec())
        .unwrap()
        .into_corpus();
    assert_eq!(loaded, generated);

    let other = dir.path().join("other");
    assert_eq!(
        run(&[
            "synth",
            "--spec",
            s(&dir.path().join("spec.json")),
            "--out",
            s(&other),
            "--seed",
            "7"
        ]),
        0
    );
    let t: GroundTruthFile = read_json(&other.join("ground_truth.json")).unwrap();
    assert_eq!(t.corpus_id, "synth-seed7");
}

#[test]
fn filter_is_idempotent_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = setup(dir.path());
    let input = corpus.join("dry").join("dry_000.wav");
    let before = fs::read(&input).unwrap();
    let once = dir.path().join("once.wav");
    let twice = dir.path().join("twice.wav");
    assert_eq!(run(&["filter", "--in", s(&input), "--out", s(&once)]), 0);
    assert_eq!(run(&["filter", "--in", s(&once), "--out", s(&twice)]), 0);
    assert_eq!(fs::read(&once).unwrap(), fs::read(&twice).unwrap());
    assert_eq!(fs::read(&input).unwrap(), before, "input was modified");
    let m = meta(&once);
    assert_eq!(m.command, "filter");
    assert_eq!(m.config_hash, config_hash(&PipelineConfig::default()));

    // an explicit band changes the output and the stamped hash
    let narrow = dir.path().join("narrow.wav");
    assert_eq!(
        run(&["filter", "--in", s(&input), "--out", s(&narrow), "--band", "0.01,0.5"]),
        0
    );
    assert_ne!(fs::read(&narrow).unwrap(), fs::read(&once).unwrap());
    assert_ne!(meta(&narrow).config_hash, m.config_hash);
    assert_eq!(read_wav(&narrow).unwrap().len(), read_wav(&input).unwrap().len());
}

#[test]
fn extract_on_silence_writes_only_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        duration_s: 5.0,
        recordings_per_label: 1,
        events_per_recording: 0.0,
        contaminants: false,
        ..CorpusSpec::default()
    };
    let spec_path = dir.path().join("silent.json");
    write_json(&spec_path, &spec).unwrap();
    let corpus = dir.path().join("silent");
    assert_eq!(run(&["synth", "--spec", s(&spec_path), "--out", s(&corpus)]), 0);
    let out = dir.path().join("events.csv");
    let wav = corpus.join("wet").join("wet_000.wav");
    assert_eq!(run(&["extract", "--in", s(&wav), "--out", s(&out)]), 0);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "recording_id,start_s,end_s,peak_envelope,mean_envelope\n"
    );
    assert_eq!(meta(&out).command, "extract");
}

#[test]
fn extract_finds_the_generated_events() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, config) = setup(dir.path());
    let truth: GroundTruthFile = read_json(&corpus.join("ground_truth.json")).unwrap();
    let rec = &truth.recordings[0];
    let out = dir.path().join("events.csv");
    assert_eq!(
        run(&[
            "extract",
            "--in",
            s(&corpus.join(&rec.file)),
            "--out",
            s(&out),
            "--config",
            s(&config),
            "--id",
            "r0"
        ]),
        0
    );
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows.len() >= rec.events.len(), "{text}");
    assert!(rows.iter().all(|r| r.starts_with("r0,")));
    assert_eq!(meta(&out).config_hash, config_hash(&small_config()));
}

#[test]
fn features_train_and_score_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, config) = setup(dir.path());
    let tensors = dir.path().join("tensors.bin");
    assert_eq!(
        run(&[
            "features",
            "--corpus",
            s(&corpus),
            "--out",
            s(&tensors),
            "--config",
            s(&config)
        ]),
        0
    );
    let (set, sidecar) = read_tensors(&tensors).unwrap();
    assert_eq!(set.len(), sidecar.count);
    assert_eq!((sidecar.frames, sidecar.bins), (8, 16));
    assert_eq!(sidecar.condition, Condition::NoiseReduced.as_str());
    assert_eq!(sidecar.config_hash, config_hash(&small_config()));

    let model = dir.path().join("model.rnae");
    assert_eq!(
        run(&[
            "train",
            "--corpus",
            s(&corpus),
            "--model",
            s(&model),
            "--config",
            s(&config)
        ]),
        0
    );
    let saved = load_model(&model).unwrap();
    assert_eq!(saved.header.dims, vec![128, 128, 128, 128]);
    assert_eq!(saved.header.config_hash, config_hash(&small_config()));
    let loss = dir.path().join("model.rnae.loss.csv");
    let loss_text = fs::read_to_string(&loss).unwrap();
    assert!(loss_text.starts_with("epoch,train_loss,val_loss\n"));
    assert!(loss_text.lines().count() >= 2);
    assert_eq!(meta(&loss).command, "train");

    // retraining reproduces the model byte for byte
    let model2 = dir.path().join("model2.rnae");
    assert_eq!(
        run(&[
            "train",
            "--corpus",
            s(&corpus),
            "--model",
            s(&model2),
            "--config",
            s(&config)
        ]),
        0
    );
    assert_eq!(fs::read(&model).unwrap(), fs::read(&model2).unwrap());

    // a different seed gives a different model
    let model3 = dir.path().join("model3.rnae");
    assert_eq!(
        run(&[
            "train",
            "--corpus",
            s(&corpus),
            "--model",
            s(&model3),
            "--config",
            s(&config),
            "--seed",
            "5"
        ]),
        0
    );
    assert_ne!(fs::read(&model).unwrap(), fs::read(&model3).unwrap());

    let from_corpus = dir.path().join("scores_corpus.csv");
    let from_tensors = dir.path().join("scores_tensors.csv");
    assert_eq!(
        run(&[
            "score",
            "--corpus",
            s(&corpus),
            "--model",
            s(&model),
            "--out",
            s(&from_corpus)
        ]),
        0
    );
    assert_eq!(
        run(&[
            "score",
            "--tensors",
            s(&tensors),
            "--model",
            s(&model),
            "--out",
            s(&from_tensors)
        ]),
        0
    );
    let a = fs::read_to_string(&from_corpus).unwrap();
    assert_eq!(a, fs::read_to_string(&from_tensors).unwrap());
    assert!(a.starts_with("recording_id,label,event_index,start_s,end_s,mse\n"));
    assert_eq!(a.lines().count(), set.len() + 1);
    for line in a.lines().skip(1) {
        let mse: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(mse.is_finite() && mse >= 0.0);
    }
    assert_eq!(meta(&from_corpus).config_hash, config_hash(&small_config()));
}

#[test]
fn evaluate_writes_a_schema_conforming_report() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, config) = setup(dir.path());
    let report = dir.path().join("report.json");
    let roc = dir.path().join("roc");
    assert_eq!(
        run(&[
            "evaluate",
            "--corpus",
            s(&corpus),
            "--config",
            s(&config),
            "--report",
            s(&report),
            "--roc-dir",
            s(&roc)
        ]),
        0
    );
    let text = fs::read_to_string(&report).unwrap();
    let parsed: EvaluationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.corpus_id, "synth-seed42");
    assert_eq!(parsed.config_hash, config_hash(&small_config()));
    assert_eq!(parsed.recordings, 4);
    assert_eq!(parsed.conditions.len(), 2);
    for cond in &parsed.conditions {
        let e = &cond.extraction;
        assert_eq!(e.driving_count + e.other_count, e.extracted_count);
        if let Some(r) = e.driving_ratio {
            assert_eq!(r, e.driving_count as f64 / e.extracted_count as f64);
        }
        assert_eq!(cond.scenarios.len(), 2);
        for sc in &cond.scenarios {
            if let Some(a) = sc.auroc {
                assert!((0.0..=1.0).contains(&a));
            }
        }
    }
    assert_eq!(parsed.improvements.len(), 2);

    // the generic JSON shape: required keys only, nothing extra
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&str> = value.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in [
        "schema_version",
        "corpus_id",
        "config_hash",
        "conditions",
        "improvements",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }

    let rocs: Vec<_> = fs::read_dir(&roc)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert!(!rocs.is_empty());
    for name in rocs {
        let t = fs::read_to_string(roc.join(&name)).unwrap();
        assert!(t.starts_with("fpr,tpr,threshold\n"), "{name}");
    }
}

#[test]
fn evaluate_on_an_eventless_corpus_reports_insufficient_data() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        duration_s: 5.0,
        recordings_per_label: 1,
        events_per_recording: 0.0,
        contaminants: false,
        ..CorpusSpec::default()
    };
    let spec_path = dir.path().join("quiet.json");
    write_json(&spec_path, &spec).unwrap();
    let corpus = dir.path().join("quiet");
    assert_eq!(run(&["synth", "--spec", s(&spec_path), "--out", s(&corpus)]), 0);
    let report = dir.path().join("report.json");
    assert_eq!(run(&["evaluate", "--corpus", s(&corpus), "--report", s(&report)]), 0);
    let parsed: EvaluationReport = read_json(&report).unwrap();
    for cond in &parsed.conditions {
        assert_eq!(cond.extraction.extracted_count, 0);
        assert!(cond.training.is_none());
        for sc in &cond.scenarios {
            assert!(sc.auroc.is_none());
        }
    }
}

#[test]
fn spectrum_writes_bins() {
    let dir = tempfile::tempdir().unwrap();
    let rate = 8000;
    let tone: Vec<f64> = (0..8000)
        .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / rate as f64).sin() * 0.5)
        .collect();
    let wav = dir.path().join("tone.wav");
    write_wav(&AudioBuffer::new(tone, rate).unwrap(), &wav).unwrap();
    let out = dir.path().join("spectrum.csv");
    assert_eq!(
        run(&[
            "spectrum",
            "--in",
            s(&wav),
            "--out",
            s(&out),
            "--frame-size",
            "256",
            "--hop",
            "128"
        ]),
        0
    );
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 129);
    let peak = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(peak.0, 1000.0);
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_roadnoise"))
        .args(args)
        .env_remove("ROADNOISE_LOG")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        vec!["filter", "--bogus"],
        vec!["frobnicate"],
        vec!["filter", "--in", "a.wav"],
        vec!["filter", "--in", "a.wav", "--out", "b.wav", "--band", "0.5"],
        vec![],
    ] {
        let (code, _, err) = binary(&args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error[usage]: "), "{err}");
    }
    let (code, out, _) = binary(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("evaluate"));
}

#[test]
fn pipeline_errors_exit_with_1_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.wav");
    let out = dir.path().join("out.csv");
    let (code, _, err) = binary(&["extract", "--in", s(&missing), "--out", s(&out)]);
    assert_eq!(code, 1);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[io]: "), "{err}");
    assert!(!out.exists());

    let bad_config = dir.path().join("bad.json");
    fs::write(&bad_config, r#"{"iou_min": 0.0}"#).unwrap();
    let wav = dir.path().join("x.wav");
    write_wav(&AudioBuffer::new(vec![0.0; 4000], 8000).unwrap(), &wav).unwrap();
    let (code, _, err) = binary(&["extract", "--in", s(&wav), "--out", s(&out), "--config", s(&bad_config)]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[invalid-argument]: "), "{err}");

    let unknown_key = dir.path().join("unknown.json");
    fs::write(&unknown_key, r#"{"no_such_field": 1}"#).unwrap();
    let (code, _, err) = binary(&[
        "extract",
        "--in",
        s(&wav),
        "--out",
        s(&out),
        "--config",
        s(&unknown_key),
    ]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[json]: "), "{err}");
}
