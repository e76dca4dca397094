//! End-to-end evaluation: extraction accuracy and scenario AUROC, with and
//! without band-pass noise reduction.
//!
//! Work is split in two stages so callers can parallelise the first:
//! [`process_recording`] is independent per recording, and
//! [`evaluate_condition`] trains and scores on the collected results.

use alloc::borrow::Cow;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::autoencoder::{self, AutoencoderModel, EpochLoss};
use crate::config::{PipelineConfig, SplitConfig};
use crate::dsp;
use crate::error::{Error, Result};
use crate::eval::{self, improvement_percent, MatchCounts, SurfaceLabel};
use crate::extract::{self, EventSegment};
use crate::features::{fit_standardizer, FeatureExtractor, FeatureTensor, Standardizer};
use crate::stats;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub label: SurfaceLabel,
    pub audio: AudioBuffer,
    /// Ground-truth driving events, when known.
    pub truth: Option<Vec<EventSegment>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub id: String,
    pub recordings: Vec<Recording>,
}

impl Corpus {
    /// Checks the corpus is nonempty and uses a single sample rate, which is
    /// returned.
    pub fn validate(&self) -> Result<u32> {
        let first = self
            .recordings
            .first()
            .ok_or_else(|| Error::InvalidCorpus("corpus has no recordings".into()))?;
        let rate = first.audio.sample_rate_hz();
        if let Some(r) = self.recordings.iter().find(|r| r.audio.sample_rate_hz() != rate) {
            return Err(Error::InvalidCorpus(format!(
                "recording {} is at {} Hz but {} is at {rate} Hz",
                r.id,
                r.audio.sample_rate_hz(),
                first.id
            )));
        }
        for r in &self.recordings {
            if let Some(t) = &r.truth {
                if !extract::is_sorted_disjoint(t) {
                    return Err(Error::InvalidCorpus(format!(
                        "ground truth of {} is not sorted and disjoint",
                        r.id
                    )));
                }
            }
        }
        Ok(rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Original,
    NoiseReduced,
}

impl Condition {
    pub const BOTH: [Condition; 2] = [Condition::Original, Condition::NoiseReduced];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Original => "original",
            Condition::NoiseReduced => "noise_reduced",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Audio as seen under a condition.
pub fn condition_audio<'a>(
    audio: &'a AudioBuffer,
    config: &PipelineConfig,
    condition: Condition,
) -> Result<Cow<'a, AudioBuffer>> {
    match condition {
        Condition::Original => Ok(Cow::Borrowed(audio)),
        Condition::NoiseReduced => Ok(Cow::Owned(dsp::band_pass(audio, &config.band)?)),
    }
}

/// Per-recording output of the extraction and feature stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedRecording {
    pub events: Vec<EventSegment>,
    pub tensors: Vec<FeatureTensor>,
    pub matches: Option<MatchCounts>,
}

pub fn process_recording(
    recording: &Recording,
    config: &PipelineConfig,
    condition: Condition,
) -> Result<ProcessedRecording> {
    let audio = condition_audio(&recording.audio, config, condition)?;
    let events = extract::extract_events(&audio, &config.extraction)?;
    let mut extractor = FeatureExtractor::new(config.features)?;
    let tensors = events
        .iter()
        .enumerate()
        .map(|(i, e)| extractor.extract(&audio, e, i))
        .collect::<Result<Vec<_>>>()?;
    let matches = match &recording.truth {
        Some(truth) => Some(eval::match_events(&events, truth, config.iou_min)?),
        None => None,
    };
    Ok(ProcessedRecording {
        events,
        tensors,
        matches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionCounts {
    pub extracted_count: usize,
    /// Whether every recording carried ground truth; the matched counts
    /// below are zero otherwise.
    pub ground_truth: bool,
    pub truth_count: usize,
    pub driving_count: usize,
    pub other_count: usize,
    pub missed_count: usize,
    /// `driving_count / extracted_count`, absent when nothing was extracted
    /// or truth is unavailable.
    pub driving_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub held_out_normal: usize,
    pub anomalous: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSummary {
    pub dims: Vec<usize>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub history: Vec<EpochLoss>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AurocStatus {
    Ok,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub status: AurocStatus,
    pub normal_count: usize,
    pub anomalous_count: usize,
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredEvent {
    pub recording_id: String,
    pub label: SurfaceLabel,
    pub event_index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionReport {
    pub condition: Condition,
    pub extraction: ExtractionCounts,
    pub split: SplitCounts,
    pub training: Option<TrainingSummary>,
    pub scenarios: Vec<ScenarioOutcome>,
    /// Interquartile range of held-out normal scores.
    pub normal_mse_iqr: Option<f64>,
    pub scores: Vec<ScoredEvent>,
}

impl ConditionReport {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioOutcome> {
        self.scenarios.iter().find(|s| s.scenario == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Improvement {
    pub scenario: String,
    pub original: Option<f64>,
    pub noise_reduced: Option<f64>,
    pub absolute: Option<f64>,
    /// `round((after - before) / before * 100)`.
    pub percent: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub corpus_id: String,
    pub config_hash: String,
    pub recordings: usize,
    pub sample_rate_hz: u32,
    pub conditions: Vec<ConditionReport>,
    pub improvements: Vec<Improvement>,
}

impl EvaluationReport {
    pub fn condition(&self, condition: Condition) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == condition)
    }
}

/// Position of an extracted event: `processed[recording].events[event]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRef {
    pub recording: usize,
    pub event: usize,
}

/// Division of extracted events between training, validation and scoring.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventSplit {
    pub train: Vec<EventRef>,
    pub validation: Vec<EventRef>,
    /// Held-out normal events and every event of an anomalous recording,
    /// in corpus order.
    pub scored: Vec<EventRef>,
}

/// Walks normal events in corpus order: every `test_every`-th is held out
/// for scoring and every `val_every`-th of the remainder validates. Events
/// of anomalous recordings are always scored.
pub fn split_events(corpus: &Corpus, processed: &[ProcessedRecording], split: &SplitConfig) -> Result<EventSplit> {
    check_processed(corpus, processed)?;
    let mut out = EventSplit::default();
    let mut normal_seen = 0usize;
    let mut pool_seen = 0usize;
    for (ri, (rec, proc_)) in corpus.recordings.iter().zip(processed).enumerate() {
        for ei in 0..proc_.events.len() {
            let r = EventRef {
                recording: ri,
                event: ei,
            };
            if !rec.label.is_normal() {
                out.scored.push(r);
                continue;
            }
            let k = normal_seen;
            normal_seen += 1;
            if k % split.test_every == split.test_every - 1 {
                out.scored.push(r);
                continue;
            }
            let j = pool_seen;
            pool_seen += 1;
            if j % split.val_every == split.val_every - 1 {
                out.validation.push(r);
            } else {
                out.train.push(r);
            }
        }
    }
    Ok(out)
}

fn check_processed(corpus: &Corpus, processed: &[ProcessedRecording]) -> Result<()> {
    if processed.len() != corpus.recordings.len() {
        return Err(Error::InvalidArgument(format!(
            "{} processed recordings for a corpus of {}",
            processed.len(),
            corpus.recordings.len()
        )));
    }
    Ok(())
}

fn gather(processed: &[ProcessedRecording], refs: &[EventRef]) -> Vec<FeatureTensor> {
    refs.iter()
        .map(|r| processed[r.recording].tensors[r.event].clone())
        .collect()
}

/// A trained model with the standardizer fitted on its training split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedScorer {
    pub model: AutoencoderModel,
    pub standardizer: Standardizer,
    pub summary: TrainingSummary,
}

/// Fits the standardizer on the training split, then initialises and
/// trains the autoencoder. Fails with insufficient-data when the training
/// split is empty.
pub fn train_scorer(
    processed: &[ProcessedRecording],
    split: &EventSplit,
    config: &PipelineConfig,
) -> Result<TrainedScorer> {
    if split.train.is_empty() {
        return Err(Error::InsufficientData("no normal events to train on".into()));
    }
    let train_raw = gather(processed, &split.train);
    let standardizer = fit_standardizer(&train_raw)?;
    let standardize = |set: Vec<FeatureTensor>| set.iter().map(|t| standardizer.apply(t)).collect::<Result<Vec<_>>>();
    let train_set = standardize(train_raw)?;
    let val_set = standardize(gather(processed, &split.validation))?;
    let dims = config.model.dims(config.features.dim());
    let model = autoencoder::init_model(&dims, config.train.seed)?;
    let outcome = autoencoder::train(model, &train_set, &val_set, &config.train)?;
    Ok(TrainedScorer {
        model: outcome.model,
        standardizer,
        summary: TrainingSummary {
            dims,
            epochs_run: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            stopped_early: outcome.stopped_early,
            history: outcome.history,
        },
    })
}

/// Scores the referenced events with a trained scorer.
pub fn score_refs(
    corpus: &Corpus,
    processed: &[ProcessedRecording],
    scorer: &TrainedScorer,
    refs: &[EventRef],
) -> Result<Vec<ScoredEvent>> {
    check_processed(corpus, processed)?;
    let tensors = gather(processed, refs);
    let mse = autoencoder::score_events(&scorer.model, &scorer.standardizer, &tensors)?;
    Ok(refs
        .iter()
        .zip(mse)
        .map(|(r, (_, m))| {
            let rec = &corpus.recordings[r.recording];
            let ev = &processed[r.recording].events[r.event];
            ScoredEvent {
                recording_id: rec.id.clone(),
                label: rec.label,
                event_index: r.event,
                start_s: ev.start_s,
                end_s: ev.end_s,
                mse: m,
            }
        })
        .collect())
}

/// Trains on the normal split of `processed` and scores everything else.
///
/// `processed[i]` must come from `corpus.recordings[i]` under `condition`.
pub fn evaluate_condition(
    corpus: &Corpus,
    processed: &[ProcessedRecording],
    config: &PipelineConfig,
    condition: Condition,
) -> Result<ConditionReport> {
    let split = split_events(corpus, processed, &config.split)?;
    let extraction = extraction_counts(corpus, processed);
    let held_out_normal = split
        .scored
        .iter()
        .filter(|r| corpus.recordings[r.recording].label.is_normal())
        .count();
    let split_counts = SplitCounts {
        train: split.train.len(),
        validation: split.validation.len(),
        held_out_normal,
        anomalous: split.scored.len() - held_out_normal,
    };

    let (training, scores) = if split.train.is_empty() {
        (None, Vec::new())
    } else {
        let scorer = train_scorer(processed, &split, config)?;
        let scores = score_refs(corpus, processed, &scorer, &split.scored)?;
        (Some(scorer.summary), scores)
    };

    let labelled: Vec<(SurfaceLabel, f64)> = scores.iter().map(|s| (s.label, s.mse)).collect();
    let scenarios = config
        .scenarios
        .iter()
        .map(|sc| {
            let (normal, anomalous) = eval::partition(&labelled, sc);
            let auroc = match eval::run_scenario(&labelled, sc) {
                Ok(v) => Some(v),
                Err(Error::InsufficientData(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ScenarioOutcome {
                scenario: sc.name.clone(),
                status: if auroc.is_some() {
                    AurocStatus::Ok
                } else {
                    AurocStatus::InsufficientData
                },
                normal_count: normal.len(),
                anomalous_count: anomalous.len(),
                auroc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let normal_scores: Vec<f64> = scores.iter().filter(|s| s.label.is_normal()).map(|s| s.mse).collect();

    Ok(ConditionReport {
        condition,
        extraction,
        split: split_counts,
        training,
        scenarios,
        normal_mse_iqr: stats::iqr(&normal_scores),
        scores,
    })
}

fn extraction_counts(corpus: &Corpus, processed: &[ProcessedRecording]) -> ExtractionCounts {
    let extracted_count = processed.iter().map(|p| p.events.len()).sum();
    let ground_truth = processed.iter().all(|p| p.matches.is_some());
    let mut totals = MatchCounts::default();
    let mut truth_count = 0;
    if ground_truth {
        for (rec, p) in corpus.recordings.iter().zip(processed) {
            let m = p.matches.unwrap_or_default();
            totals.driving_count += m.driving_count;
            totals.other_count += m.other_count;
            totals.missed_count += m.missed_count;
            truth_count += rec.truth.as_ref().map_or(0, Vec::len);
        }
    }
    let driving_ratio =
        (ground_truth && extracted_count > 0).then(|| totals.driving_count as f64 / extracted_count as f64);
    ExtractionCounts {
        extracted_count,
        ground_truth,
        truth_count,
        driving_count: totals.driving_count,
        other_count: totals.other_count,
        missed_count: totals.missed_count,
        driving_ratio,
    }
}

/// Combines the two condition reports and computes per-scenario
/// improvements.
pub fn assemble_report(
    corpus: &Corpus,
    config_hash: &str,
    original: ConditionReport,
    noise_reduced: ConditionReport,
) -> Result<EvaluationReport> {
    let sample_rate_hz = corpus.validate()?;
    let improvements = original
        .scenarios
        .iter()
        .map(|o| {
            let after = noise_reduced.scenario(&o.scenario).and_then(|s| s.auroc);
            let before = o.auroc;
            Improvement {
                scenario: o.scenario.clone(),
                original: before,
                noise_reduced: after,
                absolute: before.zip(after).map(|(b, a)| a - b),
                percent: before.zip(after).and_then(|(b, a)| improvement_percent(b, a)),
            }
        })
        .collect();
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        corpus_id: corpus.id.clone(),
        config_hash: config_hash.into(),
        recordings: corpus.recordings.len(),
        sample_rate_hz,
        conditions: alloc::vec![original, noise_reduced],
        improvements,
    })
}

/// Runs both conditions sequentially and assembles the report.
pub fn build_report(corpus: &Corpus, config: &PipelineConfig, config_hash: &str) -> Result<EvaluationReport> {
    config.validate()?;
    corpus.validate()?;
    let mut reports = Vec::with_capacity(2);
    for condition in Condition::BOTH {
        let processed = corpus
            .recordings
            .iter()
            .map(|r| process_recording(r, config, condition))
            .collect::<Result<Vec<_>>>()?;
        reports.push(evaluate_condition(corpus, &processed, config, condition)?);
    }
    let noise_reduced = reports.pop().unwrap();
    let original = reports.pop().unwrap();
    assemble_report(corpus, config_hash, original, noise_reduced)
}
