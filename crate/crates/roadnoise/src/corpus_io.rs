//! Corpus directories: `<label>/<recording_id>.wav`, `ground_truth.json`
//! and `corpus_spec.json`.
//!
//! Without `ground_truth.json` a directory is still loadable: every WAV in
//! a label folder becomes a recording of that label, with no event truth.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use roadnoise_core::eval::SurfaceLabel;
use roadnoise_core::extract::EventSegment;
use roadnoise_core::pipeline::{Corpus, Recording};
use roadnoise_core::synth::{ContaminantKind, CorpusSpec, SyntheticCorpus};
use roadnoise_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::files::{read_json, stable_hash, write_json};
use crate::wav::{read_wav, write_wav};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const CORPUS_SPEC_FILE: &str = "corpus_spec.json";

/// Inclusive sample span with its time extent; `end_s` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
    pub start_sample: usize,
    pub end_sample: usize,
}

impl From<&EventSegment> for Span {
    fn from(e: &EventSegment) -> Self {
        Self {
            start_s: e.start_s,
            end_s: e.end_s,
            start_sample: e.start_sample,
            end_sample: e.end_sample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminantSpan {
    pub kind: ContaminantKind,
    pub start_s: f64,
    pub end_s: f64,
    pub start_sample: usize,
    pub end_sample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingTruth {
    pub id: String,
    pub label: SurfaceLabel,
    /// Path relative to the corpus directory, `/`-separated.
    pub file: String,
    pub events: Vec<Span>,
    pub contaminants: Vec<ContaminantSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub corpus_id: String,
    pub spec_hash: String,
    pub sample_rate_hz: u32,
    pub recordings: Vec<RecordingTruth>,
}

fn relative_file(label: SurfaceLabel, id: &str) -> String {
    format!("{}/{id}.wav", label.as_str())
}

fn resolve(dir: &Path, relative: &str) -> PathBuf {
    relative.split('/').fold(dir.to_path_buf(), |p, part| p.join(part))
}

/// Writes a generated corpus under `dir`, creating it if needed.
pub fn write_corpus(dir: &Path, corpus: &SyntheticCorpus) -> Result<GroundTruthFile> {
    for label in SurfaceLabel::ALL {
        let sub = dir.join(label.as_str());
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    corpus
        .recordings
        .par_iter()
        .map(|r| write_wav(&r.audio, &resolve(dir, &relative_file(r.label, &r.id))))
        .collect::<Result<Vec<()>>>()?;
    let truth = GroundTruthFile {
        corpus_id: corpus.id(),
        spec_hash: stable_hash(&corpus.spec),
        sample_rate_hz: corpus.spec.sample_rate_hz,
        recordings: corpus
            .recordings
            .iter()
            .map(|r| RecordingTruth {
                id: r.id.clone(),
                label: r.label,
                file: relative_file(r.label, &r.id),
                events: r.events.iter().map(Span::from).collect(),
                contaminants: r
                    .contaminants
                    .iter()
                    .map(|c| ContaminantSpan {
                        kind: c.kind,
                        start_s: c.span.start_s,
                        end_s: c.span.end_s,
                        start_sample: c.span.start_sample,
                        end_sample: c.span.end_sample,
                    })
                    .collect(),
            })
            .collect(),
    };
    write_json(&dir.join(CORPUS_SPEC_FILE), &corpus.spec)?;
    write_json(&dir.join(GROUND_TRUTH_FILE), &truth)?;
    Ok(truth)
}

pub fn read_corpus_spec(dir: &Path) -> Result<CorpusSpec> {
    read_json(&dir.join(CORPUS_SPEC_FILE))
}

/// Loads a corpus directory, reading recordings in parallel on the current
/// rayon pool.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let corpus = if gt_path.is_file() {
        load_with_truth(dir, &read_json(&gt_path)?)?
    } else {
        load_label_folders(dir)?
    };
    corpus.validate()?;
    Ok(corpus)
}

fn load_with_truth(dir: &Path, truth: &GroundTruthFile) -> Result<Corpus> {
    let recordings = truth
        .recordings
        .par_iter()
        .map(|rt| {
            let path = resolve(dir, &rt.file);
            let audio = read_wav(&path)?;
            if audio.sample_rate_hz() != truth.sample_rate_hz {
                return Err(CoreError::InvalidCorpus(format!(
                    "{} is at {} Hz but the ground truth declares {} Hz",
                    rt.file,
                    audio.sample_rate_hz(),
                    truth.sample_rate_hz
                ))
                .into());
            }
            let events = rt
                .events
                .iter()
                .map(|s| {
                    if s.start_sample > s.end_sample || s.end_sample >= audio.len() {
                        return Err(CoreError::InvalidCorpus(format!(
                            "{}: event span [{}, {}] lies outside the recording",
                            rt.id, s.start_sample, s.end_sample
                        )));
                    }
                    Ok(EventSegment::from_span(
                        s.start_sample,
                        s.end_sample,
                        audio.sample_rate_hz(),
                    ))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(Recording {
                id: rt.id.clone(),
                label: rt.label,
                audio,
                truth: Some(events),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        id: truth.corpus_id.clone(),
        recordings,
    })
}

fn load_label_folders(dir: &Path) -> Result<Corpus> {
    let mut files: Vec<(SurfaceLabel, String, PathBuf)> = Vec::new();
    for label in SurfaceLabel::ALL {
        let sub = dir.join(label.as_str());
        if !sub.is_dir() {
            continue;
        }
        let mut found = Vec::new();
        for entry in fs::read_dir(&sub).map_err(|e| Error::io(&sub, e))? {
            let path = entry.map_err(|e| Error::io(&sub, e))?.path();
            let is_wav = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav"));
            if is_wav && path.is_file() {
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                found.push((label, id, path));
            }
        }
        found.sort_by(|a, b| a.1.cmp(&b.1));
        files.extend(found);
    }
    if files.is_empty() {
        return Err(CoreError::InvalidCorpus(format!(
            "{} holds no {GROUND_TRUTH_FILE} and no WAV files in label folders",
            dir.display()
        ))
        .into());
    }
    let loaded = files
        .par_iter()
        .map(|(label, id, path)| {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
            let recording = Recording {
                id: id.clone(),
                label: *label,
                audio: read_wav(path)?,
                truth: None,
            };
            Ok((recording, (label.as_str(), id.as_str(), digest)))
        })
        .collect::<Result<Vec<_>>>()?;
    let fingerprint: Vec<_> = loaded.iter().map(|(_, f)| f.clone()).collect();
    let id = format!("dir-{}", stable_hash(&fingerprint));
    Ok(Corpus {
        id,
        recordings: loaded.into_iter().map(|(r, _)| r).collect(),
    })
}
