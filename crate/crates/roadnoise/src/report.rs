//! Text tables and CSV dumps of pipeline results.

use std::fmt::Write as _;
use std::path::Path;

use roadnoise_core::autoencoder::EpochLoss;
use roadnoise_core::dsp::Spectrum;
use roadnoise_core::eval::RocPoint;
use roadnoise_core::extract::EventSegment;
use roadnoise_core::pipeline::{Condition, EvaluationReport, ScoredEvent};

use crate::error::Result;
use crate::files::{num, CsvWriter};

fn opt_auroc(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |a| format!("{a:.5}"))
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Extraction accuracy and AUROC tables, one column per condition.
pub fn render_tables(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let cols = [Condition::Original, Condition::NoiseReduced];
    let conds: Vec<_> = cols.iter().map(|c| report.condition(*c)).collect();
    let _ = writeln!(
        out,
        "Event extraction ({} recordings, corpus {})",
        report.recordings, report.corpus_id
    );
    let _ = writeln!(out, "{:<18}{:>14}{:>16}", "", "Original", "Noise reduced");
    let rows: [(&str, fn(&roadnoise_core::pipeline::ExtractionCounts) -> String); 5] = [
        ("Extracted events", |e| e.extracted_count.to_string()),
        ("Driving events", |e| e.driving_count.to_string()),
        ("Other events", |e| e.other_count.to_string()),
        ("Missed events", |e| e.missed_count.to_string()),
        ("Driving ratio", |e| {
            e.driving_ratio
                .map_or_else(|| "n/a".into(), |r| format!("{:.1}%", 100.0 * r))
        }),
    ];
    for (name, cell) in rows {
        let vals: Vec<String> = conds
            .iter()
            .map(|c| c.map_or_else(|| "n/a".into(), |c| cell(&c.extraction)))
            .collect();
        let _ = writeln!(out, "{:<18}{:>14}{:>16}", name, vals[0], vals[1]);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Anomaly detection AUROC (config {})", report.config_hash);
    let _ = writeln!(
        out,
        "{:<18}{:>14}{:>16}{:>14}",
        "", "Original", "Noise reduced", "Improvement"
    );
    for imp in &report.improvements {
        let pct = imp.percent.map_or_else(|| "n/a".into(), |p| format!("{p:+}%"));
        let _ = writeln!(
            out,
            "{:<18}{:>14}{:>16}{:>14}",
            capitalize(&imp.scenario),
            opt_auroc(imp.original),
            opt_auroc(imp.noise_reduced),
            pct
        );
    }
    out
}

pub fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    let mut w = CsvWriter::create(path, &["fpr", "tpr", "threshold"])?;
    for p in points {
        w.row(&[num(p.fpr), num(p.tpr), num(p.threshold)])?;
    }
    w.finish()
}

pub fn write_events_csv(path: &Path, events: &[(&str, &EventSegment)]) -> Result<()> {
    let mut w = CsvWriter::create(
        path,
        &["recording_id", "start_s", "end_s", "peak_envelope", "mean_envelope"],
    )?;
    for (id, e) in events {
        w.row(&[
            id.to_string(),
            num(e.start_s),
            num(e.end_s),
            num(e.peak_envelope),
            num(e.mean_envelope),
        ])?;
    }
    w.finish()
}

pub fn write_scores_csv(path: &Path, scores: &[ScoredEvent]) -> Result<()> {
    let mut w = CsvWriter::create(
        path,
        &["recording_id", "label", "event_index", "start_s", "end_s", "mse"],
    )?;
    for s in scores {
        w.row(&[
            s.recording_id.clone(),
            s.label.to_string(),
            s.event_index.to_string(),
            num(s.start_s),
            num(s.end_s),
            num(s.mse),
        ])?;
    }
    w.finish()
}

pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let mut w = CsvWriter::create(path, &["bin_hz", "magnitude"])?;
    for (k, m) in spectrum.bin_magnitudes.iter().enumerate() {
        w.row(&[num(spectrum.bin_hz(k)), num(*m)])?;
    }
    w.finish()
}

pub fn write_loss_csv(path: &Path, history: &[EpochLoss]) -> Result<()> {
    let mut w = CsvWriter::create(path, &["epoch", "train_loss", "val_loss"])?;
    for h in history {
        w.row(&[
            h.epoch.to_string(),
            num(h.train_loss),
            h.val_loss.map(num).unwrap_or_default(),
        ])?;
    }
    w.finish()
}
