//! Parallel drivers over the core pipeline. Results are identical to the
//! sequential core functions: recordings are processed independently and
//! collected in corpus order, and each training run stays on one thread.

use rayon::prelude::*;
use roadnoise_core::pipeline::{
    assemble_report, evaluate_condition, process_recording, Condition, ConditionReport, Corpus, EvaluationReport,
    ProcessedRecording,
};
use roadnoise_core::PipelineConfig;

use crate::error::{Error, Result};

/// Runs `f` on a pool of `jobs` threads; 0 picks rayon's default.
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Core(roadnoise_core::Error::InvalidArgument(format!("thread pool: {e}"))))?;
    pool.install(f)
}

pub fn process_corpus(
    corpus: &Corpus,
    config: &PipelineConfig,
    condition: Condition,
) -> Result<Vec<ProcessedRecording>> {
    Ok(corpus
        .recordings
        .par_iter()
        .map(|r| process_recording(r, config, condition))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

fn run_condition(corpus: &Corpus, config: &PipelineConfig, condition: Condition) -> Result<ConditionReport> {
    let processed = process_corpus(corpus, config, condition)?;
    log::info!(
        "{condition}: extracted {} events",
        processed.iter().map(|p| p.events.len()).sum::<usize>()
    );
    let report = evaluate_condition(corpus, &processed, config, condition)?;
    log::info!("{condition}: trained and scored {} events", report.scores.len());
    Ok(report)
}

/// Both conditions run concurrently on the current pool.
pub fn build_report(corpus: &Corpus, config: &PipelineConfig, config_hash: &str) -> Result<EvaluationReport> {
    config.validate()?;
    corpus.validate()?;
    let (original, noise_reduced) = rayon::join(
        || run_condition(corpus, config, Condition::Original),
        || run_condition(corpus, config, Condition::NoiseReduced),
    );
    Ok(assemble_report(corpus, config_hash, original?, noise_reduced?)?)
}
