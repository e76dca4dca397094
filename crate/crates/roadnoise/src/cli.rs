//! Command-line front end.
//!
//! Every command reads its inputs, writes its outputs and never touches the
//! inputs. Failures print one line, `error[<kind>]: <message>`, to stderr:
//! usage errors exit with 2 and pipeline errors with 1.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use roadnoise_core::autoencoder;
use roadnoise_core::dsp::{self, BandSpec};
use roadnoise_core::eval::{self, SurfaceLabel};
use roadnoise_core::extract;
use roadnoise_core::features::FeatureTensor;
use roadnoise_core::pipeline::{Condition, ProcessedRecording, ScoredEvent};
use roadnoise_core::synth::{generate_corpus, CorpusSpec};
use roadnoise_core::PipelineConfig;

use crate::corpus_io::{load_corpus, write_corpus};
use crate::error::{Error, Result};
use crate::files::{config_hash, load_config, read_json, stable_hash, write_json, write_meta, ArtifactMeta};
use crate::model_io::{load_model, save_model};
use crate::parallel::{build_report, process_corpus, with_pool};
use crate::report::{
    render_tables, write_events_csv, write_loss_csv, write_roc_csv, write_scores_csv, write_spectrum_csv,
};
use crate::tensor_io::{read_tensors, write_tensors, TensorEntry, TensorSidecar};
use crate::wav::{read_wav, write_wav};

/// Refinement passes allowed when snapping filtered audio to its grid.
const GRID_ITERATIONS: usize = 16;

#[derive(Debug, Parser)]
#[command(
    name = "roadnoise",
    version,
    about = "Roadside driving-noise event extraction and surface anomaly scoring"
)]
struct Cli {
    /// Worker threads for per-recording stages; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Pipeline configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the training seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut config = load_config(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            config.train.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus directory.
    Synth {
        /// Corpus spec JSON; defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the corpus seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Band-pass a WAV file.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Kept band as fractions of Nyquist, `low,high`.
        #[arg(long, value_parser = parse_band)]
        band: Option<BandSpec>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Detect driving events in a WAV file and write them as CSV.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Recording id written in the CSV; defaults to the file stem.
        #[arg(long)]
        id: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Extract feature tensors for every event of a corpus.
    Features {
        #[arg(long)]
        corpus: PathBuf,
        /// Tensor data file; the sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the autoencoder on the normal training split of a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score events of a corpus, or a tensor file, with a trained model.
    Score {
        #[arg(long, required_unless_present = "tensors", conflicts_with = "tensors")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        tensors: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline with and without noise reduction.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also write ROC points per condition and scenario into this directory.
        #[arg(long)]
        roc_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Time-averaged magnitude spectrum of a WAV file as CSV.
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1024)]
        frame_size: usize,
        #[arg(long, default_value_t = 512)]
        hop: usize,
    },
}

fn parse_band(s: &str) -> std::result::Result<BandSpec, String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| "expected `low,high`".to_string())?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("low fraction: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("high fraction: {e}"))?;
    BandSpec::new(lo, hi).map_err(|e| e.to_string())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROADNOISE_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("invalid usage")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return 2;
        }
    };
    let jobs = cli.jobs;
    match with_pool(jobs, move || execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), single_line(&e.to_string()));
            1
        }
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn condition_for(config: &PipelineConfig) -> Condition {
    if config.noise_reduction {
        Condition::NoiseReduced
    } else {
        Condition::Original
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth { spec, out, seed } => synth(spec.as_deref(), &out, seed),
        Command::Filter {
            input,
            out,
            band,
            config,
        } => filter(&input, &out, band, config.as_deref()),
        Command::Extract { input, out, id, config } => extract_cmd(&input, &out, id, &config.load()?),
        Command::Features { corpus, out, config } => features(&corpus, &out, &config.load()?),
        Command::Train { corpus, model, config } => train(&corpus, &model, &config.load()?),
        Command::Score {
            corpus,
            tensors,
            model,
            out,
        } => score(corpus.as_deref(), tensors.as_deref(), &model, &out),
        Command::Evaluate {
            corpus,
            report,
            roc_dir,
            config,
        } => evaluate(&corpus, &report, roc_dir.as_deref(), &config.load()?),
        Command::Spectrum {
            input,
            out,
            frame_size,
            hop,
        } => spectrum(&input, &out, frame_size, hop),
    }
}

fn synth(spec_path: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec: CorpusSpec = match spec_path {
        Some(p) => read_json(p)?,
        None => CorpusSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let corpus = generate_corpus(&spec)?;
    let truth = write_corpus(out, &corpus)?;
    log::info!(
        "wrote {} recordings with {} events to {}",
        truth.recordings.len(),
        truth.recordings.iter().map(|r| r.events.len()).sum::<usize>(),
        out.display()
    );
    Ok(())
}

fn filter(input: &Path, out: &Path, band: Option<BandSpec>, config: Option<&Path>) -> Result<()> {
    let mut config = load_config(config)?;
    if let Some(b) = band {
        config.band = b;
    }
    let audio = read_wav(input)?;
    let filtered = dsp::band_pass_on_grid(&audio, &config.band, GRID_ITERATIONS)?;
    if !filtered.converged {
        log::warn!("grid refinement did not settle after {GRID_ITERATIONS} passes");
    }
    write_wav(&filtered.buffer, out)?;
    write_meta(out, &ArtifactMeta::new("filter", &config_hash(&config)))
}

fn extract_cmd(input: &Path, out: &Path, id: Option<String>, config: &PipelineConfig) -> Result<()> {
    let audio = read_wav(input)?;
    let audio = roadnoise_core::pipeline::condition_audio(&audio, config, condition_for(config))?;
    let events = extract::extract_events(&audio, &config.extraction)?;
    let id = id.unwrap_or_else(|| {
        input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let rows: Vec<_> = events.iter().map(|e| (id.as_str(), e)).collect();
    write_events_csv(out, &rows)?;
    write_meta(out, &ArtifactMeta::new("extract", &config_hash(config)))
}

fn features(corpus_dir: &Path, out: &Path, config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(corpus_dir)?;
    let condition = condition_for(config);
    let processed = process_corpus(&corpus, config, condition)?;
    let mut tensors = Vec::new();
    let mut entries = Vec::new();
    for (rec, p) in corpus.recordings.iter().zip(&processed) {
        for (i, (e, t)) in p.events.iter().zip(&p.tensors).enumerate() {
            tensors.push(t.clone());
            entries.push(TensorEntry {
                recording_id: rec.id.clone(),
                label: rec.label,
                event_index: i,
                start_s: e.start_s,
                end_s: e.end_s,
            });
        }
    }
    let sidecar = TensorSidecar {
        frames: config.features.frames,
        bins: config.features.bins,
        count: tensors.len(),
        config_hash: config_hash(config),
        condition: condition.as_str().into(),
        entries,
    };
    write_tensors(out, &tensors, &sidecar)
}

fn train(corpus_dir: &Path, model_path: &Path, config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(corpus_dir)?;
    let processed = process_corpus(&corpus, config, condition_for(config))?;
    let split = roadnoise_core::pipeline::split_events(&corpus, &processed, &config.split)?;
    log::info!(
        "training on {} events, validating on {}",
        split.train.len(),
        split.validation.len()
    );
    let scorer = roadnoise_core::pipeline::train_scorer(&processed, &split, config)?;
    let hash = config_hash(config);
    save_model(model_path, &scorer.model, &scorer.standardizer, config, &hash)?;
    let mut loss_path = model_path.as_os_str().to_owned();
    loss_path.push(".loss.csv");
    let loss_path = PathBuf::from(loss_path);
    write_loss_csv(&loss_path, &scorer.summary.history)?;
    write_meta(&loss_path, &ArtifactMeta::new("train", &hash))
}

fn score(corpus_dir: Option<&Path>, tensor_path: Option<&Path>, model_path: &Path, out: &Path) -> Result<()> {
    let saved = load_model(model_path)?;
    let config = &saved.header.config;
    let (tensors, rows): (Vec<FeatureTensor>, Vec<TensorEntry>) = match (corpus_dir, tensor_path) {
        (Some(dir), _) => {
            let corpus = load_corpus(dir)?;
            let processed: Vec<ProcessedRecording> = process_corpus(&corpus, config, condition_for(config))?;
            let mut tensors = Vec::new();
            let mut rows = Vec::new();
            for (rec, p) in corpus.recordings.iter().zip(processed) {
                for (i, (e, t)) in p.events.iter().zip(p.tensors).enumerate() {
                    rows.push(TensorEntry {
                        recording_id: rec.id.clone(),
                        label: rec.label,
                        event_index: i,
                        start_s: e.start_s,
                        end_s: e.end_s,
                    });
                    tensors.push(t);
                }
            }
            (tensors, rows)
        }
        (None, Some(path)) => {
            let (tensors, sidecar) = read_tensors(path)?;
            (tensors, sidecar.entries)
        }
        (None, None) => unreachable!("clap requires --corpus or --tensors"),
    };
    let mse = autoencoder::score_events(&saved.model, &saved.standardizer, &tensors)?;
    let scores: Vec<ScoredEvent> = rows
        .into_iter()
        .zip(mse)
        .map(|(r, (_, m))| ScoredEvent {
            recording_id: r.recording_id,
            label: r.label,
            event_index: r.event_index,
            start_s: r.start_s,
            end_s: r.end_s,
            mse: m,
        })
        .collect();
    write_scores_csv(out, &scores)?;
    write_meta(out, &ArtifactMeta::new("score", &saved.header.config_hash))
}

fn evaluate(corpus_dir: &Path, report_path: &Path, roc_dir: Option<&Path>, config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(corpus_dir)?;
    let hash = config_hash(config);
    let report = build_report(&corpus, config, &hash)?;
    write_json(report_path, &report)?;
    if let Some(dir) = roc_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for cond in &report.conditions {
            let labelled: Vec<(SurfaceLabel, f64)> = cond.scores.iter().map(|s| (s.label, s.mse)).collect();
            for sc in &config.scenarios {
                let (normal, anomalous) = eval::partition(&labelled, sc);
                if normal.is_empty() || anomalous.is_empty() {
                    continue;
                }
                let path = dir.join(format!("roc_{}_{}.csv", cond.condition, sc.name));
                write_roc_csv(&path, &eval::roc_points(&normal, &anomalous)?)?;
                write_meta(&path, &ArtifactMeta::new("evaluate", &hash))?;
            }
        }
    }
    print!("{}", render_tables(&report));
    Ok(())
}

fn spectrum(input: &Path, out: &Path, frame_size: usize, hop: usize) -> Result<()> {
    let audio = read_wav(input)?;
    let spectrum = dsp::time_averaged_spectrum(&audio, frame_size, hop)?;
    write_spectrum_csv(out, &spectrum)?;
    write_meta(out, &ArtifactMeta::new("spectrum", &stable_hash(&(frame_size, hop))))
}
