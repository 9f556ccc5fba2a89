//! Command-line driver for the augmentation toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use timbremix::analysis::fit_pca;
use timbremix::analysis::scatter::emit_scatter;
use timbremix::analysis::spread::spread_report;
use timbremix::audio::{load_wav, save_wav, PIPELINE_SAMPLE_RATE};
use timbremix::codec::external::CodecBackend;
use timbremix::codec::files::{load_content, load_timbre, save_content, save_timbre};
use timbremix::denoise::{denoise, DenoiseConfig};
use timbremix::dsp::resample::resample;
use timbremix::eval::proxy::proxy_eval;
use timbremix::eval::{corpus_wer, gap, load_pairs, pairs_from_text_files};
use timbremix::manifest::{load_manifest, validate_manifest};
use timbremix::pipeline::{
    build_timbre_store, run_augmentation, AugMethod, PipelineError, RunConfig,
};

type BoxError = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(
    name = "timbremix",
    about = "Speech corpus augmentation by latent timbre mixing",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract and store one timbre vector per utterance.
    BuildStore {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// External codec command; the reference codec when omitted.
        #[arg(long)]
        backend_cmd: Option<String>,
    },
    /// Generate synthetic utterances and a trainer-ready manifest.
    Augment(AugmentArgs),
    /// Check a manifest: schema, paths, durations, duplicate ids.
    Validate { manifest: PathBuf },
    /// Spectral-gating noise reduction on one file.
    Denoise {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 0.20)]
        percentile: f64,
        #[arg(long, default_value_t = 1.5)]
        multiplier: f64,
        #[arg(long, default_value_t = 3)]
        smooth_freq: usize,
        #[arg(long, default_value_t = 5)]
        smooth_time: usize,
        #[arg(long, default_value_t = -30.0)]
        floor_db: f64,
    },
    /// Word error rate between references and hypotheses.
    Wer {
        /// Plain-text references, one per line (with --hyps).
        #[arg(long, requires = "hyps", conflicts_with = "pairs")]
        refs: Option<PathBuf>,
        /// Plain-text hypotheses, line-aligned with --refs.
        #[arg(long)]
        hyps: Option<PathBuf>,
        /// JSON Lines pairs manifest (reference/hypothesis per line).
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        strip_punctuation: bool,
    },
    /// WER gap between a low-resource and a high-resource pairs manifest.
    Gap {
        #[arg(long)]
        low: PathBuf,
        #[arg(long)]
        high: PathBuf,
        #[arg(long)]
        strip_punctuation: bool,
    },
    /// Leave-one-speaker-out directional check with a DTW classifier.
    ProxyEval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        augmented: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
    },
    /// PCA spread analysis of timbre groups; emits SVG, CSV, and a report.
    AnalyzeTimbre {
        /// Directory of .timb files for the original speakers.
        #[arg(long)]
        original: PathBuf,
        /// Additional groups as name=dir, repeatable.
        #[arg(long = "group", value_parser = parse_group)]
        groups: Vec<(String, PathBuf)>,
        /// Output prefix for <prefix>.svg/.csv/.report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a wav into a content file and a timbre file.
    Encode {
        input: PathBuf,
        content: PathBuf,
        timbre: PathBuf,
    },
    /// Synthesize a wav from a content file and a timbre file.
    Decode {
        content: PathBuf,
        timbre: PathBuf,
        output: PathBuf,
    },
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Master seed; required so runs are reproducible by construction.
    #[arg(long)]
    seed: u64,
    /// Timbre store directory (required for mixup and voice conversion).
    #[arg(long)]
    store: Option<PathBuf>,
    /// JSON config file mirroring the run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    num_mixup_timbres: Option<usize>,
    #[arg(long)]
    no_post_denoise: bool,
    #[arg(long)]
    source_equals_target: bool,
    #[arg(long)]
    speaker_uniform_targets: bool,
    #[arg(long)]
    backend_cmd: Option<String>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Mixup,
    Waveform,
    Specaugment,
    VoiceConversion,
}

impl From<MethodArg> for AugMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mixup => AugMethod::Mixup,
            MethodArg::Waveform => AugMethod::Waveform,
            MethodArg::Specaugment => AugMethod::Specaugment,
            MethodArg::VoiceConversion => AugMethod::VoiceConversion,
        }
    }
}

fn parse_group(s: &str) -> Result<(String, PathBuf), String> {
    let (name, dir) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=dir, got {s}"))?;
    if name.is_empty() {
        return Err("group name is empty".into());
    }
    Ok((name.to_string(), PathBuf::from(dir)))
}

fn load_timbre_dir(dir: &Path) -> Result<Vec<timbremix::TimbreVector>, BoxError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|r| r.ok().map(|d| d.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "timb"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(format!("no .timb files in {}", dir.display()).into());
    }
    paths
        .iter()
        .map(|p| {
            load_timbre(p).map_err(|e| -> BoxError { format!("{}: {e}", p.display()).into() })
        })
        .collect()
}

fn build_run_config(args: &AugmentArgs) -> Result<RunConfig, BoxError> {
    let mut cfg = if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str::<RunConfig>(&text)
            .map_err(|e| format!("bad config {}: {e}", path.display()))?
    } else {
        RunConfig::default()
    };
    cfg.master_seed = args.seed;
    if let Some(r) = args.ratio {
        cfg.ratio = r;
    }
    if let Some(m) = args.method {
        cfg.method = m.into();
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(a) = args.alpha {
        cfg.mixup.alpha = a;
    }
    if let Some(b) = args.beta {
        cfg.mixup.beta = b;
    }
    if let Some(n) = args.num_mixup_timbres {
        if !matches!(cfg.method, AugMethod::Mixup) {
            return Err("--num-mixup-timbres only applies to --method mixup".into());
        }
        cfg.mixup.num_mixup_timbres = n;
    }
    if args.no_post_denoise {
        cfg.mixup.post_denoise = false;
    }
    if args.source_equals_target {
        cfg.mixup.source_equals_target = true;
    }
    if args.speaker_uniform_targets {
        cfg.mixup.speaker_uniform_targets = true;
    }
    if let Some(cmd) = &args.backend_cmd {
        cfg.backend = CodecBackend::External {
            command: cmd.clone(),
        };
    }
    Ok(cfg)
}

/// Exit policy: 0 success, 1 validation failure, 2 runtime failure.
fn run() -> Result<u8, BoxError> {
    let cli = Cli::parse();
    match cli.command {
        Command::BuildStore {
            manifest,
            store,
            backend_cmd,
        } => {
            let backend = match backend_cmd {
                Some(command) => CodecBackend::External { command },
                None => CodecBackend::Reference,
            };
            let (index, report) =
                build_timbre_store(&manifest, &store, &backend, &DenoiseConfig::default())?;
            println!(
                "{}",
                serde_json::json!({
                    "entries": index.entries.len(),
                    "built": report.built,
                    "reused": report.reused,
                    "failed": report.failed,
                })
            );
            Ok(0)
        }
        Command::Augment(args) => {
            let cfg = build_run_config(&args)?;
            match run_augmentation(&args.manifest, args.store.as_deref(), &args.out, &cfg) {
                Ok(report) => {
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                    Ok(0)
                }
                Err(e @ PipelineError::InvalidConfig(_)) => {
                    eprintln!("{e}");
                    Ok(1)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Validate { manifest } => {
            let report = validate_manifest(&manifest)?;
            println!("{report}");
            Ok(if report.is_clean() { 0 } else { 1 })
        }
        Command::Denoise {
            input,
            output,
            percentile,
            multiplier,
            smooth_freq,
            smooth_time,
            floor_db,
        } => {
            let cfg = DenoiseConfig {
                percentile_for_noise_floor: percentile,
                threshold_std_multiplier: multiplier,
                smoothing_freq_bins: smooth_freq,
                smoothing_time_frames: smooth_time,
                attenuation_floor_db: floor_db,
            };
            let clip = load_wav(&input)?;
            let clip = resample(&clip, PIPELINE_SAMPLE_RATE)?;
            let out = denoise(&clip, &cfg)?;
            save_wav(&out, &output)?;
            Ok(0)
        }
        Command::Wer {
            refs,
            hyps,
            pairs,
            strip_punctuation,
        } => {
            let pair_list = match (refs, hyps, pairs) {
                (Some(r), Some(h), None) => pairs_from_text_files(&r, &h)?,
                (None, None, Some(p)) => load_pairs(&p)?,
                _ => return Err("pass either --refs with --hyps, or --pairs".into()),
            };
            let breakdown = corpus_wer(&pair_list, strip_punctuation)?;
            println!("{}", serde_json::to_string_pretty(&breakdown).unwrap());
            Ok(0)
        }
        Command::Gap {
            low,
            high,
            strip_punctuation,
        } => {
            let low_pairs = load_pairs(&low)?;
            let high_pairs = load_pairs(&high)?;
            let report = gap(&low_pairs, &high_pairs, strip_punctuation)?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(0)
        }
        Command::ProxyEval {
            corpus,
            augmented,
            seed,
        } => {
            let corpus_entries = load_manifest(&corpus)?;
            let corpus_dir = corpus
                .parent()
                .unwrap_or(Path::new("."))
                .to_path_buf();
            let aug_entries = match &augmented {
                Some(path) => {
                    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
                    Some((load_manifest(path)?, dir))
                }
                None => None,
            };
            let report = proxy_eval(
                &corpus_entries,
                &corpus_dir,
                aug_entries
                    .as_ref()
                    .map(|(e, d)| (e.as_slice(), d.as_path())),
                seed,
            )?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(0)
        }
        Command::AnalyzeTimbre {
            original,
            groups,
            out,
        } => {
            let original_vectors = load_timbre_dir(&original)?;
            let mut all_groups = vec![("original".to_string(), original_vectors.clone())];
            for (name, dir) in &groups {
                all_groups.push((name.clone(), load_timbre_dir(dir)?));
            }
            let model = fit_pca(&original_vectors, 2)?;
            let report = spread_report(&model, &all_groups)?;
            emit_scatter(&model, &all_groups, &out)?;
            let report_path = out.with_extension("report.json");
            std::fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap())
                .map_err(|e| format!("cannot write {}: {e}", report_path.display()))?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(0)
        }
        Command::Encode {
            input,
            content,
            timbre,
        } => {
            let clip = load_wav(&input)?;
            let clip = resample(&clip, PIPELINE_SAMPLE_RATE)?;
            let (code, vector) = timbremix::encode(&clip)?;
            save_content(&code, &content)?;
            save_timbre(&vector, &timbre)?;
            Ok(0)
        }
        Command::Decode {
            content,
            timbre,
            output,
        } => {
            let code = load_content(&content)?;
            let vector = load_timbre(&timbre)?;
            let clip = timbremix::decode(&code, &vector)?;
            save_wav(&clip, &output)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
