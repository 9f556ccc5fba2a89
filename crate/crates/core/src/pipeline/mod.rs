//! Corpus-level orchestration: timbre-store construction and deterministic
//! parallel augmentation runs.
//!
//! Every synthetic output is one independent job; its randomness comes only
//! from (master seed, output index), so byte-identical results hold across
//! runs and worker counts. Synthetic outputs are allocated round-robin over
//! the originals in lexicographic utterance-id order, which sends the
//! remainder of a fractional ratio to the lexicographically first ids.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{load_wav, save_wav, AudioClip, AudioError, PIPELINE_SAMPLE_RATE};
use crate::baseline::{spec_augment, waveform_augment, BaselineError, SpecAugConfig, WaveformAugConfig};
use crate::codec::external::{external_encode, CodecBackend};
use crate::codec::files::{load_timbre, save_mel_features, save_timbre};
use crate::codec::{CodecError, TimbreVector};
use crate::denoise::{denoise, DenoiseConfig, DenoiseError};
use crate::dsp::mel::{mel_spectrogram, MelParams};
use crate::dsp::{stft, FrameConfig};
use crate::manifest::{
    load_manifest, write_manifest, ManifestEntry, ManifestError,
};
use crate::mixup::{
    augment_utterance, sample_dirichlet3, sample_lambda, select_partners, select_vc_target,
    MixDraw, MixupConfig, MixupError, UttInfo,
};
use crate::rng::derive_rng;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Mixup(#[from] MixupError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("timbre store corrupt at {path}: {reason}")]
    StoreCorrupt { path: String, reason: String },
    #[error("timbre store missing or empty at {0}")]
    MissingStore(String),
    #[error("failure rate exceeded: {failed}/{total} outputs failed")]
    FailureRateExceeded { failed: usize, total: usize },
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugMethod {
    Mixup,
    Waveform,
    Specaugment,
    VoiceConversion,
}

impl AugMethod {
    pub fn label(&self) -> &'static str {
        match self {
            AugMethod::Mixup => "mixup",
            AugMethod::Waveform => "waveform",
            AugMethod::Specaugment => "specaugment",
            AugMethod::VoiceConversion => "voice_conversion",
        }
    }
}

/// Full configuration of one augmentation run. The JSON config file mirrors
/// this struct; command-line flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Synthetic outputs per original.
    pub ratio: f64,
    pub method: AugMethod,
    pub mixup: MixupConfig,
    pub waveform: WaveformAugConfig,
    pub specaugment: SpecAugConfig,
    pub denoise: DenoiseConfig,
    pub backend: CodecBackend,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            ratio: 0.33,
            method: AugMethod::Mixup,
            mixup: MixupConfig::default(),
            waveform: WaveformAugConfig::default(),
            specaugment: SpecAugConfig::default(),
            denoise: DenoiseConfig::default(),
            backend: CodecBackend::Reference,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.ratio <= 0.0 {
            return Err(PipelineError::InvalidConfig("ratio must be positive".into()));
        }
        if self.workers == 0 {
            return Err(PipelineError::InvalidConfig(
                "worker count must be at least 1".into(),
            ));
        }
        if self.method == AugMethod::VoiceConversion && self.mixup.source_equals_target {
            return Err(PipelineError::InvalidConfig(
                "source-equals-target conflicts with voice_conversion".into(),
            ));
        }
        self.mixup.validate().map_err(PipelineError::Mixup)?;
        self.denoise.validate().map_err(PipelineError::Denoise)?;
        Ok(())
    }

    /// Human-readable label of the configuration variant, recorded in run
    /// metadata.
    pub fn preset_label(&self) -> String {
        match self.method {
            AugMethod::Mixup => {
                let mut parts: Vec<&str> = Vec::new();
                if !self.mixup.post_denoise {
                    parts.push("no_post_denoising");
                }
                if self.mixup.source_equals_target {
                    parts.push("source_equals_target");
                }
                if self.mixup.num_mixup_timbres == 3 {
                    parts.push("mixup_3_speaker_timbres");
                }
                if parts.is_empty() {
                    "proposed_mixup".into()
                } else {
                    parts.join("_")
                }
            }
            other => other.label().into(),
        }
    }
}

/// One timbre-store row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreEntry {
    pub speaker_id: String,
    pub timbre_file: String,
    pub audio_filepath: String,
}

/// Index of per-utterance timbre files under one directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StoreIndex {
    pub entries: BTreeMap<String, StoreEntry>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StoreReport {
    pub built: usize,
    pub reused: usize,
    pub failed: usize,
    pub failures: Vec<(String, String)>,
}

fn store_index_path(store_dir: &Path) -> PathBuf {
    store_dir.join("index.json")
}

pub fn load_store_index(store_dir: &Path) -> Result<StoreIndex, PipelineError> {
    let path = store_index_path(store_dir);
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::StoreCorrupt {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Extracts the timbre of a clip the way the store does: resample to the
/// pipeline rate, denoise, encode.
pub fn extract_timbre(
    clip: &AudioClip,
    backend: &CodecBackend,
    dn_cfg: &DenoiseConfig,
    scratch_dir: Option<&Path>,
) -> Result<TimbreVector, PipelineError> {
    let clip = crate::dsp::resample::resample(clip, PIPELINE_SAMPLE_RATE)?;
    let cleaned = denoise(&clip, dn_cfg)?;
    match backend {
        CodecBackend::Reference => Ok(crate::codec::encode(&cleaned)?.1),
        CodecBackend::External { .. } => {
            let dir = scratch_dir.ok_or_else(|| {
                PipelineError::InvalidConfig("external backend needs a scratch dir".into())
            })?;
            let in_wav = dir.join("in.wav");
            let content = dir.join("content.bin");
            let timbre = dir.join("timbre.timb");
            save_wav(&cleaned, &in_wav)?;
            Ok(external_encode(backend, &in_wav, &content, &timbre)?)
        }
    }
}

/// Builds (or incrementally extends) the per-utterance timbre store.
///
/// Files already present are left untouched after a header check; a present
/// file with the wrong shape fails the run as store corruption.
pub fn build_timbre_store(
    manifest_path: &Path,
    store_dir: &Path,
    backend: &CodecBackend,
    dn_cfg: &DenoiseConfig,
) -> Result<(StoreIndex, StoreReport), PipelineError> {
    let entries = load_manifest(manifest_path)?;
    let manifest_dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    std::fs::create_dir_all(store_dir).map_err(|e| io_err(store_dir, e))?;

    let mut index = StoreIndex::default();
    let mut report = StoreReport::default();
    for entry in &entries {
        if entry.audio_filepath.is_none() {
            continue;
        }
        let utt_id = entry.utt_id();
        let timbre_file = format!("{utt_id}.timb");
        let timbre_path = store_dir.join(&timbre_file);
        if timbre_path.exists() {
            if let Err(e) = load_timbre(&timbre_path) {
                return Err(PipelineError::StoreCorrupt {
                    path: timbre_path.display().to_string(),
                    reason: e.to_string(),
                });
            }
            index.entries.insert(
                utt_id.clone(),
                StoreEntry {
                    speaker_id: entry.speaker_id.clone(),
                    timbre_file,
                    audio_filepath: entry.audio_filepath.clone().unwrap(),
                },
            );
            report.reused += 1;
            continue;
        }

        let result = (|| -> Result<(), PipelineError> {
            let audio_path = entry.resolve_path(&manifest_dir).expect("audio path");
            let clip = load_wav(&audio_path)?;
            let scratch = store_dir.join("scratch");
            if backend.is_external() {
                std::fs::create_dir_all(&scratch).map_err(|e| io_err(&scratch, e))?;
            }
            let timbre = extract_timbre(&clip, backend, dn_cfg, Some(&scratch))?;
            save_timbre(&timbre, &timbre_path)?;
            Ok(())
        })();
        match result {
            Ok(()) => {
                index.entries.insert(
                    utt_id.clone(),
                    StoreEntry {
                        speaker_id: entry.speaker_id.clone(),
                        timbre_file,
                        audio_filepath: entry.audio_filepath.clone().unwrap(),
                    },
                );
                report.built += 1;
            }
            Err(e) => {
                log::warn!("timbre extraction failed for {utt_id}: {e}");
                report.failures.push((utt_id.clone(), e.to_string()));
                report.failed += 1;
            }
        }
    }
    let scratch = store_dir.join("scratch");
    if scratch.exists() {
        let _ = std::fs::remove_dir_all(&scratch);
    }

    let attempted = report.built + report.failed;
    if attempted > 0 && report.failed as f64 > MAX_FAILURE_RATE * attempted as f64 {
        return Err(PipelineError::FailureRateExceeded {
            failed: report.failed,
            total: attempted,
        });
    }

    let index_path = store_index_path(store_dir);
    let json = serde_json::to_string_pretty(&index).expect("index serializes");
    std::fs::write(&index_path, json).map_err(|e| io_err(&index_path, e))?;
    Ok((index, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub originals: usize,
    pub synthetic_requested: usize,
    pub synthetic_written: usize,
    pub failed: usize,
    pub failures: Vec<(u64, String)>,
    pub manifest_path: String,
    pub preset: String,
}

struct JobContext<'a> {
    cfg: &'a RunConfig,
    manifest_dir: &'a Path,
    out_dir: &'a Path,
    corpus: Vec<UttInfo>,
    timbres: BTreeMap<String, TimbreVector>,
}

fn load_source_clip(
    entry: &ManifestEntry,
    manifest_dir: &Path,
) -> Result<AudioClip, PipelineError> {
    let path = entry
        .resolve_path(manifest_dir)
        .ok_or_else(|| PipelineError::InvalidConfig("entry has no audio path".into()))?;
    let clip = load_wav(&path)?;
    Ok(crate::dsp::resample::resample(&clip, PIPELINE_SAMPLE_RATE)?)
}

fn run_one_job(
    ctx: &JobContext<'_>,
    j: u64,
    source: &ManifestEntry,
) -> Result<ManifestEntry, PipelineError> {
    let mut rng = derive_rng(ctx.cfg.master_seed, j);
    let source_utt = UttInfo {
        utt_id: source.utt_id(),
        speaker_id: source.speaker_id.clone(),
    };
    let synth_speaker = format!("synth/{}/{}", source.speaker_id, j);

    match ctx.cfg.method {
        AugMethod::Mixup | AugMethod::VoiceConversion => {
            let vc = ctx.cfg.method == AugMethod::VoiceConversion;
            let selection = if vc {
                select_vc_target(&ctx.corpus, &source_utt, &mut rng, &ctx.cfg.mixup)?
            } else {
                select_partners(&ctx.corpus, &source_utt, &mut rng, &ctx.cfg.mixup)?
            };
            let draw = if vc {
                MixDraw::Pair { lambda: 1.0 }
            } else if ctx.cfg.mixup.num_mixup_timbres == 3 {
                MixDraw::Triple {
                    weights: sample_dirichlet3(&mut rng),
                }
            } else {
                MixDraw::Pair {
                    lambda: sample_lambda(&mut rng, &ctx.cfg.mixup),
                }
            };

            let t_target = ctx.timbres.get(&selection.target.utt_id).ok_or_else(|| {
                PipelineError::MissingStore(format!(
                    "no stored timbre for target {}",
                    selection.target.utt_id
                ))
            })?;
            let mut t_mixups: Vec<&TimbreVector> = Vec::new();
            for m in &selection.mixup {
                t_mixups.push(ctx.timbres.get(&m.utt_id).ok_or_else(|| {
                    PipelineError::MissingStore(format!("no stored timbre for partner {}", m.utt_id))
                })?);
            }
            if t_mixups.is_empty() {
                // Voice conversion: pure target timbre; the lambda = 1 mix
                // against the target itself is definitionally the same path.
                t_mixups.push(t_target);
            }

            let clip = load_source_clip(source, ctx.manifest_dir)?;
            let scratch = ctx.out_dir.join("scratch").join(format!("job_{j:06}"));
            if ctx.cfg.backend.is_external() {
                std::fs::create_dir_all(&scratch).map_err(|e| io_err(&scratch, e))?;
            }
            let (out_clip, mut record) = augment_utterance(
                &clip,
                &selection,
                &draw,
                t_target,
                &t_mixups,
                ctx.cfg.method.label(),
                &ctx.cfg.mixup,
                &ctx.cfg.denoise,
                &ctx.cfg.backend,
                Some(&scratch),
            )?;
            if ctx.cfg.backend.is_external() {
                let _ = std::fs::remove_dir_all(&scratch);
            }
            if vc {
                record.mixup_speakers.clear();
                record.mixup_utt_ids.clear();
            }

            let rel = format!("audio/{}_aug{j:06}.wav", source_utt.utt_id);
            let out_path = ctx.out_dir.join(&rel);
            save_wav(&out_clip, &out_path)?;
            Ok(ManifestEntry {
                audio_filepath: Some(rel),
                features_filepath: None,
                text: source.text.clone(),
                speaker_id: synth_speaker,
                language: source.language.clone(),
                duration: out_clip.duration_secs(),
                augmentation: Some(record),
                source_utt_id: Some(source_utt.utt_id),
            })
        }
        AugMethod::Waveform => {
            let clip = load_source_clip(source, ctx.manifest_dir)?;
            let (out_clip, record) =
                waveform_augment(&clip, &ctx.cfg.waveform, &mut rng, &source.speaker_id)?;
            let rel = format!("audio/{}_aug{j:06}.wav", source_utt.utt_id);
            let out_path = ctx.out_dir.join(&rel);
            save_wav(&out_clip, &out_path)?;
            Ok(ManifestEntry {
                audio_filepath: Some(rel),
                features_filepath: None,
                text: source.text.clone(),
                speaker_id: synth_speaker,
                language: source.language.clone(),
                duration: out_clip.duration_secs(),
                augmentation: Some(record),
                source_utt_id: Some(source_utt.utt_id),
            })
        }
        AugMethod::Specaugment => {
            let clip = load_source_clip(source, ctx.manifest_dir)?;
            let spec = stft(&clip, FrameConfig::default())?;
            let mel = mel_spectrogram(&spec, MelParams::features());
            let (masked, masks) = spec_augment(&mel, &ctx.cfg.specaugment, &mut rng)?;
            let rel = format!("features/{}_aug{j:06}.melf", source_utt.utt_id);
            let out_path = ctx.out_dir.join(&rel);
            save_mel_features(&masked, &out_path)?;
            let record = crate::manifest::AugmentationRecord {
                method: ctx.cfg.method.label().into(),
                lambda: None,
                weights: None,
                source_speaker: source.speaker_id.clone(),
                target_speaker: None,
                target_utt_id: None,
                mixup_speakers: vec![],
                mixup_utt_ids: vec![],
                waveform: None,
                masks,
            };
            Ok(ManifestEntry {
                audio_filepath: None,
                features_filepath: Some(rel),
                text: source.text.clone(),
                speaker_id: synth_speaker,
                language: source.language.clone(),
                duration: source.duration,
                augmentation: Some(record),
                source_utt_id: Some(source_utt.utt_id),
            })
        }
    }
}

/// Runs one augmentation pass and writes `manifest.jsonl`, the synthetic
/// audio/feature files, and `run_metadata.json` under `out_dir`.
pub fn run_augmentation(
    manifest_path: &Path,
    store_dir: Option<&Path>,
    out_dir: &Path,
    cfg: &RunConfig,
) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let entries = load_manifest(manifest_path)?;
    let manifest_dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let originals: Vec<&ManifestEntry> = entries
        .iter()
        .filter(|e| e.audio_filepath.is_some() && e.augmentation.is_none())
        .collect();
    if originals.is_empty() {
        return Err(PipelineError::Manifest(ManifestError::EmptyManifest));
    }

    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let subdir = match cfg.method {
        AugMethod::Specaugment => "features",
        _ => "audio",
    };
    let files_dir = out_dir.join(subdir);
    std::fs::create_dir_all(&files_dir).map_err(|e| io_err(&files_dir, e))?;

    // Stored timbres back partner selection for the codec-based methods.
    let needs_store = matches!(cfg.method, AugMethod::Mixup | AugMethod::VoiceConversion);
    let (corpus, timbres) = if needs_store {
        let store_dir = store_dir.ok_or_else(|| {
            PipelineError::MissingStore("mixup and voice conversion need --store".into())
        })?;
        let index = load_store_index(store_dir)?;
        if index.entries.is_empty() {
            return Err(PipelineError::MissingStore(
                store_dir.display().to_string(),
            ));
        }
        let mut corpus = Vec::new();
        let mut timbres = BTreeMap::new();
        for (utt_id, row) in &index.entries {
            let timbre = load_timbre(&store_dir.join(&row.timbre_file)).map_err(|e| {
                PipelineError::StoreCorrupt {
                    path: row.timbre_file.clone(),
                    reason: e.to_string(),
                }
            })?;
            corpus.push(UttInfo {
                utt_id: utt_id.clone(),
                speaker_id: row.speaker_id.clone(),
            });
            timbres.insert(utt_id.clone(), timbre);
        }
        corpus.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
        (corpus, timbres)
    } else {
        (Vec::new(), BTreeMap::new())
    };

    // Round-robin allocation over lexicographic utterance ids.
    let mut sorted: Vec<&ManifestEntry> = originals.clone();
    sorted.sort_by_key(|e| e.utt_id());
    let n = sorted.len();
    let synth_count = (cfg.ratio * n as f64).round() as usize;

    let ctx = JobContext {
        cfg,
        manifest_dir: &manifest_dir,
        out_dir,
        corpus,
        timbres,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<(u64, Result<ManifestEntry, PipelineError>)> = pool.install(|| {
        (0..synth_count as u64)
            .into_par_iter()
            .map(|j| {
                let source = sorted[(j as usize) % n];
                (j, run_one_job(&ctx, j, source))
            })
            .collect()
    });

    let mut synthetic = Vec::with_capacity(synth_count);
    let mut failures = Vec::new();
    for (j, result) in results {
        match result {
            Ok(entry) => synthetic.push(entry),
            Err(e) => {
                log::warn!("output {j} failed: {e}");
                failures.push((j, e.to_string()));
            }
        }
    }
    if synth_count > 0 && failures.len() as f64 > MAX_FAILURE_RATE * synth_count as f64 {
        return Err(PipelineError::FailureRateExceeded {
            failed: failures.len(),
            total: synth_count,
        });
    }

    // Output manifest: originals (absolutized paths) then synthetics in
    // output-index order.
    let mut out_entries: Vec<ManifestEntry> = Vec::with_capacity(entries.len() + synthetic.len());
    for entry in &entries {
        let mut e = entry.clone();
        if let Some(resolved) = entry.resolve_path(&manifest_dir) {
            let resolved = resolved.display().to_string();
            if e.audio_filepath.is_some() {
                e.audio_filepath = Some(resolved);
            } else {
                e.features_filepath = Some(resolved);
            }
        }
        out_entries.push(e);
    }
    out_entries.extend(synthetic.iter().cloned());
    let manifest_out = out_dir.join("manifest.jsonl");
    write_manifest(&out_entries, &manifest_out)?;

    let scratch_root = out_dir.join("scratch");
    if scratch_root.exists() {
        let _ = std::fs::remove_dir_all(&scratch_root);
    }

    let report = RunReport {
        originals: n,
        synthetic_requested: synth_count,
        synthetic_written: synthetic.len(),
        failed: failures.len(),
        failures,
        manifest_path: manifest_out.display().to_string(),
        preset: cfg.preset_label(),
    };
    write_run_metadata(manifest_path, out_dir, cfg, &report)?;
    Ok(report)
}

/// Provenance beside each output manifest: configuration echo (volatile
/// fields like worker count excluded, so outputs stay byte-comparable) and
/// a content hash of the input manifest.
fn write_run_metadata(
    manifest_path: &Path,
    out_dir: &Path,
    cfg: &RunConfig,
    report: &RunReport,
) -> Result<(), PipelineError> {
    let input_bytes =
        std::fs::read(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let digest = Sha256::digest(&input_bytes);
    let mut hash = String::new();
    for b in digest {
        hash.push_str(&format!("{b:02x}"));
    }
    let metadata = serde_json::json!({
        "preset": report.preset,
        "method": cfg.method.label(),
        "master_seed": cfg.master_seed,
        "ratio": cfg.ratio,
        "mixup": cfg.mixup,
        "denoise": cfg.denoise,
        "backend": cfg.backend,
        "input_manifest_sha256": hash,
        "originals": report.originals,
        "synthetic_requested": report.synthetic_requested,
        "synthetic_written": report.synthetic_written,
        "failed": report.failed,
    });
    let path = out_dir.join("run_metadata.json");
    std::fs::write(&path, serde_json::to_string_pretty(&metadata).unwrap())
        .map_err(|e| io_err(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_labels_follow_flags() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.preset_label(), "proposed_mixup");
        cfg.mixup.post_denoise = false;
        assert_eq!(cfg.preset_label(), "no_post_denoising");
        cfg.mixup.source_equals_target = true;
        assert_eq!(cfg.preset_label(), "no_post_denoising_source_equals_target");
        cfg.mixup.post_denoise = true;
        cfg.mixup.source_equals_target = false;
        cfg.mixup.num_mixup_timbres = 3;
        assert_eq!(cfg.preset_label(), "mixup_3_speaker_timbres");
        cfg.method = AugMethod::Waveform;
        assert_eq!(cfg.preset_label(), "waveform");
    }

    #[test]
    fn conflicting_flags_rejected() {
        let cfg = RunConfig {
            method: AugMethod::VoiceConversion,
            mixup: MixupConfig {
                source_equals_target: true,
                ..MixupConfig::default()
            },
            ..RunConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(PipelineError::InvalidConfig(_))
        ));
    }

    #[test]
    fn zero_ratio_rejected() {
        let cfg = RunConfig {
            ratio: 0.0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
