//! Desk-scale proxy evaluator: leave-one-speaker-out nearest-neighbor
//! classification of utterances by word label, DTW over MFCC sequences.
//!
//! A stand-in for ASR training, giving directional signals only; its numbers
//! are never comparable to real recognizer scores.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::dsp::mel::mfcc;
use crate::eval::dtw::dtw_distance;
use crate::eval::EvalError;
use crate::manifest::ManifestEntry;

const MFCC_COEFFS: usize = 13;
const DTW_RADIUS_FRACTION: f64 = 0.1;

/// Outcome of one proxy evaluation, with the seed echoed for reproducibility.
#[derive(Debug, Clone, Serialize)]
pub struct ProxyReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub speakers: usize,
    pub classes: usize,
    pub augmented_pool: usize,
    pub seed: u64,
}

struct Exemplar {
    features: Array2<f64>,
    label: String,
    speaker: String,
    /// Speaker lineage for synthetic entries: the speaker whose content was
    /// used, so held-out-speaker content never leaks into the training pool.
    source_speaker: Option<String>,
}

fn load_exemplar(entry: &ManifestEntry, manifest_dir: &Path) -> Result<Exemplar, EvalError> {
    let path = entry
        .resolve_path(manifest_dir)
        .ok_or_else(|| EvalError::InsufficientClasses("entry has no audio path".into()))?;
    let clip = crate::audio::load_wav(&path)?;
    let clip = crate::dsp::resample::resample(&clip, crate::audio::PIPELINE_SAMPLE_RATE)?;
    let features = mfcc(&clip, MFCC_COEFFS)?;
    Ok(Exemplar {
        features,
        label: crate::eval::normalize_text(&entry.text, false),
        speaker: entry.speaker_id.clone(),
        source_speaker: entry
            .augmentation
            .as_ref()
            .map(|r| r.source_speaker.clone()),
    })
}

/// Leave-one-speaker-out accuracy over the original corpus, with an optional
/// augmented pool added to every fold's training set.
pub fn proxy_eval(
    corpus: &[ManifestEntry],
    corpus_dir: &Path,
    augmented: Option<(&[ManifestEntry], &Path)>,
    seed: u64,
) -> Result<ProxyReport, EvalError> {
    let originals: Vec<&ManifestEntry> = corpus
        .iter()
        .filter(|e| e.augmentation.is_none() && e.audio_filepath.is_some())
        .collect();
    let speakers: BTreeSet<&str> = originals.iter().map(|e| e.speaker_id.as_str()).collect();
    let classes: BTreeSet<String> = originals
        .iter()
        .map(|e| crate::eval::normalize_text(&e.text, false))
        .collect();
    if speakers.len() < 2 {
        return Err(EvalError::InsufficientClasses(format!(
            "need at least 2 speakers, got {}",
            speakers.len()
        )));
    }
    if classes.len() < 2 {
        return Err(EvalError::InsufficientClasses(format!(
            "need at least 2 word classes, got {}",
            classes.len()
        )));
    }

    let mut pool: Vec<Exemplar> = Vec::new();
    for entry in &originals {
        pool.push(load_exemplar(entry, corpus_dir)?);
    }
    let mut aug_pool: Vec<Exemplar> = Vec::new();
    if let Some((entries, dir)) = augmented {
        for entry in entries {
            if entry.augmentation.is_some() && entry.audio_filepath.is_some() {
                aug_pool.push(load_exemplar(entry, dir)?);
            }
        }
    }

    let mut correct = 0usize;
    let mut total = 0usize;
    for held_out in &speakers {
        for (idx, test) in pool.iter().enumerate() {
            if test.speaker != *held_out {
                continue;
            }
            let mut best: Option<(f64, &str)> = None;
            let train = pool
                .iter()
                .enumerate()
                .filter(|(j, e)| *j != idx && e.speaker != *held_out)
                .map(|(_, e)| e)
                .chain(aug_pool.iter().filter(|e| {
                    e.source_speaker.as_deref() != Some(*held_out) && e.speaker != *held_out
                }));
            for ex in train {
                let d = dtw_distance(&test.features, &ex.features, DTW_RADIUS_FRACTION);
                if best.is_none() || d < best.as_ref().unwrap().0 {
                    best = Some((d, &ex.label));
                }
            }
            if let Some((_, label)) = best {
                if label == test.label {
                    correct += 1;
                }
                total += 1;
            }
        }
    }

    if total == 0 {
        return Err(EvalError::InsufficientClasses(
            "no test utterances after the leave-one-speaker-out split".into(),
        ));
    }
    Ok(ProxyReport {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
        speakers: speakers.len(),
        classes: classes.len(),
        augmented_pool: aug_pool.len(),
        seed,
    })
}
