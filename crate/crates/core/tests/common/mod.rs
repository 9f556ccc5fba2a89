//! Synthetic micro-corpus generation shared by the integration suites.
//!
//! Utterances are source-filter stimuli: a "speaker" is an excitation F0
//! plus a spectral tilt, a "word" is a formant envelope fixed in Hz. Light
//! vibrato keeps the harmonics pitch-modulated and a little filtered noise
//! keeps the spectra honest.

use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use timbremix::audio::{save_wav, AudioClip};
use timbremix::manifest::{write_manifest, ManifestEntry};

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, Copy)]
pub struct SpeakerSpec {
    pub f0_hz: f64,
    pub tilt_db_per_khz: f64,
}

/// Distinct speaker voices: F0 from 116 to 270 Hz, tilt from -4 to +4
/// dB/kHz. Doubled F0 stays below the tracker ceiling for the low half.
pub fn speaker_spec(index: usize) -> SpeakerSpec {
    SpeakerSpec {
        f0_hz: 116.0 + 11.0 * index as f64,
        tilt_db_per_khz: -4.0 + 8.0 * (index as f64 * 0.37).fract(),
    }
}

/// Word formant sets, fixed in Hz so word identity survives speaker changes.
pub fn word_formants(word: usize) -> [f64; 3] {
    [
        380.0 + 170.0 * word as f64,
        1250.0 + 240.0 * word as f64,
        2480.0 + 130.0 * word as f64,
    ]
}

/// Renders one utterance: harmonics at the speaker's (vibrato-modulated) F0
/// shaped by the word's formant envelope and the speaker's tilt, plus a low
/// level of band-limited noise.
pub fn render_utterance(speaker: SpeakerSpec, word: usize, secs: f64, seed: u64) -> AudioClip {
    let sr = SAMPLE_RATE as f64;
    let len = (secs * sr) as usize;
    let formants = word_formants(word);
    let envelope = |f: f64| -> f64 {
        let formant_sum: f64 = formants
            .iter()
            .map(|&fc| (-(f - fc) * (f - fc) / (2.0 * 130.0 * 130.0)).exp())
            .sum();
        let tilt = 10.0f64.powf(speaker.tilt_db_per_khz * f / 1000.0 / 20.0);
        (0.05 + formant_sum) * tilt
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let mut noise_state = 0.0f64;

    let samples: Vec<f32> = (0..len)
        .map(|i| {
            let t = i as f64 / sr;
            let vibrato = 1.0 + 0.012 * (std::f64::consts::TAU * 4.5 * t).sin();
            let f0 = speaker.f0_hz * vibrato;
            let mut v = 0.0;
            let mut k = 1usize;
            while (k as f64) * f0 < 7200.0 && k < 64 {
                let f = k as f64 * f0;
                v += envelope(f) * (std::f64::consts::TAU * f * t + phases[k]).sin();
                k += 1;
            }
            // One-pole lowpassed noise floor.
            let white: f64 = rng.random_range(-1.0..1.0);
            noise_state = 0.7 * noise_state + 0.3 * white;
            v += 0.01 * noise_state;
            v as f32
        })
        .collect();

    let mut clip = AudioClip {
        samples,
        sample_rate: SAMPLE_RATE,
    };
    // Headroom below full scale: decoded audio keeps the energy its band
    // statistics imply, and pulse-like phase-retrieval output has a higher
    // crest factor than the source.
    clip.peak_normalize(0.45);
    clip
}

/// Writes `speakers x words_per_speaker` utterances plus `manifest.jsonl`
/// under `dir`; word labels cycle through `num_words` classes.
pub fn build_corpus(
    dir: &Path,
    num_speakers: usize,
    words_per_speaker: usize,
    num_words: usize,
    secs: f64,
) -> PathBuf {
    let speakers: Vec<usize> = (0..num_speakers).collect();
    build_corpus_for(dir, &speakers, words_per_speaker, num_words, secs)
}

/// As [`build_corpus`], with explicit speaker indices (wider index spread
/// means more dissimilar voices).
pub fn build_corpus_for(
    dir: &Path,
    speaker_indices: &[usize],
    words_per_speaker: usize,
    num_words: usize,
    secs: f64,
) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let mut entries = Vec::new();
    for &s in speaker_indices {
        for w in 0..words_per_speaker {
            let word = w % num_words;
            let name = format!("spk{s:02}_utt{w:02}.wav");
            let seed = (s * 1000 + w) as u64;
            let clip = render_utterance(speaker_spec(s), word, secs, seed);
            save_wav(&clip, &dir.join(&name)).unwrap();
            entries.push(ManifestEntry {
                audio_filepath: Some(name),
                features_filepath: None,
                text: format!("word{word}"),
                speaker_id: format!("spk{s:02}"),
                language: "xx".into(),
                duration: clip.duration_secs(),
                augmentation: None,
                source_utt_id: None,
            });
        }
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&entries, &manifest).unwrap();
    manifest
}

/// Recursively collects files under a directory, sorted by relative path.
pub fn file_inventory(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .collect();
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}
