//! The comparison augmenters: waveform perturbation, spectrogram masking,
//! and plain voice conversion (the lambda = 1 degenerate case of mixing).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError};
use crate::dsp::mel::MelSpectrogram;
use crate::dsp::stretch::{pitch_shift, time_stretch};
use crate::manifest::{AugmentationRecord, MaskAxis, MaskRect, WaveformParams};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("feature matrix too small: {0}")]
    FeatureTooSmall(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Raw-signal perturbation ranges. Each transform applies independently with
/// probability 0.5; gain is forced when none is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformAugConfig {
    pub stretch_range: (f64, f64),
    pub pitch_range_semitones: (f64, f64),
    pub gain_range_db: (f64, f64),
    pub apply_probability: f64,
}

impl Default for WaveformAugConfig {
    fn default() -> Self {
        WaveformAugConfig {
            stretch_range: (0.85, 1.15),
            pitch_range_semitones: (-2.0, 2.0),
            gain_range_db: (-6.0, 6.0),
            apply_probability: 0.5,
        }
    }
}

/// Spectrogram masking parameters. Time-mask width is a fraction of the
/// utterance's frames; masked cells take the utterance mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecAugConfig {
    pub num_freq_masks: usize,
    pub max_freq_width: usize,
    pub num_time_masks: usize,
    pub max_time_fraction: f64,
}

impl Default for SpecAugConfig {
    fn default() -> Self {
        SpecAugConfig {
            num_freq_masks: 2,
            max_freq_width: 15,
            num_time_masks: 2,
            max_time_fraction: 0.05,
        }
    }
}

/// Applies stretch / pitch / gain perturbations, each drawn with probability
/// 0.5 in that order. Draws recorded in the provenance record.
pub fn waveform_augment<R: Rng + ?Sized>(
    clip: &AudioClip,
    cfg: &WaveformAugConfig,
    rng: &mut R,
    source_speaker: &str,
) -> Result<(AudioClip, AugmentationRecord), BaselineError> {
    let mut out = clip.clone();
    let mut params = WaveformParams {
        stretch_rate: None,
        pitch_semitones: None,
        gain_db: None,
    };

    let do_stretch = rng.random_bool(cfg.apply_probability);
    if do_stretch {
        let rate = rng.random_range(cfg.stretch_range.0..=cfg.stretch_range.1);
        out = time_stretch(&out, rate)?;
        params.stretch_rate = Some(rate);
    }
    let do_pitch = rng.random_bool(cfg.apply_probability);
    if do_pitch {
        let semis = rng.random_range(cfg.pitch_range_semitones.0..=cfg.pitch_range_semitones.1);
        out = pitch_shift(&out, semis)?;
        params.pitch_semitones = Some(semis);
    }
    let do_gain = rng.random_bool(cfg.apply_probability) || (!do_stretch && !do_pitch);
    if do_gain {
        let db = rng.random_range(cfg.gain_range_db.0..=cfg.gain_range_db.1);
        let gain = 10.0f32.powf(db as f32 / 20.0);
        for s in &mut out.samples {
            *s *= gain;
        }
        if out.peak() > 1.0 {
            out.peak_normalize(1.0);
        }
        params.gain_db = Some(db);
    }

    let record = AugmentationRecord {
        method: "waveform".into(),
        lambda: None,
        weights: None,
        source_speaker: source_speaker.to_string(),
        target_speaker: None,
        target_utt_id: None,
        mixup_speakers: vec![],
        mixup_utt_ids: vec![],
        waveform: Some(params),
        masks: vec![],
    };
    Ok((out, record))
}

/// Masks random frequency bands and time stripes with the utterance mean.
/// Returns the masked features and the mask rectangles actually drawn.
pub fn spec_augment<R: Rng + ?Sized>(
    mel: &MelSpectrogram,
    cfg: &SpecAugConfig,
    rng: &mut R,
) -> Result<(MelSpectrogram, Vec<MaskRect>), BaselineError> {
    let frames = mel.num_frames();
    let bands = mel.num_mel();
    if bands <= cfg.max_freq_width {
        return Err(BaselineError::FeatureTooSmall(format!(
            "{bands} bands <= max freq mask width {}",
            cfg.max_freq_width
        )));
    }
    let max_time_width = (cfg.max_time_fraction * frames as f64).floor() as usize;
    if frames <= max_time_width {
        return Err(BaselineError::FeatureTooSmall(format!(
            "{frames} frames <= max time mask width {max_time_width}"
        )));
    }

    let fill = mel.frames.sum() / (frames * bands) as f64;
    let mut out = mel.clone();
    let mut masks = Vec::new();

    for _ in 0..cfg.num_freq_masks {
        let width = rng.random_range(0..=cfg.max_freq_width);
        let start = rng.random_range(0..=bands - width);
        masks.push(MaskRect {
            axis: MaskAxis::Frequency,
            start,
            width,
        });
        for t in 0..frames {
            for b in start..start + width {
                out.frames[[t, b]] = fill;
            }
        }
    }
    for _ in 0..cfg.num_time_masks {
        let width = rng.random_range(0..=max_time_width);
        let start = rng.random_range(0..=frames - width);
        masks.push(MaskRect {
            axis: MaskAxis::Time,
            start,
            width,
        });
        for t in start..start + width {
            for b in 0..bands {
                out.frames[[t, b]] = fill;
            }
        }
    }
    Ok((out, masks))
}

/// True where a cell lies inside any recorded mask rectangle.
pub fn in_any_mask(masks: &[MaskRect], frame: usize, band: usize) -> bool {
    masks.iter().any(|m| match m.axis {
        MaskAxis::Frequency => band >= m.start && band < m.start + m.width,
        MaskAxis::Time => frame >= m.start && frame < m.start + m.width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::mel::{mel_spectrogram, MelParams};
    use crate::dsp::pitch::f0_track;
    use crate::dsp::{stft, FrameConfig};
    use crate::rng::derive_rng;

    fn sine(freq: f64, len: usize, amp: f32) -> AudioClip {
        let samples: Vec<f32> = (0..len)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin() as f32)
            .collect();
        AudioClip {
            samples,
            sample_rate: 16000,
        }
    }

    fn features(clip: &AudioClip) -> MelSpectrogram {
        let spec = stft(clip, FrameConfig::default()).unwrap();
        mel_spectrogram(&spec, MelParams::features())
    }

    #[test]
    fn forced_gain_applies_known_factor() {
        // Probability 0 for everything forces the gain branch.
        let cfg = WaveformAugConfig {
            apply_probability: 0.0,
            gain_range_db: (6.0, 6.0),
            ..WaveformAugConfig::default()
        };
        let clip = sine(220.0, 8000, 0.3);
        let mut rng = derive_rng(1, 0);
        let (out, record) = waveform_augment(&clip, &cfg, &mut rng, "s").unwrap();
        let factor = 10.0f32.powf(6.0 / 20.0);
        for (a, b) in out.samples.iter().zip(&clip.samples) {
            assert!((a - b * factor).abs() < 1e-6);
        }
        let params = record.waveform.unwrap();
        assert_eq!(params.gain_db, Some(6.0));
        assert!(params.stretch_rate.is_none());
    }

    #[test]
    fn stretch_changes_length_as_drawn() {
        let cfg = WaveformAugConfig {
            apply_probability: 1.0,
            stretch_range: (1.15, 1.15),
            pitch_range_semitones: (0.0, 0.0),
            gain_range_db: (0.0, 0.0),
        };
        let clip = sine(220.0, 16000, 0.4);
        let mut rng = derive_rng(2, 0);
        let (out, record) = waveform_augment(&clip, &cfg, &mut rng, "s").unwrap();
        let expected = (clip.len() as f64 / 1.15).round();
        assert!(
            (out.len() as f64 - expected).abs() <= 400.0,
            "{} vs {expected}",
            out.len()
        );
        assert_eq!(record.waveform.unwrap().stretch_rate, Some(1.15));
    }

    #[test]
    fn pitch_draw_moves_f0() {
        let cfg = WaveformAugConfig {
            apply_probability: 1.0,
            stretch_range: (1.0, 1.0),
            pitch_range_semitones: (2.0, 2.0),
            gain_range_db: (0.0, 0.0),
        };
        let clip = sine(200.0, 16000, 0.4);
        let mut rng = derive_rng(3, 0);
        let (out, _) = waveform_augment(&clip, &cfg, &mut rng, "s").unwrap();
        let frames = f0_track(&out, FrameConfig::default()).unwrap();
        let voiced: Vec<f64> = frames.iter().filter(|f| f.voiced).map(|f| f.f0_hz).collect();
        let mean = voiced.iter().sum::<f64>() / voiced.len() as f64;
        let expected = 200.0 * 2.0f64.powf(2.0 / 12.0);
        assert!((mean - expected).abs() / expected < 0.02, "f0 {mean}");
    }

    #[test]
    fn zero_masks_is_identity() {
        let mel = features(&sine(400.0, 8000, 0.4));
        let cfg = SpecAugConfig {
            num_freq_masks: 0,
            num_time_masks: 0,
            ..SpecAugConfig::default()
        };
        let mut rng = derive_rng(4, 0);
        let (out, masks) = spec_augment(&mel, &cfg, &mut rng).unwrap();
        assert!(masks.is_empty());
        assert_eq!(out.frames, mel.frames);
    }

    #[test]
    fn single_full_width_freq_mask_changes_expected_cell_count() {
        let mel = features(&sine(400.0, 8000, 0.4));
        let cfg = SpecAugConfig {
            num_freq_masks: 1,
            max_freq_width: 15,
            num_time_masks: 0,
            ..SpecAugConfig::default()
        };
        // Find a seed whose single draw has full width.
        let mut chosen = None;
        for i in 0..200 {
            let mut rng = derive_rng(5, i);
            let (out, masks) = spec_augment(&mel, &cfg, &mut rng).unwrap();
            if masks[0].width == 15 {
                chosen = Some((out, masks));
                break;
            }
        }
        let (out, masks) = chosen.expect("a full-width draw among 200 seeds");
        let changed = out
            .frames
            .iter()
            .zip(mel.frames.iter())
            .filter(|(a, b)| a != b)
            .count();
        // The fill value may coincide with a cell's original value, so
        // changed <= 15 * frames, and every change sits inside the mask.
        assert!(changed <= 15 * mel.num_frames());
        assert!(changed > 10 * mel.num_frames());
        for t in 0..mel.num_frames() {
            for b in 0..mel.num_mel() {
                if out.frames[[t, b] ] != mel.frames[[t, b]] {
                    assert!(in_any_mask(&masks, t, b));
                }
            }
        }
    }

    #[test]
    fn changes_confined_to_recorded_masks() {
        let mel = features(&sine(300.0, 9600, 0.4));
        let cfg = SpecAugConfig::default();
        for i in 0..10 {
            let mut rng = derive_rng(6, i);
            let (out, masks) = spec_augment(&mel, &cfg, &mut rng).unwrap();
            for t in 0..mel.num_frames() {
                for b in 0..mel.num_mel() {
                    if out.frames[[t, b]] != mel.frames[[t, b]] {
                        assert!(in_any_mask(&masks, t, b), "stray change at ({t},{b})");
                    }
                }
            }
        }
    }

    #[test]
    fn tiny_features_rejected() {
        let mel = features(&sine(300.0, 8000, 0.4));
        let cfg = SpecAugConfig {
            max_freq_width: mel.num_mel(),
            ..SpecAugConfig::default()
        };
        let mut rng = derive_rng(7, 0);
        assert!(matches!(
            spec_augment(&mel, &cfg, &mut rng),
            Err(BaselineError::FeatureTooSmall(_))
        ));
    }
}
