//! Autocorrelation pitch tracking over 60-400 Hz.

use crate::audio::{AudioClip, AudioError};
use crate::dsp::FrameConfig;

pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 400.0;
pub const VOICING_THRESHOLD: f64 = 0.3;

/// One pitch frame: `f0_hz` is meaningful only when `voiced`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchFrame {
    pub f0_hz: f64,
    pub voiced: bool,
}

/// Tracks F0 per frame with the normalized (biased) autocorrelation
/// r(lag)/r(0).
///
/// A frame is voiced when the best normalized correlation over the 60-400 Hz
/// lag range reaches 0.3; the winning lag is refined by parabolic
/// interpolation. Frame geometry matches the rest of the pipeline so pitch
/// frames align one-to-one with spectrogram frames.
pub fn f0_track(clip: &AudioClip, frame: FrameConfig) -> Result<Vec<PitchFrame>, AudioError> {
    let num_frames = frame.num_frames(clip.len()).ok_or(AudioError::ClipTooShort {
        needed: frame.window_length,
        got: clip.len(),
    })?;
    let sr = clip.sample_rate as f64;
    let min_lag = (sr / F0_MAX_HZ).floor() as usize;
    let max_lag = ((sr / F0_MIN_HZ).ceil() as usize).min(frame.window_length - 1);
    let window = frame.window_length;

    let mut out = Vec::with_capacity(num_frames);
    let mut acf = vec![0.0f64; max_lag + 2];
    for t in 0..num_frames {
        let start = t * frame.hop_length;
        let x = &clip.samples[start..start + window];
        let r0: f64 = x.iter().map(|&v| (v as f64) * (v as f64)).sum();
        if r0 < 1e-10 {
            out.push(PitchFrame {
                f0_hz: 0.0,
                voiced: false,
            });
            continue;
        }

        let hi = (max_lag + 1).min(window - 1);
        for (lag, slot) in acf.iter_mut().enumerate().take(hi + 1) {
            let mut acc = 0.0f64;
            for i in 0..window - lag {
                acc += x[i] as f64 * x[i + lag] as f64;
            }
            *slot = acc / r0;
        }

        let (best_lag, best_val) = (min_lag..=max_lag)
            .map(|l| (l, acf[l]))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();

        if best_val < VOICING_THRESHOLD {
            out.push(PitchFrame {
                f0_hz: 0.0,
                voiced: false,
            });
            continue;
        }

        // Parabolic refinement around the winning lag.
        let refined = if best_lag > min_lag && best_lag < max_lag {
            let (l, c, r) = (acf[best_lag - 1], acf[best_lag], acf[best_lag + 1]);
            let denom = l - 2.0 * c + r;
            if denom.abs() > 1e-12 {
                best_lag as f64 + 0.5 * (l - r) / denom
            } else {
                best_lag as f64
            }
        } else {
            best_lag as f64
        };
        out.push(PitchFrame {
            f0_hz: sr / refined,
            voiced: true,
        });
    }
    Ok(out)
}

/// Fraction of frames flagged voiced.
pub fn voiced_fraction(frames: &[PitchFrame]) -> f64 {
    if frames.is_empty() {
        return 0.0;
    }
    frames.iter().filter(|f| f.voiced).count() as f64 / frames.len() as f64
}
