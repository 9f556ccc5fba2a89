//! Phase-vocoder time stretching and resample-based pitch shifting.

use ndarray::Array2;
use num_complex::Complex64;

use crate::audio::{AudioClip, AudioError};
use crate::dsp::resample::resample;
use crate::dsp::{istft, stft, FrameConfig, SpecData, Spectrogram};

fn wrap_phase(p: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = p % two_pi;
    if x > std::f64::consts::PI {
        x -= two_pi;
    } else if x < -std::f64::consts::PI {
        x += two_pi;
    }
    x
}

/// Time-stretches by `rate` without changing pitch. `rate > 1` shortens the
/// clip: output length is about `input_len / rate`, within one hop.
pub fn time_stretch(clip: &AudioClip, rate: f64) -> Result<AudioClip, AudioError> {
    assert!(rate > 0.0, "rate must be positive");
    let frame = FrameConfig::default();
    let spec = stft(clip, frame)?;
    let frames = match spec.data {
        SpecData::Complex(m) => m,
        SpecData::Magnitude(_) => unreachable!(),
    };
    let in_frames = frames.nrows();
    let num_bins = frames.ncols();
    let out_frames = ((in_frames - 1) as f64 / rate).floor() as usize + 1;

    let expected_advance: Vec<f64> = (0..num_bins)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 * frame.hop_length as f64 / frame.fft_size as f64)
        .collect();

    let mut out = Array2::<Complex64>::zeros((out_frames, num_bins));
    let mut phase: Vec<f64> = (0..num_bins).map(|k| frames[[0, k]].arg()).collect();
    for j in 0..out_frames {
        let pos = j as f64 * rate;
        let i0 = (pos.floor() as usize).min(in_frames - 1);
        let i1 = (i0 + 1).min(in_frames - 1);
        let frac = pos - i0 as f64;
        for k in 0..num_bins {
            let mag = (1.0 - frac) * frames[[i0, k]].norm() + frac * frames[[i1, k]].norm();
            if j > 0 {
                let dphi = if i1 > i0 {
                    wrap_phase(frames[[i1, k]].arg() - frames[[i0, k]].arg() - expected_advance[k])
                } else {
                    0.0
                };
                phase[k] += expected_advance[k] + dphi;
            }
            out[[j, k]] = Complex64::from_polar(mag, phase[k]);
        }
    }

    let stretched = Spectrogram {
        data: SpecData::Complex(out),
        frame,
        sample_rate: clip.sample_rate,
    };
    let mut wave = istft(&stretched)?;
    crate::dsp::fade_edges(
        &mut wave.samples,
        (frame.window_length - frame.hop_length) / 2,
    );
    if wave.peak() > 1.0 {
        wave.peak_normalize(1.0);
    }
    Ok(wave)
}

/// Shifts pitch by `semitones` while keeping duration, by resampling (which
/// scales pitch and duration together) and stretching the duration back.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip, AudioError> {
    let factor = 2.0f64.powf(semitones / 12.0);
    let sr = clip.sample_rate;
    let inner_rate = ((sr as f64 / factor).round() as u32).max(1);
    let resampled = resample(clip, inner_rate)?;
    // Reinterpret at the original rate: pitch and speed scale by sr/inner_rate.
    let shifted = AudioClip {
        samples: resampled.samples,
        sample_rate: sr,
    };
    time_stretch(&shifted, inner_rate as f64 / sr as f64)
}
