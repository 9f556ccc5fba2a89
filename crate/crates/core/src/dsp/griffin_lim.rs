//! Griffin-Lim phase retrieval from magnitude (or mel) spectrograms.

use ndarray::Array2;
use num_complex::Complex64;

use crate::audio::{AudioClip, AudioError, PEAK_NORM_LEVEL};
use crate::dsp::mel::{MelFilterbank, MelSpectrogram};
use crate::dsp::{istft, stft, FrameConfig, SpecData, Spectrogram};

pub const DEFAULT_ITERATIONS: usize = 32;

/// Reconstructs a waveform from a magnitude spectrogram.
///
/// Phase starts at zero (not random) so the whole pipeline stays
/// deterministic. The output is peak-normalized to 0.95.
pub fn griffin_lim(
    magnitude: &Array2<f64>,
    frame: FrameConfig,
    sample_rate: u32,
    iterations: usize,
) -> Result<AudioClip, AudioError> {
    let mut wave = griffin_lim_raw(magnitude, frame, sample_rate, iterations)?;
    wave.peak_normalize(PEAK_NORM_LEVEL);
    Ok(wave)
}

/// Phase retrieval without the final peak normalization: the output keeps
/// the level the magnitudes imply, which codec decoding needs so that
/// re-extracted band statistics match the decoded target.
pub fn griffin_lim_raw(
    magnitude: &Array2<f64>,
    frame: FrameConfig,
    sample_rate: u32,
    iterations: usize,
) -> Result<AudioClip, AudioError> {
    assert!(iterations >= 1, "need at least one iteration");
    if magnitude.iter().all(|&m| m == 0.0) {
        let len = frame.window_length + frame.hop_length * magnitude.nrows().saturating_sub(1);
        return Ok(AudioClip {
            samples: vec![0.0; len],
            sample_rate,
        });
    }

    let mut estimate = magnitude.mapv(|m| Complex64::new(m, 0.0));
    for _ in 0..iterations {
        let spec = Spectrogram {
            data: SpecData::Complex(estimate),
            frame,
            sample_rate,
        };
        let wave = istft(&spec)?;
        let reanalyzed = stft(&wave, frame)?;
        let phases = match reanalyzed.data {
            SpecData::Complex(m) => m,
            SpecData::Magnitude(_) => unreachable!(),
        };
        estimate = Array2::from_shape_fn(magnitude.raw_dim(), |(t, k)| {
            let c = phases[[t, k]];
            let norm = c.norm();
            if norm > 1e-12 {
                c / norm * magnitude[[t, k]]
            } else {
                Complex64::new(magnitude[[t, k]], 0.0)
            }
        });
    }

    let spec = Spectrogram {
        data: SpecData::Complex(estimate),
        frame,
        sample_rate,
    };
    let mut wave = istft(&spec)?;
    crate::dsp::fade_edges(
        &mut wave.samples,
        (frame.window_length - frame.hop_length) / 2,
    );
    Ok(wave)
}

/// Griffin-Lim from a log-mel spectrogram: invert the filterbank by least
/// squares (negatives clipped), then run phase retrieval on the result.
pub fn griffin_lim_mel(
    mel: &MelSpectrogram,
    fb: &MelFilterbank,
    iterations: usize,
) -> Result<AudioClip, AudioError> {
    assert_eq!(mel.num_mel(), fb.params.num_mel);
    let mel_power = mel.frames.mapv(f64::exp);
    let lin_power = fb.invert_power(&mel_power);
    let magnitude = lin_power.mapv(f64::sqrt);
    griffin_lim(&magnitude, mel.frame, mel.sample_rate, iterations)
}

/// Relative Frobenius distance between a target magnitude and the magnitude
/// of a reconstructed clip.
pub fn spectral_convergence(
    target: &Array2<f64>,
    clip: &AudioClip,
    frame: FrameConfig,
) -> Result<f64, AudioError> {
    let spec = stft(clip, frame)?;
    let mag = spec.magnitude();
    let rows = target.nrows().min(mag.nrows());
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..rows {
        for k in 0..target.ncols() {
            let d = mag[[t, k]] - target[[t, k]];
            num += d * d;
            den += target[[t, k]] * target[[t, k]];
        }
    }
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}
