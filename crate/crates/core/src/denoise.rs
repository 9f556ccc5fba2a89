//! Stationary spectral-gating noise reduction.
//!
//! A whole-clip noise profile is estimated per frequency bin, a soft sigmoid
//! gate attenuates cells near or below it, and the mask is box-smoothed to
//! avoid musical-noise artifacts before resynthesis.

use ndarray::Array2;
use thiserror::Error;

use crate::audio::{AudioClip, AudioError};
use crate::dsp::{istft, stft, FrameConfig, SpecData, Spectrogram};

#[derive(Debug, Error)]
pub enum DenoiseError {
    #[error("invalid denoise config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Spectral gate parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    /// Quantile of per-bin dB magnitudes taken as the noise floor.
    pub percentile_for_noise_floor: f64,
    /// Gate threshold sits this many lowest-quartile standard deviations
    /// above the floor.
    pub threshold_std_multiplier: f64,
    /// Box-smoothing extent across frequency bins (odd).
    pub smoothing_freq_bins: usize,
    /// Box-smoothing extent across time frames (odd).
    pub smoothing_time_frames: usize,
    /// Deepest attenuation the mask may apply, in dB (negative).
    pub attenuation_floor_db: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            percentile_for_noise_floor: 0.20,
            threshold_std_multiplier: 1.5,
            smoothing_freq_bins: 3,
            smoothing_time_frames: 5,
            attenuation_floor_db: -30.0,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<(), DenoiseError> {
        if !(self.percentile_for_noise_floor > 0.0 && self.percentile_for_noise_floor < 1.0) {
            return Err(DenoiseError::InvalidConfig(
                "percentile must lie in (0, 1)".into(),
            ));
        }
        if self.threshold_std_multiplier <= 0.0 {
            return Err(DenoiseError::InvalidConfig(
                "threshold multiplier must be positive".into(),
            ));
        }
        for (name, v) in [
            ("freq smoothing", self.smoothing_freq_bins),
            ("time smoothing", self.smoothing_time_frames),
        ] {
            if v == 0 || v % 2 == 0 {
                return Err(DenoiseError::InvalidConfig(format!(
                    "{name} extent must be an odd positive integer"
                )));
            }
        }
        Ok(())
    }
}

const MIN_FRAMES: usize = 10;
const SIGMOID_SLOPE_DB: f64 = 3.0;
const DB_FLOOR_MAG: f64 = 1e-10;

fn db(mag: f64) -> f64 {
    20.0 * mag.max(DB_FLOOR_MAG).log10()
}

/// Linear interpolation quantile of an unsorted slice.
fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        values[lo]
    } else {
        values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
    }
}

/// Separable box smoothing; edges average over the in-range neighborhood.
fn box_smooth(mask: &Array2<f64>, time_extent: usize, freq_extent: usize) -> Array2<f64> {
    let (frames, bins) = mask.dim();
    let ht = time_extent / 2;
    let hf = freq_extent / 2;
    let mut tmp = Array2::<f64>::zeros((frames, bins));
    for t in 0..frames {
        let t0 = t.saturating_sub(ht);
        let t1 = (t + ht).min(frames - 1);
        for k in 0..bins {
            let mut acc = 0.0;
            for ti in t0..=t1 {
                acc += mask[[ti, k]];
            }
            tmp[[t, k]] = acc / (t1 - t0 + 1) as f64;
        }
    }
    let mut out = Array2::<f64>::zeros((frames, bins));
    for t in 0..frames {
        for k in 0..bins {
            let k0 = k.saturating_sub(hf);
            let k1 = (k + hf).min(bins - 1);
            let mut acc = 0.0;
            for ki in k0..=k1 {
                acc += tmp[[t, ki]];
            }
            out[[t, k]] = acc / (k1 - k0 + 1) as f64;
        }
    }
    out
}

/// Width of the median filter applied to the noise-floor profile across
/// frequency. A narrowband stationary signal would otherwise define its own
/// floor and gate itself; the median lets the surrounding bins set it.
const FLOOR_MEDIAN_BINS: usize = 31;

fn median_filter(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    let mut window = Vec::with_capacity(width);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        window.clear();
        window.extend_from_slice(&values[lo..=hi]);
        window.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(window[window.len() / 2]);
    }
    out
}

/// Computes the smoothed gate mask for a magnitude matrix. Exposed for tests.
pub fn gate_mask(mag: &Array2<f64>, cfg: &DenoiseConfig) -> Array2<f64> {
    let (frames, bins) = mag.dim();
    let mask_floor = 10.0f64.powf(cfg.attenuation_floor_db / 20.0);

    let mut floors = Vec::with_capacity(bins);
    let mut stds = Vec::with_capacity(bins);
    let mut all_db = Array2::<f64>::zeros((frames, bins));
    for k in 0..bins {
        let col_db: Vec<f64> = (0..frames).map(|t| db(mag[[t, k]])).collect();
        for (t, &v) in col_db.iter().enumerate() {
            all_db[[t, k]] = v;
        }
        let mut sorted = col_db.clone();
        floors.push(quantile(&mut sorted, cfg.percentile_for_noise_floor));
        let quartile = quantile(&mut sorted, 0.25);
        let low: Vec<f64> = col_db.iter().copied().filter(|&v| v <= quartile).collect();
        let std = if low.len() > 1 {
            let mean = low.iter().sum::<f64>() / low.len() as f64;
            (low.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / low.len() as f64).sqrt()
        } else {
            0.0
        };
        stds.push(std);
    }
    let floors = median_filter(&floors, FLOOR_MEDIAN_BINS);

    let mut mask = Array2::<f64>::zeros((frames, bins));
    for k in 0..bins {
        let threshold = floors[k] + cfg.threshold_std_multiplier * stds[k];
        for t in 0..frames {
            let gate = 1.0 / (1.0 + (-(all_db[[t, k]] - threshold) / SIGMOID_SLOPE_DB).exp());
            mask[[t, k]] = gate.clamp(mask_floor, 1.0);
        }
    }
    box_smooth(&mask, cfg.smoothing_time_frames, cfg.smoothing_freq_bins)
}

/// Denoises a clip with stationary spectral gating. Output length equals
/// input length.
pub fn denoise(clip: &AudioClip, cfg: &DenoiseConfig) -> Result<AudioClip, DenoiseError> {
    cfg.validate()?;
    let frame = FrameConfig::default();
    let needed = frame.window_length + frame.hop_length * (MIN_FRAMES - 1);
    if clip.len() < needed {
        return Err(DenoiseError::Audio(AudioError::ClipTooShort {
            needed,
            got: clip.len(),
        }));
    }

    let spec = stft(clip, frame)?;
    let complex = match &spec.data {
        SpecData::Complex(m) => m,
        SpecData::Magnitude(_) => unreachable!(),
    };
    let mag = spec.magnitude();
    let mask = gate_mask(&mag, cfg);

    let gated = complex * &mask.mapv(|m| num_complex::Complex64::new(m, 0.0));
    let out = istft(&Spectrogram {
        data: SpecData::Complex(gated),
        frame,
        sample_rate: clip.sample_rate,
    })?;

    // Fade the overlap-add skirts before padding back to input length.
    let mut samples = out.samples;
    crate::dsp::fade_edges(
        &mut samples,
        (frame.window_length - frame.hop_length) / 2,
    );
    samples.resize(clip.len(), 0.0);
    Ok(AudioClip {
        samples,
        sample_rate: clip.sample_rate,
    })
}
