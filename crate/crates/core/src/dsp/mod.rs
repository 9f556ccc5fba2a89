//! Shared DSP kernels: STFT/ISTFT, mel filterbank, Griffin-Lim, MFCC,
//! autocorrelation pitch tracking, resampling, and phase-vocoder stretching.
//!
//! All kernels are pure functions over immutable inputs and compute in f64
//! internally; identical inputs produce bitwise-identical outputs.

pub mod griffin_lim;
pub mod mel;
pub mod pitch;
pub mod resample;
pub mod stretch;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::{AudioClip, AudioError};

/// Analysis frame geometry shared by the whole pipeline:
/// 25 ms window, 10 ms hop, 512-point FFT at 16 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub fft_size: usize,
    pub window_length: usize,
    pub hop_length: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            fft_size: 512,
            window_length: 400,
            hop_length: 160,
        }
    }
}

impl FrameConfig {
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn num_frames(&self, num_samples: usize) -> Option<usize> {
        if num_samples < self.window_length {
            None
        } else {
            Some((num_samples - self.window_length) / self.hop_length + 1)
        }
    }

    fn validate(&self) {
        assert!(self.hop_length > 0, "hop must be positive");
        assert!(
            self.hop_length <= self.window_length && self.window_length <= self.fft_size,
            "need hop <= window <= fft_size"
        );
    }
}

/// STFT frames, either complex (invertible) or magnitude-only.
#[derive(Debug, Clone)]
pub enum SpecData {
    Complex(Array2<Complex64>),
    Magnitude(Array2<f64>),
}

/// A spectrogram: `[num_frames x num_bins]` with its frame geometry.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub data: SpecData,
    pub frame: FrameConfig,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        match &self.data {
            SpecData::Complex(m) => m.nrows(),
            SpecData::Magnitude(m) => m.nrows(),
        }
    }

    pub fn num_bins(&self) -> usize {
        match &self.data {
            SpecData::Complex(m) => m.ncols(),
            SpecData::Magnitude(m) => m.ncols(),
        }
    }

    /// Magnitudes regardless of the underlying representation.
    pub fn magnitude(&self) -> Array2<f64> {
        match &self.data {
            SpecData::Complex(m) => m.mapv(|c| c.norm()),
            SpecData::Magnitude(m) => m.clone(),
        }
    }

    /// Power per bin (squared magnitude).
    pub fn power(&self) -> Array2<f64> {
        match &self.data {
            SpecData::Complex(m) => m.mapv(|c| c.norm_sqr()),
            SpecData::Magnitude(m) => m.mapv(|v| v * v),
        }
    }
}

/// Symmetric Hann window of length `n`. Symmetry makes framed statistics
/// invariant under time reversal of frame-aligned clips.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Raised-cosine fade over the first and last `len` samples. Synthesis from
/// modified spectra is unreliable at the overlap-add skirts, where only a
/// sliver of window mass covers each sample.
pub fn fade_edges(samples: &mut [f32], len: usize) {
    let n = samples.len();
    let len = len.min(n / 2);
    for i in 0..len {
        let g = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / len as f64).cos();
        samples[i] *= g as f32;
        samples[n - 1 - i] *= g as f32;
    }
}

/// Short-time Fourier transform with Hann analysis windows.
///
/// Frame `t` covers samples `[t*hop, t*hop + window)`; the windowed frame is
/// zero-padded to `fft_size`. No boundary padding is applied, so
/// `num_frames = (len - window) / hop + 1`.
pub fn stft(clip: &AudioClip, frame: FrameConfig) -> Result<Spectrogram, AudioError> {
    frame.validate();
    let num_frames = frame.num_frames(clip.len()).ok_or(AudioError::ClipTooShort {
        needed: frame.window_length,
        got: clip.len(),
    })?;
    let window = hann_window(frame.window_length);
    let num_bins = frame.num_bins();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(frame.fft_size);
    let mut out = Array2::<Complex64>::zeros((num_frames, num_bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); frame.fft_size];

    for t in 0..num_frames {
        let start = t * frame.hop_length;
        for (i, w) in window.iter().enumerate() {
            buf[i] = Complex64::new(clip.samples[start + i] as f64 * w, 0.0);
        }
        for v in buf.iter_mut().skip(frame.window_length) {
            *v = Complex64::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..num_bins {
            out[[t, k]] = buf[k];
        }
    }

    Ok(Spectrogram {
        data: SpecData::Complex(out),
        frame,
        sample_rate: clip.sample_rate,
    })
}

/// Inverse STFT by weighted overlap-add with synthesis-window normalization.
///
/// For an unmodified spectrogram the interior of the reconstruction matches
/// the input to floating-point precision; half a window at each edge is
/// attenuated by the missing overlap.
pub fn istft(spec: &Spectrogram) -> Result<AudioClip, AudioError> {
    let frames = match &spec.data {
        SpecData::Complex(m) => m,
        SpecData::Magnitude(_) => return Err(AudioError::MagnitudeOnly),
    };
    let frame = spec.frame;
    frame.validate();
    let num_frames = frames.nrows();
    let num_bins = frames.ncols();
    let out_len = frame.window_length + frame.hop_length * num_frames.saturating_sub(1);
    let window = hann_window(frame.window_length);

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(frame.fft_size);
    let mut acc = vec![0.0f64; out_len];
    let mut norm = vec![0.0f64; out_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); frame.fft_size];

    for t in 0..num_frames {
        // Rebuild the full spectrum from the one-sided bins (real signal).
        for k in 0..num_bins {
            buf[k] = frames[[t, k]];
        }
        for k in num_bins..frame.fft_size {
            buf[k] = frames[[t, frame.fft_size - k]].conj();
        }
        ifft.process(&mut buf);
        let start = t * frame.hop_length;
        let scale = 1.0 / frame.fft_size as f64;
        for (i, &w) in window.iter().enumerate() {
            acc[start + i] += buf[i].re * scale * w;
            norm[start + i] += w * w;
        }
    }

    // Flooring the normalizer attenuates, never amplifies, the skirt samples
    // where almost no window mass landed.
    let samples: Vec<f32> = acc
        .iter()
        .zip(&norm)
        .map(|(&a, &n)| if n > 1e-12 { (a / n.max(1e-8)) as f32 } else { 0.0 })
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Relative L2 error between two clips over `range`.
pub fn relative_l2(a: &[f32], b: &[f32], range: std::ops::Range<usize>) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in range {
        let d = a[i] as f64 - b[i] as f64;
        num += d * d;
        den += (a[i] as f64) * (a[i] as f64);
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}
