//! Mel filterbank, log-mel spectrograms, MFCC, and mel-to-linear inversion.
//!
//! HTK mel scale throughout: mel = 2595 * log10(1 + f/700). Log-mel uses a
//! power floor of 1e-10 so silence maps to ln(1e-10) in every band.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::audio::{AudioClip, AudioError};
use crate::dsp::{stft, FrameConfig, Spectrogram};

/// Power floor applied before the log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Mel band count used by the reference codec (mean + std per band fill the
/// first 252 timbre slots).
pub const CODEC_MEL_BANDS: usize = 126;

/// Mel band count for emitted feature files (spectrogram masking baseline).
pub const FEATURE_MEL_BANDS: usize = 80;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10.0f64.powf(m / 2595.0) - 1.0)
}

/// Mel filterbank parameters. Defaults: 50 Hz to 7.6 kHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelParams {
    pub num_mel: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl MelParams {
    pub fn codec() -> Self {
        MelParams {
            num_mel: CODEC_MEL_BANDS,
            f_min: 50.0,
            f_max: 7600.0,
        }
    }

    pub fn features() -> Self {
        MelParams {
            num_mel: FEATURE_MEL_BANDS,
            f_min: 50.0,
            f_max: 7600.0,
        }
    }
}

/// Triangular mel filterbank over one-sided FFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `[num_mel x num_bins]` triangle weights.
    pub weights: Array2<f64>,
    /// Band center frequencies in Hz, monotonically increasing.
    pub centers_hz: Vec<f64>,
    pub params: MelParams,
    pub sample_rate: u32,
    pub fft_size: usize,
    pinv: std::sync::OnceLock<DMatrix<f64>>,
}

impl MelFilterbank {
    /// Builds the filterbank. Every row is guaranteed a positive sum: a band
    /// too narrow to cover any bin center gets unit weight at the bin nearest
    /// its center.
    pub fn new(params: MelParams, sample_rate: u32, fft_size: usize) -> Self {
        assert!(
            params.f_min < params.f_max && params.f_max <= sample_rate as f64 / 2.0,
            "need f_min < f_max <= Nyquist"
        );
        let num_bins = fft_size / 2 + 1;
        let mel_lo = hz_to_mel(params.f_min);
        let mel_hi = hz_to_mel(params.f_max);
        let edges: Vec<f64> = (0..params.num_mel + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (params.num_mel + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / fft_size as f64;

        let mut weights = Array2::<f64>::zeros((params.num_mel, num_bins));
        let mut centers_hz = Vec::with_capacity(params.num_mel);
        for m in 0..params.num_mel {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            centers_hz.push(center);
            let mut row_sum = 0.0;
            for k in 0..num_bins {
                let f = k as f64 * bin_hz;
                let w = if f <= lo || f >= hi {
                    0.0
                } else if f <= center {
                    (f - lo) / (center - lo)
                } else {
                    (hi - f) / (hi - center)
                };
                weights[[m, k]] = w;
                row_sum += w;
            }
            if row_sum == 0.0 {
                let nearest = (center / bin_hz).round() as usize;
                weights[[m, nearest.min(num_bins - 1)]] = 1.0;
            }
        }
        MelFilterbank {
            weights,
            centers_hz,
            params,
            sample_rate,
            fft_size,
            pinv: std::sync::OnceLock::new(),
        }
    }

    /// Applies the filterbank to a power spectrogram and takes the floored log.
    pub fn log_mel(&self, power: &Array2<f64>) -> Array2<f64> {
        assert_eq!(power.ncols(), self.fft_size / 2 + 1);
        let mel = power.dot(&self.weights.t());
        mel.mapv(|p| p.max(LOG_FLOOR).ln())
    }

    /// Least-squares inversion of mel power back to linear power, negatives
    /// clipped to zero. The pseudo-inverse is computed once per filterbank.
    pub fn invert_power(&self, mel_power: &Array2<f64>) -> Array2<f64> {
        let pinv = self.pseudo_inverse();
        let frames = mel_power.nrows();
        let num_bins = self.fft_size / 2 + 1;
        let mut out = Array2::<f64>::zeros((frames, num_bins));
        for t in 0..frames {
            for k in 0..num_bins {
                let mut acc = 0.0;
                for m in 0..self.params.num_mel {
                    acc += pinv[(k, m)] * mel_power[[t, m]];
                }
                out[[t, k]] = acc.max(0.0);
            }
        }
        out
    }

    fn pseudo_inverse(&self) -> &DMatrix<f64> {
        self.pinv.get_or_init(|| {
            let (rows, cols) = (self.weights.nrows(), self.weights.ncols());
            let m = DMatrix::from_fn(rows, cols, |i, j| self.weights[[i, j]]);
            m.svd(true, true)
                .pseudo_inverse(1e-10)
                .expect("svd of filterbank")
        })
    }
}

/// Log-mel spectrogram `[num_frames x num_mel]` with its provenance.
#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    pub frames: Array2<f64>,
    pub params: MelParams,
    pub frame: FrameConfig,
    pub sample_rate: u32,
}

impl MelSpectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn num_mel(&self) -> usize {
        self.frames.ncols()
    }
}

/// Log-mel of a spectrogram under the given band layout.
pub fn mel_spectrogram(spec: &Spectrogram, params: MelParams) -> MelSpectrogram {
    let fb = MelFilterbank::new(params, spec.sample_rate, spec.frame.fft_size);
    MelSpectrogram {
        frames: fb.log_mel(&spec.power()),
        params,
        frame: spec.frame,
        sample_rate: spec.sample_rate,
    }
}

/// MFCCs: orthonormal DCT-II over log-mel bands, keeping coefficients
/// `1..=num_coeffs` (c0 dropped).
pub fn mfcc(clip: &AudioClip, num_coeffs: usize) -> Result<Array2<f64>, AudioError> {
    let frame = FrameConfig::default();
    let spec = stft(clip, frame)?;
    let params = MelParams {
        num_mel: 40,
        f_min: 50.0,
        f_max: 7600.0,
    };
    let mel = mel_spectrogram(&spec, params);
    let n = params.num_mel;
    let frames = mel.num_frames();
    let mut out = Array2::<f64>::zeros((frames, num_coeffs));
    let scale = (2.0 / n as f64).sqrt();
    for t in 0..frames {
        for c in 1..=num_coeffs {
            let mut acc = 0.0;
            for b in 0..n {
                acc += mel.frames[[t, b]]
                    * (std::f64::consts::PI * c as f64 * (2.0 * b as f64 + 1.0) / (2.0 * n as f64))
                        .cos();
            }
            out[[t, c - 1]] = scale * acc;
        }
    }
    Ok(out)
}
