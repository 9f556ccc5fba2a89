//! Audio clip type and RIFF/WAVE I/O.
//!
//! Everything downstream operates on mono float clips in [-1, 1]. Loading
//! collapses stereo to mono and rescales integer PCM by 1/32768; saving
//! emits 16-bit PCM.

use std::io;
use std::path::Path;

use thiserror::Error;

/// The canonical pipeline sample rate. Every entry point resamples to this.
pub const PIPELINE_SAMPLE_RATE: u32 = 16_000;

/// Peak level applied when normalizing synthesized or clipped audio.
pub const PEAK_NORM_LEVEL: f32 = 0.95;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("clip too short: need at least {needed} samples, got {got}")]
    ClipTooShort { needed: usize, got: usize },
    #[error("spectrogram carries magnitudes only; phase is required")]
    MagnitudeOnly,
    #[error("invalid sample rate: {0}")]
    InvalidSampleRate(u32),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("wav error: {0}")]
    Wav(String),
}

/// A mono audio buffer. Samples are finite and bounded by [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, peak-normalizing if any sample exceeds 1 in magnitude.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate(sample_rate));
        }
        let mut clip = AudioClip {
            samples,
            sample_rate,
        };
        if clip.samples.iter().any(|s| !s.is_finite()) {
            return Err(AudioError::Wav("non-finite sample".into()));
        }
        clip.normalize_if_clipping();
        Ok(clip)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum()
    }

    /// Rescales so the peak sits at `level`. Silence is left untouched.
    pub fn peak_normalize(&mut self, level: f32) {
        let peak = self.peak();
        if peak > 0.0 {
            let gain = level / peak;
            for s in &mut self.samples {
                *s *= gain;
            }
        }
    }

    fn normalize_if_clipping(&mut self) {
        if self.peak() > 1.0 {
            self.peak_normalize(1.0);
        }
    }
}

/// Loads a RIFF/WAVE file (PCM16 or IEEE float32, 1-2 channels) as a mono clip.
///
/// Multi-channel input is averaged. 16-bit samples are scaled by 1/32768, so
/// the most negative code maps to exactly -1.0.
pub fn load_wav(path: &Path) -> Result<AudioClip, AudioError> {
    if !path.exists() {
        return Err(AudioError::MissingFile(path.display().to_string()));
    }
    let mut reader = hound::WavReader::open(path).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels (want 1-2)",
            spec.channels
        )));
    }
    let channels = spec.channels as usize;
    let raw: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "{fmt:?} at {bits} bits (want PCM16 or float32)"
            )))
        }
    };
    let mono: Vec<f32> = raw
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect();
    AudioClip::new(mono, spec.sample_rate)
}

/// Writes a clip as mono 16-bit PCM.
pub fn save_wav(clip: &AudioClip, path: &Path) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_hound)?;
    for &s in &clip.samples {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)?;
    Ok(())
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) => AudioError::Io(e),
        hound::Error::Unsupported => {
            AudioError::UnsupportedEncoding("unsupported wav layout".into())
        }
        hound::Error::FormatError(m) => AudioError::UnsupportedEncoding(m.to_string()),
        other => AudioError::Wav(other.to_string()),
    }
}
