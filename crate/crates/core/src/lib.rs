//! Speech-corpus augmentation by latent timbre mixing.
//!
//! The pipeline factors each utterance into linguistic content and a 255-dim
//! speaker-timbre vector, mixes timbres convexly across speakers
//! (lambda ~ Beta(0.5, 0.5)), and resynthesizes novel voices that inherit
//! the source transcript. Around that core sit the baseline augmenters
//! (waveform perturbation, spectrogram masking, plain voice conversion),
//! WER/gap evaluation, a DTW proxy classifier for directional checks, and
//! PCA-based timbre-distribution analysis.
//!
//! Everything is deterministic: per-output randomness derives from
//! (master seed, output index), synthesis uses zero-phase Griffin-Lim, and
//! runs are byte-identical across repetitions and worker counts.

pub mod analysis;
pub mod audio;
pub mod baseline;
pub mod codec;
pub mod denoise;
pub mod dsp;
pub mod eval;
pub mod manifest;
pub mod mixup;
pub mod pipeline;
pub mod rng;

pub use audio::{load_wav, save_wav, AudioClip, AudioError, PIPELINE_SAMPLE_RATE};
pub use codec::{decode, encode, CodecError, ContentCode, TimbreVector, TIMBRE_DIM};
pub use denoise::{denoise, DenoiseConfig, DenoiseError};
pub use manifest::{AugmentationRecord, ManifestEntry};
pub use mixup::{mix_timbres, mix_timbres_3, sample_lambda, MixupConfig, MixupError};
pub use pipeline::{build_timbre_store, run_augmentation, AugMethod, RunConfig};
