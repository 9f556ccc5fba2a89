//! Timbre mixing: partner selection under speaker-distinctness constraints,
//! Beta-sampled convex combination of timbre vectors, and per-utterance
//! synthesis.
//!
//! The default draw is lambda ~ Beta(0.5, 0.5) (the arcsine law, favoring
//! endpoints), mixing the target speaker's timbre with one partner; a
//! Dirichlet(0.5, 0.5, 0.5) three-way variant mixes two partners. Plain voice
//! conversion is the degenerate lambda = 1 case of the same path.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::codec::external::{external_decode, external_encode, CodecBackend};
use crate::codec::files::{save_content, save_timbre};
use crate::codec::{CodecError, TimbreVector, TIMBRE_DIM};
use crate::denoise::{denoise, DenoiseConfig, DenoiseError};
use crate::manifest::AugmentationRecord;

#[derive(Debug, Error)]
pub enum MixupError {
    #[error("invalid mixup config: {0}")]
    InvalidConfig(String),
    #[error("lambda {0} outside [0, 1]")]
    InvalidLambda(f64),
    #[error("weights do not form a simplex point: {0:?}")]
    WeightsNotSimplex(Vec<f64>),
    #[error("insufficient speakers: need at least {required}, corpus has {available}")]
    InsufficientSpeakers { required: usize, available: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
}

/// Mixing parameters. `num_mixup_timbres` counts the target itself, so 2
/// means one mixup partner and 3 means two (Dirichlet weights).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixupConfig {
    pub alpha: f64,
    pub beta: f64,
    pub num_mixup_timbres: usize,
    pub post_denoise: bool,
    pub source_equals_target: bool,
    /// Draw the target uniformly over speakers instead of utterances.
    pub speaker_uniform_targets: bool,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig {
            alpha: 0.5,
            beta: 0.5,
            num_mixup_timbres: 2,
            post_denoise: true,
            source_equals_target: false,
            speaker_uniform_targets: false,
        }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<(), MixupError> {
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(MixupError::InvalidConfig(
                "alpha and beta must be positive".into(),
            ));
        }
        if !(self.num_mixup_timbres == 2 || self.num_mixup_timbres == 3) {
            return Err(MixupError::InvalidConfig(
                "num_mixup_timbres must be 2 or 3".into(),
            ));
        }
        Ok(())
    }

    /// Distinct speakers the corpus must offer for selection to succeed.
    pub fn required_speakers(&self) -> usize {
        let partners = self.num_mixup_timbres - 1;
        if self.source_equals_target {
            1 + partners
        } else {
            2 + partners
        }
    }
}

/// Draws lambda from Beta(alpha, beta).
///
/// For the arcsine case alpha = beta = 0.5 the closed form
/// `sin^2(pi * u / 2)` is used; otherwise two Gamma draws are normalized.
pub fn sample_lambda<R: Rng + ?Sized>(rng: &mut R, cfg: &MixupConfig) -> f64 {
    if cfg.alpha == 0.5 && cfg.beta == 0.5 {
        let u: f64 = rng.random();
        let s = (std::f64::consts::FRAC_PI_2 * u).sin();
        return s * s;
    }
    let ga = Gamma::new(cfg.alpha, 1.0).expect("validated alpha");
    let gb = Gamma::new(cfg.beta, 1.0).expect("validated beta");
    let x: f64 = ga.sample(rng);
    let y: f64 = gb.sample(rng);
    if x + y == 0.0 {
        return 0.5;
    }
    (x / (x + y)).clamp(0.0, 1.0)
}

/// Draws a 3-simplex point from Dirichlet(0.5, 0.5, 0.5) via normalized
/// Gamma(0.5) draws.
pub fn sample_dirichlet3<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let gamma = Gamma::new(0.5, 1.0).expect("fixed shape");
    let mut draws = [0.0f64; 3];
    for d in &mut draws {
        *d = gamma.sample(rng);
    }
    let sum: f64 = draws.iter().sum();
    if sum == 0.0 {
        return [1.0 / 3.0; 3];
    }
    [draws[0] / sum, draws[1] / sum, draws[2] / sum]
}

fn convex_combine(parts: &[(&TimbreVector, f64)]) -> TimbreVector {
    let mut out = vec![0.0f64; TIMBRE_DIM];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (t, w) in parts {
            let v = t.values()[i];
            acc += w * v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        // Exact in real arithmetic; the clamp absorbs the last-ulp rounding
        // so convexity holds componentwise.
        *slot = acc.clamp(lo, hi);
    }
    TimbreVector::new(out).expect("combination of valid vectors is valid")
}

/// t_mixed = lambda * t_target + (1 - lambda) * t_mixup, componentwise.
pub fn mix_timbres(
    t_target: &TimbreVector,
    t_mixup: &TimbreVector,
    lambda: f64,
) -> Result<TimbreVector, MixupError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(MixupError::InvalidLambda(lambda));
    }
    Ok(convex_combine(&[(t_target, lambda), (t_mixup, 1.0 - lambda)]))
}

/// Three-way mix under explicit simplex weights.
pub fn mix_timbres_3(
    t_target: &TimbreVector,
    t_m1: &TimbreVector,
    t_m2: &TimbreVector,
    weights: [f64; 3],
) -> Result<TimbreVector, MixupError> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(MixupError::WeightsNotSimplex(weights.to_vec()));
    }
    Ok(convex_combine(&[
        (t_target, weights[0]),
        (t_m1, weights[1]),
        (t_m2, weights[2]),
    ]))
}

/// A corpus utterance as the selector sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UttInfo {
    pub utt_id: String,
    pub speaker_id: String,
}

/// The partners chosen for one synthetic output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartnerSelection {
    pub source: UttInfo,
    pub target: UttInfo,
    pub mixup: Vec<UttInfo>,
}

/// Picks a target utterance (different speaker unless the source-equals-
/// target ablation is on) and speaker-distinct mixup partner(s).
///
/// `corpus` must be in a deterministic order; all draws come from `rng`
/// in a fixed sequence (target, then each mixup partner).
pub fn select_partners<R: Rng + ?Sized>(
    corpus: &[UttInfo],
    source: &UttInfo,
    rng: &mut R,
    cfg: &MixupConfig,
) -> Result<PartnerSelection, MixupError> {
    cfg.validate()?;
    let mut speakers: Vec<&str> = corpus.iter().map(|u| u.speaker_id.as_str()).collect();
    speakers.sort_unstable();
    speakers.dedup();
    let available = speakers.len();
    let required = cfg.required_speakers();
    if available < required {
        return Err(MixupError::InsufficientSpeakers {
            required,
            available,
        });
    }

    let target = if cfg.source_equals_target {
        source.clone()
    } else if cfg.speaker_uniform_targets {
        let candidates: Vec<&str> = speakers
            .iter()
            .copied()
            .filter(|s| *s != source.speaker_id)
            .collect();
        let speaker = candidates[rng.random_range(0..candidates.len())];
        let utts: Vec<&UttInfo> = corpus.iter().filter(|u| u.speaker_id == speaker).collect();
        utts[rng.random_range(0..utts.len())].clone()
    } else {
        let candidates: Vec<&UttInfo> = corpus
            .iter()
            .filter(|u| u.speaker_id != source.speaker_id)
            .collect();
        candidates[rng.random_range(0..candidates.len())].clone()
    };

    let mut mixup = Vec::with_capacity(cfg.num_mixup_timbres - 1);
    let mut excluded: Vec<String> = vec![source.speaker_id.clone(), target.speaker_id.clone()];
    for _ in 0..cfg.num_mixup_timbres - 1 {
        let pool: Vec<&UttInfo> = corpus
            .iter()
            .filter(|u| !excluded.contains(&u.speaker_id))
            .collect();
        if pool.is_empty() {
            return Err(MixupError::InsufficientSpeakers {
                required,
                available,
            });
        }
        let pick = pool[rng.random_range(0..pool.len())].clone();
        excluded.push(pick.speaker_id.clone());
        mixup.push(pick);
    }

    Ok(PartnerSelection {
        source: source.clone(),
        target,
        mixup,
    })
}

/// Target-only selection for plain voice conversion: a different-speaker
/// target, no mixup partner. Needs two distinct speakers.
pub fn select_vc_target<R: Rng + ?Sized>(
    corpus: &[UttInfo],
    source: &UttInfo,
    rng: &mut R,
    cfg: &MixupConfig,
) -> Result<PartnerSelection, MixupError> {
    let mut speakers: Vec<&str> = corpus.iter().map(|u| u.speaker_id.as_str()).collect();
    speakers.sort_unstable();
    speakers.dedup();
    if speakers.len() < 2 {
        return Err(MixupError::InsufficientSpeakers {
            required: 2,
            available: speakers.len(),
        });
    }
    let target = if cfg.speaker_uniform_targets {
        let candidates: Vec<&str> = speakers
            .iter()
            .copied()
            .filter(|s| *s != source.speaker_id)
            .collect();
        let speaker = candidates[rng.random_range(0..candidates.len())];
        let utts: Vec<&UttInfo> = corpus.iter().filter(|u| u.speaker_id == speaker).collect();
        utts[rng.random_range(0..utts.len())].clone()
    } else {
        let candidates: Vec<&UttInfo> = corpus
            .iter()
            .filter(|u| u.speaker_id != source.speaker_id)
            .collect();
        candidates[rng.random_range(0..candidates.len())].clone()
    };
    Ok(PartnerSelection {
        source: source.clone(),
        target,
        mixup: vec![],
    })
}

/// What the per-output draw produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixDraw {
    Pair { lambda: f64 },
    Triple { weights: [f64; 3] },
}

/// Combines the selected timbres under the draw.
pub fn mixed_timbre(
    draw: &MixDraw,
    t_target: &TimbreVector,
    t_mixups: &[&TimbreVector],
) -> Result<TimbreVector, MixupError> {
    match draw {
        MixDraw::Pair { lambda } => mix_timbres(t_target, t_mixups[0], *lambda),
        MixDraw::Triple { weights } => {
            mix_timbres_3(t_target, t_mixups[0], t_mixups[1], *weights)
        }
    }
}

/// Full synthesis for one output: denoise the source, encode its content,
/// decode with the mixed timbre, optionally denoise again.
///
/// With an external backend the exchange happens through files under
/// `scratch_dir`; the content file is opaque to us.
pub fn synthesize_with_timbre(
    source: &AudioClip,
    t_mixed: &TimbreVector,
    post_denoise: bool,
    dn_cfg: &DenoiseConfig,
    backend: &CodecBackend,
    scratch_dir: Option<&Path>,
) -> Result<AudioClip, MixupError> {
    let cleaned = denoise(source, dn_cfg)?;
    let out = match backend {
        CodecBackend::Reference => {
            let (content, _) = crate::codec::encode(&cleaned)?;
            crate::codec::decode(&content, t_mixed)?
        }
        CodecBackend::External { .. } => {
            let dir = scratch_dir.ok_or_else(|| {
                MixupError::InvalidConfig("external backend needs a scratch dir".into())
            })?;
            let in_wav = dir.join("in.wav");
            let content = dir.join("content.bin");
            let enc_timbre = dir.join("encoded.timb");
            let mix_timbre_path = dir.join("mixed.timb");
            let out_wav = dir.join("out.wav");
            crate::audio::save_wav(&cleaned, &in_wav).map_err(CodecError::Audio)?;
            external_encode(backend, &in_wav, &content, &enc_timbre)?;
            save_timbre(t_mixed, &mix_timbre_path)?;
            external_decode(backend, &content, &mix_timbre_path, &out_wav)?;
            crate::audio::load_wav(&out_wav).map_err(CodecError::Audio)?
        }
    };
    if post_denoise {
        Ok(denoise(&out, dn_cfg)?)
    } else {
        Ok(out)
    }
}

/// Synthesizes one augmented utterance and its provenance record.
#[allow(clippy::too_many_arguments)]
pub fn augment_utterance(
    source_clip: &AudioClip,
    selection: &PartnerSelection,
    draw: &MixDraw,
    t_target: &TimbreVector,
    t_mixups: &[&TimbreVector],
    method: &str,
    cfg: &MixupConfig,
    dn_cfg: &DenoiseConfig,
    backend: &CodecBackend,
    scratch_dir: Option<&Path>,
) -> Result<(AudioClip, AugmentationRecord), MixupError> {
    let t_mixed = mixed_timbre(draw, t_target, t_mixups)?;
    let clip = synthesize_with_timbre(
        source_clip,
        &t_mixed,
        cfg.post_denoise,
        dn_cfg,
        backend,
        scratch_dir,
    )?;
    let (lambda, weights) = match draw {
        MixDraw::Pair { lambda } => (Some(*lambda), None),
        MixDraw::Triple { weights } => (None, Some(weights.to_vec())),
    };
    let record = AugmentationRecord {
        method: method.to_string(),
        lambda,
        weights,
        source_speaker: selection.source.speaker_id.clone(),
        target_speaker: Some(selection.target.speaker_id.clone()),
        target_utt_id: Some(selection.target.utt_id.clone()),
        mixup_speakers: selection.mixup.iter().map(|u| u.speaker_id.clone()).collect(),
        mixup_utt_ids: selection.mixup.iter().map(|u| u.utt_id.clone()).collect(),
        waveform: None,
        masks: vec![],
    };
    Ok((clip, record))
}

/// Exposed for the content-saving side of the external bridge; the reference
/// codec serializes its own content format.
pub fn save_reference_content(
    content: &crate::codec::ContentCode,
    path: &Path,
) -> Result<(), CodecError> {
    save_content(content, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn timbre_with(slot0: f64, slot1: f64) -> TimbreVector {
        let mut v = vec![0.0f64; TIMBRE_DIM];
        v[0] = slot0;
        v[1] = slot1;
        TimbreVector::new(v).unwrap()
    }

    fn corpus(speakers: &[(&str, usize)]) -> Vec<UttInfo> {
        let mut out = Vec::new();
        for (speaker, count) in speakers {
            for i in 0..*count {
                out.push(UttInfo {
                    utt_id: format!("{speaker}-{i:03}"),
                    speaker_id: speaker.to_string(),
                });
            }
        }
        out.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
        out
    }

    #[test]
    fn lambda_stays_in_unit_interval() {
        let cfg = MixupConfig::default();
        for seed in 0..50 {
            let mut rng = derive_rng(seed, 0);
            let l = sample_lambda(&mut rng, &cfg);
            assert!((0.0..=1.0).contains(&l));
        }
    }

    #[test]
    fn arcsine_moments_match_closed_form() {
        let cfg = MixupConfig::default();
        let mut rng = derive_rng(7, 0);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut below_01 = 0usize;
        for _ in 0..n {
            let l = sample_lambda(&mut rng, &cfg);
            sum += l;
            sum_sq += l * l;
            if l <= 0.1 {
                below_01 += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!((var - 0.125).abs() < 0.005, "variance {var}");
        // Arcsine CDF at 0.1: (2/pi) asin(sqrt(0.1)) = 0.20483...
        let expected = 2.0 / std::f64::consts::PI * (0.1f64.sqrt()).asin();
        let frac = below_01 as f64 / n as f64;
        assert!((frac - expected).abs() < 0.01, "P(l<=0.1) {frac} vs {expected}");
    }

    #[test]
    fn general_beta_mean_matches() {
        let cfg = MixupConfig {
            alpha: 2.0,
            beta: 5.0,
            ..MixupConfig::default()
        };
        let mut rng = derive_rng(11, 0);
        let n = 50_000;
        let mean: f64 = (0..n).map(|_| sample_lambda(&mut rng, &cfg)).sum::<f64>() / n as f64;
        assert!((mean - 2.0 / 7.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn endpoints_are_exact() {
        let a = timbre_with(4.0, 0.0);
        let b = timbre_with(0.0, 8.0);
        let at_one = mix_timbres(&a, &b, 1.0).unwrap();
        assert_eq!(at_one.values(), a.values());
        let at_zero = mix_timbres(&a, &b, 0.0).unwrap();
        assert_eq!(at_zero.values(), b.values());
    }

    #[test]
    fn quarter_mix_is_linear() {
        let a = timbre_with(4.0, 0.0);
        let b = timbre_with(0.0, 8.0);
        let m = mix_timbres(&a, &b, 0.25).unwrap();
        assert!((m.values()[0] - 1.0).abs() < 1e-12);
        assert!((m.values()[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn convexity_holds_componentwise() {
        let mut rng = derive_rng(3, 0);
        for _ in 0..1000 {
            let a = TimbreVector::new(
                (0..TIMBRE_DIM).map(|_| rng.random_range(-8.0..8.0)).collect(),
            )
            .unwrap();
            let b = TimbreVector::new(
                (0..TIMBRE_DIM).map(|_| rng.random_range(-8.0..8.0)).collect(),
            )
            .unwrap();
            let l = sample_lambda(&mut rng, &MixupConfig::default());
            let m = mix_timbres(&a, &b, l).unwrap();
            for i in 0..TIMBRE_DIM {
                let lo = a.values()[i].min(b.values()[i]);
                let hi = a.values()[i].max(b.values()[i]);
                assert!(
                    m.values()[i] >= lo && m.values()[i] <= hi,
                    "slot {i}: {} outside [{lo}, {hi}]",
                    m.values()[i]
                );
            }
        }
    }

    #[test]
    fn three_way_unit_weight_returns_target() {
        let a = timbre_with(3.0, 1.0);
        let b = timbre_with(6.0, 2.0);
        let c = timbre_with(9.0, 3.0);
        let m = mix_timbres_3(&a, &b, &c, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.values(), a.values());
    }

    #[test]
    fn three_way_equal_weights_average() {
        let a = timbre_with(3.0, 0.0);
        let b = timbre_with(6.0, 0.0);
        let c = timbre_with(9.0, 0.0);
        let w = 1.0 / 3.0;
        let m = mix_timbres_3(&a, &b, &c, [w, w, 1.0 - 2.0 * w]).unwrap();
        assert!((m.values()[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn bad_weights_rejected() {
        let a = timbre_with(1.0, 0.0);
        assert!(matches!(
            mix_timbres_3(&a, &a, &a, [0.5, 0.5, 0.5]),
            Err(MixupError::WeightsNotSimplex(_))
        ));
        assert!(matches!(
            mix_timbres_3(&a, &a, &a, [-0.1, 0.6, 0.5]),
            Err(MixupError::WeightsNotSimplex(_))
        ));
    }

    #[test]
    fn dirichlet_means_are_uniform() {
        let mut rng = derive_rng(13, 0);
        let n = 100_000;
        let mut sums = [0.0f64; 3];
        for _ in 0..n {
            let w = sample_dirichlet3(&mut rng);
            for (s, v) in sums.iter_mut().zip(w) {
                *s += v;
            }
        }
        for s in sums {
            let mean = s / n as f64;
            assert!((mean - 1.0 / 3.0).abs() < 0.01, "component mean {mean}");
        }
    }

    #[test]
    fn three_speakers_force_the_remainder() {
        let corpus = corpus(&[("A", 2), ("B", 2), ("C", 2)]);
        let source = corpus.iter().find(|u| u.speaker_id == "A").unwrap().clone();
        let cfg = MixupConfig::default();
        for i in 0..50 {
            let mut rng = derive_rng(1, i);
            let sel = select_partners(&corpus, &source, &mut rng, &cfg).unwrap();
            if sel.target.speaker_id == "B" {
                assert_eq!(sel.mixup[0].speaker_id, "C");
            } else {
                assert_eq!(sel.target.speaker_id, "C");
                assert_eq!(sel.mixup[0].speaker_id, "B");
            }
        }
    }

    #[test]
    fn two_speakers_are_insufficient_by_default() {
        let corpus = corpus(&[("A", 3), ("B", 3)]);
        let source = corpus[0].clone();
        let mut rng = derive_rng(2, 0);
        let err = select_partners(&corpus, &source, &mut rng, &MixupConfig::default()).unwrap_err();
        match err {
            MixupError::InsufficientSpeakers { required, available } => {
                assert_eq!(required, 3);
                assert_eq!(available, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn source_equals_target_allows_two_speakers() {
        let corpus = corpus(&[("A", 3), ("B", 3)]);
        let source = corpus[0].clone();
        let cfg = MixupConfig {
            source_equals_target: true,
            ..MixupConfig::default()
        };
        let mut rng = derive_rng(3, 0);
        let sel = select_partners(&corpus, &source, &mut rng, &cfg).unwrap();
        assert_eq!(sel.target.utt_id, source.utt_id);
        assert_eq!(sel.mixup[0].speaker_id, "B");
    }

    #[test]
    fn target_selection_is_uniform_over_14_speakers() {
        // Equal utterances per speaker, so utterance-uniform selection is
        // speaker-uniform too: each of the 13 non-source speakers at 1/13.
        let names: Vec<String> = (0..14).map(|i| format!("spk{i:02}")).collect();
        let spec: Vec<(&str, usize)> = names.iter().map(|n| (n.as_str(), 5)).collect();
        let corpus = corpus(&spec);
        let source = corpus[0].clone();
        let cfg = MixupConfig::default();
        let mut counts = std::collections::HashMap::new();
        let n = 10_000u64;
        for i in 0..n {
            let mut rng = derive_rng(99, i);
            let sel = select_partners(&corpus, &source, &mut rng, &cfg).unwrap();
            *counts.entry(sel.target.speaker_id).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 13);
        for (speaker, count) in counts {
            let freq = count as f64 / n as f64;
            assert!(
                (freq - 1.0 / 13.0).abs() < 0.01,
                "{speaker} selected at {freq}"
            );
        }
    }

    #[test]
    fn three_way_needs_four_speakers_and_distinct_partners() {
        let corpus3 = corpus(&[("A", 2), ("B", 2), ("C", 2)]);
        let cfg = MixupConfig {
            num_mixup_timbres: 3,
            ..MixupConfig::default()
        };
        let source = corpus3[0].clone();
        let mut rng = derive_rng(4, 0);
        assert!(matches!(
            select_partners(&corpus3, &source, &mut rng, &cfg),
            Err(MixupError::InsufficientSpeakers { required: 4, .. })
        ));

        let corpus4 = corpus(&[("A", 2), ("B", 2), ("C", 2), ("D", 2)]);
        let source = corpus4[0].clone();
        for i in 0..50 {
            let mut rng = derive_rng(5, i);
            let sel = select_partners(&corpus4, &source, &mut rng, &cfg).unwrap();
            let mut all = vec![
                sel.source.speaker_id.clone(),
                sel.target.speaker_id.clone(),
            ];
            all.extend(sel.mixup.iter().map(|u| u.speaker_id.clone()));
            let unique: std::collections::HashSet<_> = all.iter().collect();
            assert_eq!(unique.len(), 4, "speakers not pairwise distinct: {all:?}");
        }
    }

    #[test]
    fn invalid_lambda_rejected() {
        let a = timbre_with(1.0, 0.0);
        assert!(matches!(
            mix_timbres(&a, &a, 1.5),
            Err(MixupError::InvalidLambda(_))
        ));
    }
}
