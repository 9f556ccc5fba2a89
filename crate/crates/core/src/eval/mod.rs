//! Word error rate, the cross-language gap metric, and the proxy classifier.

pub mod dtw;
pub mod proxy;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference is empty after normalization")]
    EmptyReference,
    #[error("pairs manifest is empty")]
    EmptyCorpus,
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    BadPair { line: usize, message: String },
    #[error("insufficient classes or speakers: {0}")]
    InsufficientClasses(String),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
}

/// Edit-distance alignment counts and the derived rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_words: usize,
    pub wer: f64,
}

impl WerBreakdown {
    fn from_counts(s: usize, d: usize, i: usize, n: usize) -> Self {
        WerBreakdown {
            substitutions: s,
            deletions: d,
            insertions: i,
            reference_words: n,
            wer: (s + d + i) as f64 / n as f64,
        }
    }

    pub fn edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Lowercases and collapses whitespace; strips ASCII punctuation when asked.
/// Other orthography is left untouched.
pub fn normalize_text(text: &str, strip_punctuation: bool) -> String {
    let lowered = text.to_lowercase();
    let filtered: String = if strip_punctuation {
        lowered
            .chars()
            .filter(|c| !c.is_ascii_punctuation())
            .collect()
    } else {
        lowered
    };
    filtered.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(text: &str, strip_punctuation: bool) -> Vec<String> {
    normalize_text(text, strip_punctuation)
        .split_whitespace()
        .map(String::from)
        .collect()
}

/// Word error rate by Levenshtein alignment over word tokens, unit costs.
///
/// Ties in the backtrace prefer substitution, then insertion, then deletion.
pub fn wer(
    reference: &str,
    hypothesis: &str,
    strip_punctuation: bool,
) -> Result<WerBreakdown, EvalError> {
    let r = tokens(reference, strip_punctuation);
    let h = tokens(hypothesis, strip_punctuation);
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let (n, m) = (r.len(), h.len());

    let mut dist = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dist[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dist[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            let ins = dist[i][j - 1] + 1;
            let del = dist[i - 1][j] + 1;
            dist[i][j] = sub.min(ins).min(del);
        }
    }

    // Backtrace with the tie preference: substitution/match, insert, delete.
    let (mut i, mut j) = (n, m);
    let (mut subs, mut dels, mut inss) = (0usize, 0usize, 0usize);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let cost = usize::from(r[i - 1] != h[j - 1]);
            if dist[i][j] == dist[i - 1][j - 1] + cost {
                if cost == 1 {
                    subs += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dist[i][j] == dist[i][j - 1] + 1 {
            inss += 1;
            j -= 1;
            continue;
        }
        dels += 1;
        i -= 1;
    }

    Ok(WerBreakdown::from_counts(subs, dels, inss, n))
}

/// One reference/hypothesis pair in a pairs manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerPair {
    pub reference: String,
    pub hypothesis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utt_id: Option<String>,
}

/// Pooled corpus WER: summed error counts over summed reference words, not
/// the mean of per-utterance rates.
pub fn corpus_wer(pairs: &[WerPair], strip_punctuation: bool) -> Result<WerBreakdown, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let (mut s, mut d, mut i, mut n) = (0usize, 0usize, 0usize, 0usize);
    for pair in pairs {
        let b = wer(&pair.reference, &pair.hypothesis, strip_punctuation)?;
        s += b.substitutions;
        d += b.deletions;
        i += b.insertions;
        n += b.reference_words;
    }
    Ok(WerBreakdown::from_counts(s, d, i, n))
}

/// WER difference between a low-resource and a high-resource evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub wer_low: f64,
    pub wer_high: f64,
    pub gap: f64,
}

pub fn gap(
    low: &[WerPair],
    high: &[WerPair],
    strip_punctuation: bool,
) -> Result<GapReport, EvalError> {
    let wer_low = corpus_wer(low, strip_punctuation)?.wer;
    let wer_high = corpus_wer(high, strip_punctuation)?.wer;
    Ok(GapReport {
        wer_low,
        wer_high,
        gap: wer_low - wer_high,
    })
}

/// Loads a JSON Lines pairs manifest (`reference`, `hypothesis`, optional
/// `utt_id`).
pub fn load_pairs(path: &Path) -> Result<Vec<WerPair>, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: WerPair = serde_json::from_str(line).map_err(|e| EvalError::BadPair {
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Builds pairs from two line-aligned plain-text files.
pub fn pairs_from_text_files(refs: &Path, hyps: &Path) -> Result<Vec<WerPair>, EvalError> {
    let read = |p: &Path| -> Result<Vec<String>, EvalError> {
        Ok(fs::read_to_string(p)
            .map_err(|e| EvalError::Io {
                path: p.display().to_string(),
                source: e,
            })?
            .lines()
            .map(String::from)
            .collect())
    };
    let r = read(refs)?;
    let h = read(hyps)?;
    if r.len() != h.len() {
        return Err(EvalError::BadPair {
            line: r.len().min(h.len()) + 1,
            message: format!("{} references but {} hypotheses", r.len(), h.len()),
        });
    }
    Ok(r.into_iter()
        .zip(h)
        .map(|(reference, hypothesis)| WerPair {
            reference,
            hypothesis,
            utt_id: None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Independent edit-distance oracle: plain cost matrix, no traceback.
    fn edit_distance_oracle(r: &[&str], h: &[&str]) -> usize {
        let (n, m) = (r.len(), h.len());
        let mut prev: Vec<usize> = (0..=m).collect();
        for i in 1..=n {
            let mut row = vec![i; m + 1];
            for j in 1..=m {
                let sub = prev[j - 1] + usize::from(r[i - 1] != h[j - 1]);
                row[j] = sub.min(prev[j] + 1).min(row[j - 1] + 1);
            }
            prev = row;
        }
        prev[m]
    }

    #[test]
    fn identical_strings_have_zero_wer() {
        let b = wer("the cat sat", "the cat sat", false).unwrap();
        assert_eq!(b.wer, 0.0);
        assert_eq!(b.edits(), 0);
    }

    #[test]
    fn known_alignment_counts() {
        let b = wer("a b c d", "a x c", false).unwrap();
        assert_eq!(b.substitutions, 1);
        assert_eq!(b.deletions, 1);
        assert_eq!(b.insertions, 0);
        assert_eq!(b.wer, 0.5);
    }

    #[test]
    fn empty_hypothesis_is_all_deletions() {
        let b = wer("one two three four", "", false).unwrap();
        assert_eq!(b.deletions, 4);
        assert_eq!(b.wer, 1.0);
    }

    #[test]
    fn empty_reference_rejected() {
        assert!(matches!(
            wer("", "anything", false),
            Err(EvalError::EmptyReference)
        ));
        assert!(matches!(
            wer("...", "anything", true),
            Err(EvalError::EmptyReference)
        ));
    }

    #[test]
    fn normalization_lowercases_and_collapses() {
        let b = wer("The  CAT\tsat", "the cat sat", false).unwrap();
        assert_eq!(b.wer, 0.0);
    }

    #[test]
    fn punctuation_kept_unless_flagged() {
        let with = wer("stop.", "stop", false).unwrap();
        assert_eq!(with.substitutions, 1);
        let without = wer("stop.", "stop", true).unwrap();
        assert_eq!(without.edits(), 0);
    }

    #[test]
    fn dp_matches_oracle_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let alphabet = ["a", "b", "c", "d", "e"];
        for _ in 0..10_000 {
            let n = rng.random_range(1..=8);
            let m = rng.random_range(0..=8);
            let r: Vec<&str> = (0..n).map(|_| alphabet[rng.random_range(0..5)]).collect();
            let h: Vec<&str> = (0..m).map(|_| alphabet[rng.random_range(0..5)]).collect();
            let b = wer(&r.join(" "), &h.join(" "), false).unwrap();
            let oracle = edit_distance_oracle(&r, &h);
            assert_eq!(
                b.edits(),
                oracle,
                "ref {:?} hyp {:?}: {} vs oracle {}",
                r,
                h,
                b.edits(),
                oracle
            );
        }
    }

    #[test]
    fn corpus_wer_pools_counts() {
        let pairs = vec![
            WerPair {
                reference: "a b".into(),
                hypothesis: "a x".into(),
                utt_id: None,
            },
            WerPair {
                reference: "c d".into(),
                hypothesis: "c d".into(),
                utt_id: None,
            },
        ];
        let b = corpus_wer(&pairs, false).unwrap();
        assert_eq!(b.wer, 0.25);
    }

    #[test]
    fn single_pair_corpus_equals_pair_wer() {
        let pair = WerPair {
            reference: "x y z".into(),
            hypothesis: "x z".into(),
            utt_id: None,
        };
        let single = wer(&pair.reference, &pair.hypothesis, false).unwrap();
        let pooled = corpus_wer(std::slice::from_ref(&pair), false).unwrap();
        assert_eq!(single.wer, pooled.wer);
    }

    #[test]
    fn pooled_wer_lies_between_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let alphabet = ["a", "b", "c"];
        for _ in 0..50 {
            let pairs: Vec<WerPair> = (0..5)
                .map(|_| {
                    let n = rng.random_range(1..=6);
                    let m = rng.random_range(0..=6);
                    WerPair {
                        reference: (0..n)
                            .map(|_| alphabet[rng.random_range(0..3)])
                            .collect::<Vec<_>>()
                            .join(" "),
                        hypothesis: (0..m)
                            .map(|_| alphabet[rng.random_range(0..3)])
                            .collect::<Vec<_>>()
                            .join(" "),
                        utt_id: None,
                    }
                })
                .collect();
            let pooled = corpus_wer(&pairs, false).unwrap().wer;
            let rates: Vec<f64> = pairs
                .iter()
                .map(|p| wer(&p.reference, &p.hypothesis, false).unwrap().wer)
                .collect();
            let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = rates.iter().cloned().fold(0.0f64, f64::max);
            assert!(pooled >= lo - 1e-12 && pooled <= hi + 1e-12);
        }
    }

    /// Builds a pairs list whose pooled WER is exactly errors/words.
    fn pairs_with_rate(errors: usize, words: usize) -> Vec<WerPair> {
        let reference: Vec<String> = (0..words).map(|i| format!("w{i}")).collect();
        let hypothesis: Vec<String> = reference[errors..].to_vec();
        vec![WerPair {
            reference: reference.join(" "),
            hypothesis: hypothesis.join(" "),
            utt_id: None,
        }]
    }

    #[test]
    fn gap_arithmetic_matches_published_rows() {
        // 0.796 - 0.562 = 0.234 and 0.725 - 0.550 = 0.175.
        let low = pairs_with_rate(796, 1000);
        let high = pairs_with_rate(562, 1000);
        let g = gap(&low, &high, false).unwrap();
        assert!((g.wer_low - 0.796).abs() < 1e-12);
        assert!((g.wer_high - 0.562).abs() < 1e-12);
        assert!((g.gap - 0.234).abs() < 1e-12);

        let low = pairs_with_rate(725, 1000);
        let high = pairs_with_rate(550, 1000);
        let g = gap(&low, &high, false).unwrap();
        assert!((g.gap - 0.175).abs() < 1e-12);
    }

    #[test]
    fn gap_of_identical_manifests_is_zero() {
        let pairs = pairs_with_rate(3, 10);
        let g = gap(&pairs, &pairs, false).unwrap();
        assert_eq!(g.gap, 0.0);
    }
}
