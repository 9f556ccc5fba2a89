//! JSON Lines corpus manifests and per-utterance augmentation records.
//!
//! One utterance per line. Original entries carry `audio_filepath`; feature
//! outputs (spectrogram masking) carry `features_filepath` instead. Synthetic
//! entries additionally carry an [`AugmentationRecord`] and `source_utt_id`,
//! which together make the speaker-distinctness constraints auditable from
//! the manifest alone.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
    #[error("manifest is empty")]
    EmptyManifest,
}

/// Parameters drawn by the waveform augmenter, for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stretch_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitch_semitones: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_db: Option<f64>,
}

/// One masked rectangle in a feature matrix: rows are frames, cols are bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRect {
    pub axis: MaskAxis,
    pub start: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskAxis {
    Frequency,
    Time,
}

/// Provenance attached to every synthetic utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub source_speaker: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_speaker: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_utt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixup_speakers: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixup_utt_ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waveform: Option<WaveformParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masks: Vec<MaskRect>,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio_filepath: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features_filepath: Option<String>,
    pub text: String,
    pub speaker_id: String,
    pub language: String,
    pub duration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_utt_id: Option<String>,
}

impl ManifestEntry {
    /// The path recorded for this entry (audio or features).
    pub fn recorded_path(&self) -> Option<&str> {
        self.audio_filepath
            .as_deref()
            .or(self.features_filepath.as_deref())
    }

    /// Content-stable utterance id: hash of the recorded relative path.
    pub fn utt_id(&self) -> String {
        utt_id_for_path(self.recorded_path().unwrap_or(""))
    }

    /// Resolves the recorded path against the manifest's directory.
    pub fn resolve_path(&self, manifest_dir: &Path) -> Option<PathBuf> {
        self.recorded_path().map(|p| {
            let path = Path::new(p);
            if path.is_absolute() {
                path.to_path_buf()
            } else {
                manifest_dir.join(path)
            }
        })
    }
}

/// Hash of the path string as written in the manifest; stable across
/// machines and working directories.
pub fn utt_id_for_path(path: &str) -> String {
    let digest = Sha256::digest(path.as_bytes());
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let text = fs::read_to_string(path).map_err(|e| ManifestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| ManifestError::SchemaViolation {
                line: i + 1,
                message: e.to_string(),
            })?;
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(ManifestError::EmptyManifest);
    }
    Ok(entries)
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<(), ManifestError> {
    let file = fs::File::create(path).map_err(|e| ManifestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    for entry in entries {
        let line = serde_json::to_string(entry).expect("entry serializes");
        writeln!(w, "{line}").map_err(|e| ManifestError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| ManifestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

/// Severity-free validation finding.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationIssue {
    pub line: usize,
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Parse,
    Schema,
    MissingPath,
    DurationMismatch,
    DuplicateUttId,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub entries_checked: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            write!(f, "{} entries, no issues", self.entries_checked)
        } else {
            writeln!(f, "{} entries, {} issues:", self.entries_checked, self.issues.len())?;
            for issue in &self.issues {
                writeln!(f, "  line {}: [{:?}] {}", issue.line, issue.kind, issue.message)?;
            }
            Ok(())
        }
    }
}

const DURATION_TOLERANCE_SECS: f64 = 0.05;

/// Per-line schema check, path existence, duration recomputation, and
/// duplicate utterance-id detection.
pub fn validate_manifest(path: &Path) -> Result<ValidationReport, ManifestError> {
    let text = fs::read_to_string(path).map_err(|e| ManifestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut report = ValidationReport::default();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(e) => {
                report.issues.push(ValidationIssue {
                    line: line_no,
                    kind: IssueKind::Parse,
                    message: e.to_string(),
                });
                continue;
            }
        };
        report.entries_checked += 1;

        if entry.text.is_empty() {
            report.issues.push(ValidationIssue {
                line: line_no,
                kind: IssueKind::Schema,
                message: "field `text` is empty".into(),
            });
        }
        if entry.duration <= 0.0 {
            report.issues.push(ValidationIssue {
                line: line_no,
                kind: IssueKind::Schema,
                message: "field `duration` must be positive".into(),
            });
        }
        match (&entry.audio_filepath, &entry.features_filepath) {
            (None, None) => {
                report.issues.push(ValidationIssue {
                    line: line_no,
                    kind: IssueKind::Schema,
                    message: "one of `audio_filepath` or `features_filepath` is required".into(),
                });
                continue;
            }
            (Some(_), Some(_)) => {
                report.issues.push(ValidationIssue {
                    line: line_no,
                    kind: IssueKind::Schema,
                    message: "`audio_filepath` and `features_filepath` are mutually exclusive"
                        .into(),
                });
            }
            _ => {}
        }

        let resolved = entry.resolve_path(&dir).expect("path present");
        if !resolved.exists() {
            report.issues.push(ValidationIssue {
                line: line_no,
                kind: IssueKind::MissingPath,
                message: format!("{} does not exist", resolved.display()),
            });
        } else if entry.audio_filepath.is_some() {
            match crate::audio::load_wav(&resolved) {
                Ok(clip) => {
                    let actual = clip.duration_secs();
                    if (actual - entry.duration).abs() > DURATION_TOLERANCE_SECS {
                        report.issues.push(ValidationIssue {
                            line: line_no,
                            kind: IssueKind::DurationMismatch,
                            message: format!(
                                "recorded {:.3}s, actual {:.3}s",
                                entry.duration, actual
                            ),
                        });
                    }
                }
                Err(e) => {
                    report.issues.push(ValidationIssue {
                        line: line_no,
                        kind: IssueKind::MissingPath,
                        message: format!("audio unreadable: {e}"),
                    });
                }
            }
        }

        let id = entry.utt_id();
        if !seen_ids.insert(id.clone()) {
            report.issues.push(ValidationIssue {
                line: line_no,
                kind: IssueKind::DuplicateUttId,
                message: format!("utterance id {id} already seen"),
            });
        }
    }
    Ok(report)
}
