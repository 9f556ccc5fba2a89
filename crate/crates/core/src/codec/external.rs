//! Bridge to an external codec process.
//!
//! The pipeline shells out per call with a fixed argv contract:
//!
//! ```text
//! <cmd> encode <in.wav> <content.out> <timbre.out>
//! <cmd> decode <content.in> <timbre.in> <out.wav>
//! ```
//!
//! The content file is opaque and owned by the backend; the timbre file must
//! be a 255-dim vector in the shared binary format, since it is the currency
//! timbre mixing operates on.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::codec::files::load_timbre;
use crate::codec::{CodecError, TimbreVector};

/// Which codec realizes encode/decode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CodecBackend {
    /// The in-process deterministic reference codec.
    Reference,
    /// An external command implementing the bridge contract.
    External { command: String },
}

impl Default for CodecBackend {
    fn default() -> Self {
        CodecBackend::Reference
    }
}

impl CodecBackend {
    pub fn is_external(&self) -> bool {
        matches!(self, CodecBackend::External { .. })
    }

    /// Splits the command template into program + leading arguments.
    pub fn command_parts(&self) -> Result<Vec<String>, CodecError> {
        match self {
            CodecBackend::Reference => Ok(vec![]),
            CodecBackend::External { command } => {
                let parts: Vec<String> = command.split_whitespace().map(String::from).collect();
                if parts.is_empty() {
                    return Err(CodecError::BackendLaunchFailure {
                        command: command.clone(),
                        source: std::io::Error::new(
                            std::io::ErrorKind::InvalidInput,
                            "empty backend command",
                        ),
                    });
                }
                Ok(parts)
            }
        }
    }
}

fn run_backend(parts: &[String], args: &[&Path]) -> Result<(), CodecError> {
    let mut cmd = Command::new(&parts[0]);
    for extra in &parts[1..] {
        cmd.arg(extra);
    }
    for a in args {
        cmd.arg(a);
    }
    let output = cmd.output().map_err(|e| CodecError::BackendLaunchFailure {
        command: parts.join(" "),
        source: e,
    })?;
    if !output.status.success() {
        return Err(CodecError::BackendNonZeroExit {
            status: output.status.code().unwrap_or(-1),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }
    Ok(())
}

/// Runs the backend's encode step and validates the produced timbre.
pub fn external_encode(
    backend: &CodecBackend,
    in_wav: &Path,
    content_out: &Path,
    timbre_out: &Path,
) -> Result<TimbreVector, CodecError> {
    let parts = backend.command_parts()?;
    run_backend(
        &parts,
        &[Path::new("encode"), in_wav, content_out, timbre_out],
    )?;
    load_timbre(timbre_out).map_err(|e| match e {
        CodecError::WrongDimension(d) => {
            CodecError::BadTimbreFromBackend(format!("{d} dimensions"))
        }
        CodecError::BadMagic { .. } | CodecError::TruncatedFile | CodecError::NonFinite(_) => {
            CodecError::BadTimbreFromBackend(e.to_string())
        }
        other => other,
    })
}

/// Runs the backend's decode step; the caller loads the produced wav.
pub fn external_decode(
    backend: &CodecBackend,
    content_in: &Path,
    timbre_in: &Path,
    out_wav: &Path,
) -> Result<(), CodecError> {
    let parts = backend.command_parts()?;
    run_backend(
        &parts,
        &[Path::new("decode"), content_in, timbre_in, out_wav],
    )?;
    if !out_wav.exists() {
        return Err(CodecError::BackendNonZeroExit {
            status: 0,
            stderr: format!("backend wrote no output at {}", out_wav.display()),
        });
    }
    Ok(())
}

/// Scratch paths for one backend invocation, grouped under a directory the
/// caller owns.
pub fn scratch_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{stem}.cont")),
        dir.join(format!("{stem}.timb")),
        dir.join(format!("{stem}.wav")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::files::save_timbre;
    use crate::codec::TIMBRE_DIM;
    use std::os::unix::fs::PermissionsExt;

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("timbremix-external-tests").join(name);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn write_script(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("backend.sh");
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        let mut perms = std::fs::metadata(&path).unwrap().permissions();
        perms.set_mode(0o755);
        std::fs::set_permissions(&path, perms).unwrap();
        path
    }

    #[test]
    fn nonzero_exit_captures_stderr() {
        let dir = tmp_dir("exit1");
        let script = write_script(&dir, "echo boom >&2\nexit 1");
        let backend = CodecBackend::External {
            command: script.display().to_string(),
        };
        let err = external_encode(
            &backend,
            Path::new("/dev/null"),
            &dir.join("c"),
            &dir.join("t"),
        )
        .unwrap_err();
        match err {
            CodecError::BackendNonZeroExit { status, stderr } => {
                assert_eq!(status, 1);
                assert!(stderr.contains("boom"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_program_is_launch_failure() {
        let backend = CodecBackend::External {
            command: "/nonexistent/backend-program".into(),
        };
        let err = external_encode(
            &backend,
            Path::new("/dev/null"),
            Path::new("/tmp/c"),
            Path::new("/tmp/t"),
        )
        .unwrap_err();
        assert!(matches!(err, CodecError::BackendLaunchFailure { .. }));
    }

    #[test]
    fn wrong_dimension_timbre_is_rejected() {
        let dir = tmp_dir("baddim");
        // A timbre file claiming 256 dimensions.
        let bad = dir.join("template.timb");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TIMB");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&256u32.to_le_bytes());
        bytes.extend(std::iter::repeat_n(0u8, 256 * 4));
        std::fs::write(&bad, &bytes).unwrap();

        let script = write_script(&dir, &format!("cp {} \"$4\"", bad.display()));
        let backend = CodecBackend::External {
            command: script.display().to_string(),
        };
        let err = external_encode(
            &backend,
            Path::new("/dev/null"),
            &dir.join("c"),
            &dir.join("t.timb"),
        )
        .unwrap_err();
        assert!(matches!(err, CodecError::BadTimbreFromBackend(_)));
    }

    #[test]
    fn valid_backend_timbre_loads() {
        let dir = tmp_dir("ok");
        let template = dir.join("template.timb");
        let t = TimbreVector::new(vec![0.25; TIMBRE_DIM]).unwrap();
        save_timbre(&t, &template).unwrap();
        let script = write_script(
            &dir,
            &format!("touch \"$3\"\ncp {} \"$4\"", template.display()),
        );
        let backend = CodecBackend::External {
            command: script.display().to_string(),
        };
        let loaded = external_encode(
            &backend,
            Path::new("/dev/null"),
            &dir.join("c"),
            &dir.join("t.timb"),
        )
        .unwrap();
        assert_eq!(loaded.values()[0], 0.25);
    }
}
