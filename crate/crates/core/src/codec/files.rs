//! Binary file formats for timbre vectors, content codes, and mel features.
//!
//! All integers are little-endian.
//!
//! - Timbre:  `TIMB` + u16 version + u32 dim (=255) + dim x f32
//! - Content: `CONT` + u16 version + u32 frames + u32 bands +
//!   row-major f32 z_mel + f32 z_logf0[frames] + u8 voicing[frames]
//! - Mel features: `MELF` + u16 version + u32 frames + u32 bands +
//!   row-major f32

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::codec::{CodecError, ContentCode, TimbreVector, TIMBRE_DIM};
use crate::dsp::mel::MelSpectrogram;
use crate::dsp::FrameConfig;

pub const FORMAT_VERSION: u16 = 1;
const TIMBRE_MAGIC: &[u8; 4] = b"TIMB";
const CONTENT_MAGIC: &[u8; 4] = b"CONT";
const MEL_MAGIC: &[u8; 4] = b"MELF";

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<(), CodecError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CodecError::TruncatedFile
        } else {
            CodecError::Io(e)
        }
    })
}

fn read_u16(r: &mut impl Read) -> Result<u16, CodecError> {
    let mut b = [0u8; 2];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32, CodecError> {
    let mut b = [0u8; 4];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32_vec(r: &mut impl Read, n: usize) -> Result<Vec<f32>, CodecError> {
    let mut bytes = vec![0u8; n * 4];
    read_exact_or_truncated(r, &mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn check_magic(
    r: &mut impl Read,
    expected: &'static [u8; 4],
    name: &'static str,
) -> Result<(), CodecError> {
    let mut magic = [0u8; 4];
    read_exact_or_truncated(r, &mut magic)?;
    if &magic != expected {
        return Err(CodecError::BadMagic { expected: name });
    }
    let version = read_u16(r)?;
    if version != FORMAT_VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    Ok(())
}

pub fn save_timbre(timbre: &TimbreVector, path: &Path) -> Result<(), CodecError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TIMBRE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(TIMBRE_DIM as u32).to_le_bytes())?;
    for v in timbre.values() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_timbre(path: &Path) -> Result<TimbreVector, CodecError> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, TIMBRE_MAGIC, "TIMB")?;
    let dim = read_u32(&mut r)? as usize;
    if dim != TIMBRE_DIM {
        return Err(CodecError::WrongDimension(dim));
    }
    let values = read_f32_vec(&mut r, dim)?;
    TimbreVector::new(values.into_iter().map(|v| v as f64).collect())
}

pub fn save_content(content: &ContentCode, path: &Path) -> Result<(), CodecError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CONTENT_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(content.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(content.num_bands() as u32).to_le_bytes())?;
    for v in content.z_mel.iter() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    for v in &content.z_logf0 {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    for &v in &content.voicing {
        w.write_all(&[u8::from(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a content file. Frame geometry is not stored; the pipeline-wide
/// configuration applies.
pub fn load_content(path: &Path) -> Result<ContentCode, CodecError> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, CONTENT_MAGIC, "CONT")?;
    let frames = read_u32(&mut r)? as usize;
    let bands = read_u32(&mut r)? as usize;
    let z_mel_flat = read_f32_vec(&mut r, frames * bands)?;
    let z_logf0 = read_f32_vec(&mut r, frames)?;
    let mut voicing_bytes = vec![0u8; frames];
    read_exact_or_truncated(&mut r, &mut voicing_bytes)?;

    let z_mel = Array2::from_shape_vec(
        (frames, bands),
        z_mel_flat.into_iter().map(|v| v as f64).collect(),
    )
    .expect("shape matches header");
    Ok(ContentCode {
        z_mel,
        z_logf0: z_logf0.into_iter().map(|v| v as f64).collect(),
        voicing: voicing_bytes.into_iter().map(|b| b != 0).collect(),
        frame: FrameConfig::default(),
        sample_rate: crate::audio::PIPELINE_SAMPLE_RATE,
    })
}

pub fn save_mel_features(mel: &MelSpectrogram, path: &Path) -> Result<(), CodecError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(mel.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(mel.num_mel() as u32).to_le_bytes())?;
    for v in mel.frames.iter() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads the raw feature matrix of a `MELF` file.
pub fn load_mel_features(path: &Path) -> Result<Array2<f64>, CodecError> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, MEL_MAGIC, "MELF")?;
    let frames = read_u32(&mut r)? as usize;
    let bands = read_u32(&mut r)? as usize;
    let flat = read_f32_vec(&mut r, frames * bands)?;
    Ok(Array2::from_shape_vec(
        (frames, bands),
        flat.into_iter().map(|v| v as f64).collect(),
    )
    .expect("shape matches header"))
}
