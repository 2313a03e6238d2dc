//! Binary feature files.
//!
//! Layout, all little-endian:
//!
//! | offset | size  | field                          |
//! |--------|-------|--------------------------------|
//! | 0      | 4     | magic `VCFT`                   |
//! | 4      | 4     | version (u32) = 1              |
//! | 8      | 4     | D, frame dimension (u32)       |
//! | 12     | 4     | T, frame count (u32)           |
//! | 16     | 4·T·D | f32 values, frame-major        |
//!
//! Values are held as f64 in memory and narrowed to f32 on write, so a
//! read→write cycle is bit-exact while write→read is exact only for values
//! representable in f32.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::sequence::{FeatureKind, FeatureSequence};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"VCFT";
pub const FEATURE_VERSION: u32 = 1;
pub const FEATURE_HEADER_LEN: usize = 16;

pub fn encode_feature(seq: &FeatureSequence) -> Result<Vec<u8>> {
    let (t, d) = seq.frames().dim();
    let mut buf = Vec::with_capacity(FEATURE_HEADER_LEN + 4 * t * d);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&to_u32(d, "dimension")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(t, "frame count")?.to_le_bytes());
    for &v in seq.frames().iter() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::Validation(format!(
                "value {v} is not representable as a finite f32"
            )));
        }
        buf.extend_from_slice(&narrow.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_feature(bytes: &[u8], kind: FeatureKind) -> Result<FeatureSequence> {
    if bytes.len() < 4 {
        return Err(Error::Corrupt(format!(
            "feature file too short for magic ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::Format(format!(
            "bad feature magic {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(Error::Corrupt("truncated feature header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!(
            "unsupported feature version {version}"
        )));
    }
    let d = word(8) as usize;
    let t = word(12) as usize;
    let expected = t
        .checked_mul(d)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Corrupt("feature header size overflow".into()))?;
    let payload = &bytes[FEATURE_HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Corrupt(format!(
            "payload is {} bytes, header announces {t}x{d} ({expected} bytes)",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let frames =
        Array2::from_shape_vec((t, d), values).map_err(|e| Error::Corrupt(e.to_string()))?;
    FeatureSequence::new(frames, kind)
}

pub fn read_feature_file(path: impl AsRef<Path>, kind: FeatureKind) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature(&bytes, kind).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Corrupt(m) => Error::Corrupt(format!("{}: {m}", path.display())),
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Encodes fully before touching the filesystem, so invalid data never
/// leaves a partial file behind.
pub fn write_feature_file(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_feature(seq)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Validation(format!("{what} {n} exceeds u32")))
}
