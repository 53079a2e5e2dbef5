//! Deflate payload compression with a no-gain fallback.
//!
//! Before transmission a bundle's payload may be replaced by its RFC 1951
//! Deflate stream, with the payload-block compressed flag set; on receipt the
//! inverse restores the original bytes. Compression is applied only when it
//! strictly shrinks the payload, so a serialized bundle never grows. The
//! primary block is left untouched — its size reduction comes entirely from
//! the dictionary encoding in [`crate::bundle`].

use std::io::{Read, Write};

use bytes::Bytes;
use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{Bundle, PAYLOAD_FLAG_DEFLATE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompressionError {
    #[error("payload is already compressed")]
    AlreadyCompressed,
    #[error("compressed payload is not a valid Deflate stream: {0}")]
    CorruptPayload(String),
    #[error("Deflate level {0} out of range 1..=9")]
    InvalidLevel(u32),
    #[error("cannot summarize an empty report list")]
    EmptyInput,
}

/// Size accounting for one compression attempt.
///
/// `ratio` is the fraction saved, `1 − compressed/original`; it is negative
/// when Deflate expanded the data and defined as 0 for an empty payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub original_bytes: u64,
    pub compressed_bytes: u64,
    pub ratio: f64,
}

impl CompressionReport {
    pub fn new(original_bytes: u64, compressed_bytes: u64) -> Self {
        let ratio = if original_bytes == 0 {
            0.0
        } else {
            1.0 - compressed_bytes as f64 / original_bytes as f64
        };
        Self { original_bytes, compressed_bytes, ratio }
    }

    fn unchanged(len: u64) -> Self {
        Self::new(len, len)
    }
}

/// Whether to compress outgoing payloads, and how hard Deflate should try.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompressionSetting {
    pub enabled: bool,
    /// Deflate effort level, 1 (fastest) to 9 (best).
    pub level: u32,
}

impl Default for CompressionSetting {
    fn default() -> Self {
        Self { enabled: true, level: 6 }
    }
}

impl CompressionSetting {
    pub fn new(enabled: bool, level: u32) -> Result<Self, CompressionError> {
        let setting = Self { enabled, level };
        setting.validate()?;
        Ok(setting)
    }

    pub fn disabled() -> Self {
        Self { enabled: false, level: 6 }
    }

    pub fn validate(&self) -> Result<(), CompressionError> {
        if !(1..=9).contains(&self.level) {
            return Err(CompressionError::InvalidLevel(self.level));
        }
        Ok(())
    }
}

/// Deflate a byte slice at the given effort level.
pub fn deflate(data: &[u8], level: u32) -> Vec<u8> {
    let mut encoder = DeflateEncoder::new(
        Vec::with_capacity(data.len() / 2 + 16),
        Compression::new(level),
    );
    encoder.write_all(data).expect("writing to a Vec cannot fail");
    encoder.finish().expect("finishing an in-memory Deflate stream cannot fail")
}

/// Inflate a Deflate stream, erroring on malformed input.
pub fn inflate(data: &[u8]) -> Result<Vec<u8>, CompressionError> {
    let mut out = Vec::with_capacity(data.len() * 2 + 16);
    DeflateDecoder::new(data)
        .read_to_end(&mut out)
        .map_err(|e| CompressionError::CorruptPayload(e.to_string()))?;
    Ok(out)
}

/// Compress a bundle's payload if the setting allows and Deflate strictly
/// shrinks it; otherwise return the bundle unchanged.
///
/// On the no-gain path the report still records the attempted compressed
/// size, so its ratio is ≤ 0; the bundle itself keeps the original payload
/// and a clear flag.
pub fn compress_bundle(
    mut bundle: Bundle,
    setting: &CompressionSetting,
) -> Result<(Bundle, CompressionReport), CompressionError> {
    if bundle.payload.is_deflate() {
        return Err(CompressionError::AlreadyCompressed);
    }
    setting.validate()?;
    let original = bundle.payload.data.len() as u64;
    if !setting.enabled || original == 0 {
        return Ok((bundle, CompressionReport::unchanged(original)));
    }
    let compressed = deflate(&bundle.payload.data, setting.level);
    let report = CompressionReport::new(original, compressed.len() as u64);
    if (compressed.len() as u64) < original {
        bundle.payload.data = Bytes::from(compressed);
        bundle.payload.flags |= PAYLOAD_FLAG_DEFLATE;
    }
    Ok((bundle, report))
}

/// Restore a compressed payload to its original bytes; identity if the
/// compressed flag is clear.
pub fn decompress_bundle(mut bundle: Bundle) -> Result<Bundle, CompressionError> {
    if !bundle.payload.is_deflate() {
        return Ok(bundle);
    }
    let inflated = inflate(&bundle.payload.data)?;
    bundle.payload.data = Bytes::from(inflated);
    bundle.payload.flags &= !PAYLOAD_FLAG_DEFLATE;
    Ok(bundle)
}

/// Arithmetic mean of report ratios.
pub fn classify_savings(reports: &[CompressionReport]) -> Result<f64, CompressionError> {
    if reports.is_empty() {
        return Err(CompressionError::EmptyInput);
    }
    Ok(reports.iter().map(|r| r.ratio).sum::<f64>() / reports.len() as f64)
}
