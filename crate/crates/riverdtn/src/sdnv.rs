//! Self-Delimiting Numeric Values: variable-length unsigned integers in
//! big-endian 7-bit groups, high bit set on every byte except the last.
//!
//! Encodings are minimal: no value starts with a redundant `0x80` byte, so
//! `len(encode(v)) == ceil(bits(v) / 7)` with `bits(0) == 1`. Any value below
//! 128 occupies exactly one byte, which is what keeps the eight dictionary
//! offsets of a small primary block down to eight bytes on the wire.

use thiserror::Error;

/// Longest legal SDNV for a 64-bit value: ceil(64 / 7) = 10 bytes.
pub const MAX_SDNV_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SdnvError {
    #[error("malformed sdnv at byte {pos}: input ends mid-value")]
    Truncated { pos: usize },
    #[error("malformed sdnv at byte {pos}: no terminator within {MAX_SDNV_LEN} bytes")]
    TooLong { pos: usize },
    #[error("malformed sdnv at byte {pos}: value exceeds 64 bits")]
    Overflow { pos: usize },
}

/// Number of bytes `encode_into` will produce for `value`.
pub fn encoded_len(value: u64) -> usize {
    let bits = 64 - value.leading_zeros().min(63) as usize;
    bits.div_ceil(7).max(1)
}

/// Append the SDNV encoding of `value` to `out`.
pub fn encode_into(value: u64, out: &mut Vec<u8>) {
    let len = encoded_len(value);
    for i in (0..len).rev() {
        let group = ((value >> (7 * i)) & 0x7f) as u8;
        out.push(if i == 0 { group } else { group | 0x80 });
    }
}

pub fn encode(value: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(value));
    encode_into(value, &mut out);
    out
}

/// Decode the SDNV starting at `bytes[cursor]`.
///
/// Returns the value and the number of bytes consumed.
pub fn decode(bytes: &[u8], cursor: usize) -> Result<(u64, usize), SdnvError> {
    let mut value: u64 = 0;
    let mut consumed = 0;
    loop {
        let byte = *bytes
            .get(cursor + consumed)
            .ok_or(SdnvError::Truncated { pos: cursor + consumed })?;
        consumed += 1;
        if consumed > MAX_SDNV_LEN {
            return Err(SdnvError::TooLong { pos: cursor });
        }
        value = value
            .checked_shl(7)
            .filter(|_| value >> 57 == 0)
            .ok_or(SdnvError::Overflow { pos: cursor })?
            | u64::from(byte & 0x7f);
        if byte & 0x80 == 0 {
            return Ok((value, consumed));
        }
    }
}
