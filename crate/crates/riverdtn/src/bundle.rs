//! Bundle model and wire codec.
//!
//! A bundle is a primary block (header) followed by a single payload block.
//! The four endpoint identifiers of the primary block — destination, source,
//! report-to, custodian — are not stored inline. Their scheme and
//! scheme-specific-part strings are concatenated, NUL-terminated and
//! deduplicated, into a dictionary at the end of the block, and each EID is
//! represented by a pair of byte offsets into that dictionary. While the
//! dictionary stays under 127 bytes every offset fits a one-byte SDNV, so the
//! eight offsets cost exactly eight bytes on the wire.
//!
//! # Wire format
//!
//! All integers are SDNVs (see [`crate::sdnv`]) unless noted.
//!
//! ```text
//! version            1 raw byte, currently 6
//! primary flags      SDNV  (bit 0 fragment, must be 0; bit 1 admin record)
//! block length       SDNV  bytes remaining in the primary block
//!   offsets[8]       SDNV  dictionary offsets: dest, source, report-to,
//!                          custodian, scheme then ssp for each
//!   creation time    SDNV  seconds
//!   creation seq     SDNV  per-source sequence number
//!   lifetime         SDNV  seconds, > 0
//!   dict length      SDNV
//!   dictionary       raw bytes, NUL-terminated ASCII strings
//! payload flags      SDNV  (bit 0: payload is a Deflate stream)
//! payload length     SDNV
//! payload            raw bytes
//! ```
//!
//! Serialization is deterministic: equal bundles produce identical bytes.

use std::fmt;

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sdnv::{self, SdnvError};

/// Protocol version emitted and accepted by this codec.
pub const BUNDLE_VERSION: u8 = 6;

/// Primary flag bit: bundle is a fragment. Never set; fragmentation is
/// not supported.
pub const FLAG_IS_FRAGMENT: u64 = 0b01;
/// Primary flag bit: administrative record. Reserved, accepted but unused.
pub const FLAG_ADMIN_RECORD: u64 = 0b10;

/// Payload flag bit: payload bytes are an RFC 1951 Deflate stream.
pub const PAYLOAD_FLAG_DEFLATE: u64 = 0b1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BundleError {
    #[error("invalid endpoint id: {0}")]
    InvalidEid(String),
    #[error("malformed bundle at byte {pos}: {reason}")]
    Malformed { pos: usize, reason: String },
}

impl From<SdnvError> for BundleError {
    fn from(err: SdnvError) -> Self {
        let pos = match err {
            SdnvError::Truncated { pos } | SdnvError::TooLong { pos } | SdnvError::Overflow { pos } => pos,
        };
        BundleError::Malformed { pos, reason: err.to_string() }
    }
}

fn malformed(pos: usize, reason: impl Into<String>) -> BundleError {
    BundleError::Malformed { pos, reason: reason.into() }
}

/// A DTN endpoint identifier: URI-like `scheme:ssp`.
///
/// Both parts are non-empty ASCII without NUL bytes so they can live in the
/// primary-block dictionary as NUL-terminated strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EndpointId {
    scheme: String,
    ssp: String,
}

impl EndpointId {
    pub fn new(scheme: impl Into<String>, ssp: impl Into<String>) -> Result<Self, BundleError> {
        let scheme = scheme.into();
        let ssp = ssp.into();
        for (name, part) in [("scheme", &scheme), ("ssp", &ssp)] {
            if part.is_empty() {
                return Err(BundleError::InvalidEid(format!("empty {name}")));
            }
            if !part.bytes().all(|b| b.is_ascii() && b != 0) {
                return Err(BundleError::InvalidEid(format!(
                    "{name} {part:?} must be ASCII without NUL bytes"
                )));
            }
        }
        Ok(Self { scheme, ssp })
    }

    /// The distinguished null endpoint `dtn:none`.
    pub fn null() -> Self {
        Self { scheme: "dtn".into(), ssp: "none".into() }
    }

    pub fn is_null(&self) -> bool {
        self.scheme == "dtn" && self.ssp == "none"
    }

    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn ssp(&self) -> &str {
        &self.ssp
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.scheme, self.ssp)
    }
}

impl std::str::FromStr for EndpointId {
    type Err = BundleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scheme, ssp) = s
            .split_once(':')
            .ok_or_else(|| BundleError::InvalidEid(format!("{s:?} has no ':' separator")))?;
        EndpointId::new(scheme, ssp)
    }
}

impl TryFrom<String> for EndpointId {
    type Error = BundleError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EndpointId> for String {
    fn from(eid: EndpointId) -> String {
        eid.to_string()
    }
}

/// Identity of a bundle: who created it and when.
///
/// Ordered lexicographically over (source, creation time, sequence) so that
/// ties anywhere in the system break the same way on every run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BundleId {
    pub source: EndpointId,
    pub creation_time: u64,
    pub creation_seq: u64,
}

impl fmt::Display for BundleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}.{}", self.source, self.creation_time, self.creation_seq)
    }
}

/// Which of the four EID references a dictionary offset pair belongs to.
const EID_FIELDS: usize = 4;

/// Primary block: routing header plus the shared string dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimaryBlock {
    pub version: u8,
    pub flags: u64,
    /// (scheme offset, ssp offset) for destination, source, report-to,
    /// custodian, in that order.
    pub eid_offsets: [(u32, u32); EID_FIELDS],
    pub creation_time: u64,
    pub creation_seq: u64,
    pub lifetime_s: u64,
    pub dictionary: Vec<u8>,
}

impl PrimaryBlock {
    fn resolve(&self, offset: u32) -> Result<&str, BundleError> {
        resolve_entry(&self.dictionary, offset)
            .map_err(|reason| BundleError::InvalidEid(reason))
    }

    fn eid(&self, field: usize) -> EndpointId {
        let (scheme, ssp) = self.eid_offsets[field];
        // Offsets are validated on construction and on decode.
        EndpointId {
            scheme: self.resolve(scheme).expect("validated offset").to_owned(),
            ssp: self.resolve(ssp).expect("validated offset").to_owned(),
        }
    }

    pub fn destination(&self) -> EndpointId {
        self.eid(0)
    }

    pub fn source(&self) -> EndpointId {
        self.eid(1)
    }

    pub fn report_to(&self) -> EndpointId {
        self.eid(2)
    }

    pub fn custodian(&self) -> EndpointId {
        self.eid(3)
    }

    pub fn is_fragment(&self) -> bool {
        self.flags & FLAG_IS_FRAGMENT != 0
    }
}

fn resolve_entry(dictionary: &[u8], offset: u32) -> Result<&str, String> {
    let start = offset as usize;
    if start >= dictionary.len() {
        return Err(format!("offset {offset} points past dictionary end"));
    }
    if start > 0 && dictionary[start - 1] != 0 {
        return Err(format!("offset {offset} is not the start of a dictionary entry"));
    }
    let rest = &dictionary[start..];
    let nul = rest
        .iter()
        .position(|&b| b == 0)
        .ok_or_else(|| format!("entry at offset {offset} is not NUL-terminated"))?;
    if nul == 0 {
        return Err(format!("entry at offset {offset} is empty"));
    }
    std::str::from_utf8(&rest[..nul])
        .map_err(|_| format!("entry at offset {offset} is not ASCII"))
}

/// Payload block: application bytes plus the compression flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadBlock {
    pub flags: u64,
    pub data: Bytes,
}

impl PayloadBlock {
    pub fn plain(data: impl Into<Bytes>) -> Self {
        Self { flags: 0, data: data.into() }
    }

    pub fn is_deflate(&self) -> bool {
        self.flags & PAYLOAD_FLAG_DEFLATE != 0
    }
}

/// The unit of DTN transfer: primary block + payload block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub primary: PrimaryBlock,
    pub payload: PayloadBlock,
}

impl Bundle {
    /// Build a bundle, constructing the deduplicated dictionary from the four
    /// EIDs.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        destination: &EndpointId,
        source: &EndpointId,
        report_to: &EndpointId,
        custodian: &EndpointId,
        creation_time: u64,
        creation_seq: u64,
        lifetime_s: u64,
        payload: PayloadBlock,
    ) -> Result<Self, BundleError> {
        if lifetime_s == 0 {
            return Err(malformed(0, "lifetime must be > 0"));
        }
        let (dictionary, eid_offsets) =
            build_dictionary(destination, source, report_to, custodian)?;
        Ok(Self {
            primary: PrimaryBlock {
                version: BUNDLE_VERSION,
                flags: 0,
                eid_offsets,
                creation_time,
                creation_seq,
                lifetime_s,
                dictionary,
            },
            payload,
        })
    }

    pub fn id(&self) -> BundleId {
        BundleId {
            source: self.primary.source(),
            creation_time: self.primary.creation_time,
            creation_seq: self.primary.creation_seq,
        }
    }

    /// Absolute expiry time in seconds: creation time + lifetime.
    pub fn expires_at(&self) -> u64 {
        self.primary.creation_time.saturating_add(self.primary.lifetime_s)
    }

    pub fn is_expired(&self, now_s: u64) -> bool {
        now_s >= self.expires_at()
    }

    /// Serialized size in bytes, without actually serializing.
    pub fn serialized_len(&self) -> usize {
        let p = &self.primary;
        let mut block = 0usize;
        for (s, e) in p.eid_offsets {
            block += sdnv::encoded_len(u64::from(s)) + sdnv::encoded_len(u64::from(e));
        }
        block += sdnv::encoded_len(p.creation_time);
        block += sdnv::encoded_len(p.creation_seq);
        block += sdnv::encoded_len(p.lifetime_s);
        block += sdnv::encoded_len(p.dictionary.len() as u64);
        block += p.dictionary.len();
        1 + sdnv::encoded_len(p.flags)
            + sdnv::encoded_len(block as u64)
            + block
            + sdnv::encoded_len(self.payload.flags)
            + sdnv::encoded_len(self.payload.data.len() as u64)
            + self.payload.data.len()
    }
}

/// Concatenate the distinct scheme/ssp strings of the four EIDs into a
/// NUL-terminated dictionary, in first-occurrence order over
/// (dest.scheme, dest.ssp, source.scheme, source.ssp, report_to.scheme,
/// report_to.ssp, custodian.scheme, custodian.ssp).
///
/// Returns the dictionary and the eight offsets as four (scheme, ssp) pairs
/// in field order.
pub fn build_dictionary(
    destination: &EndpointId,
    source: &EndpointId,
    report_to: &EndpointId,
    custodian: &EndpointId,
) -> Result<(Vec<u8>, [(u32, u32); EID_FIELDS]), BundleError> {
    let eids = [destination, source, report_to, custodian];
    let mut dictionary = Vec::new();
    let mut offsets = [(0u32, 0u32); EID_FIELDS];
    let intern = |s: &str, dictionary: &mut Vec<u8>| -> u32 {
        let mut cursor = 0usize;
        while cursor < dictionary.len() {
            let end = cursor
                + dictionary[cursor..]
                    .iter()
                    .position(|&b| b == 0)
                    .expect("dictionary entries are NUL-terminated");
            if &dictionary[cursor..end] == s.as_bytes() {
                return cursor as u32;
            }
            cursor = end + 1;
        }
        let offset = dictionary.len() as u32;
        dictionary.extend_from_slice(s.as_bytes());
        dictionary.push(0);
        offset
    };
    for (field, eid) in eids.iter().enumerate() {
        // Re-validate: callers may have built EndpointId via deserialization.
        let checked = EndpointId::new(eid.scheme(), eid.ssp())?;
        offsets[field] = (
            intern(checked.scheme(), &mut dictionary),
            intern(checked.ssp(), &mut dictionary),
        );
    }
    Ok((dictionary, offsets))
}

/// Serialize a bundle to its wire form. Deterministic for equal bundles.
pub fn serialize_bundle(bundle: &Bundle) -> Vec<u8> {
    let p = &bundle.primary;
    let mut block = Vec::with_capacity(32 + p.dictionary.len());
    for (s, e) in p.eid_offsets {
        sdnv::encode_into(u64::from(s), &mut block);
        sdnv::encode_into(u64::from(e), &mut block);
    }
    sdnv::encode_into(p.creation_time, &mut block);
    sdnv::encode_into(p.creation_seq, &mut block);
    sdnv::encode_into(p.lifetime_s, &mut block);
    sdnv::encode_into(p.dictionary.len() as u64, &mut block);
    block.extend_from_slice(&p.dictionary);

    let mut out = Vec::with_capacity(bundle.serialized_len());
    out.push(p.version);
    sdnv::encode_into(p.flags, &mut out);
    sdnv::encode_into(block.len() as u64, &mut out);
    out.extend_from_slice(&block);
    sdnv::encode_into(bundle.payload.flags, &mut out);
    sdnv::encode_into(bundle.payload.data.len() as u64, &mut out);
    out.extend_from_slice(&bundle.payload.data);
    out
}

/// Parse a serialized bundle, validating every primary-block invariant.
///
/// The input must contain exactly one bundle; trailing bytes are an error.
pub fn deserialize_bundle(bytes: &[u8]) -> Result<Bundle, BundleError> {
    let mut cur = 0usize;
    let version = *bytes.get(cur).ok_or_else(|| malformed(0, "empty input"))?;
    if version != BUNDLE_VERSION {
        return Err(malformed(cur, format!("unsupported version {version}")));
    }
    cur += 1;

    let (flags, n) = sdnv::decode(bytes, cur)?;
    cur += n;
    if flags & FLAG_IS_FRAGMENT != 0 {
        return Err(malformed(cur, "fragment flag set; fragments are not supported"));
    }
    if flags & !(FLAG_IS_FRAGMENT | FLAG_ADMIN_RECORD) != 0 {
        return Err(malformed(cur, format!("unknown primary flag bits {flags:#x}")));
    }

    let (block_len, n) = sdnv::decode(bytes, cur)?;
    cur += n;
    let block_start = cur;

    let mut eid_offsets = [(0u32, 0u32); EID_FIELDS];
    for pair in &mut eid_offsets {
        let (scheme, n) = sdnv::decode(bytes, cur)?;
        cur += n;
        let (ssp, n) = sdnv::decode(bytes, cur)?;
        cur += n;
        let as_u32 = |v: u64, pos: usize| -> Result<u32, BundleError> {
            u32::try_from(v).map_err(|_| malformed(pos, "dictionary offset exceeds 32 bits"))
        };
        *pair = (as_u32(scheme, cur)?, as_u32(ssp, cur)?);
    }

    let (creation_time, n) = sdnv::decode(bytes, cur)?;
    cur += n;
    let (creation_seq, n) = sdnv::decode(bytes, cur)?;
    cur += n;
    let (lifetime_s, n) = sdnv::decode(bytes, cur)?;
    cur += n;
    if lifetime_s == 0 {
        return Err(malformed(cur, "lifetime must be > 0"));
    }

    let (dict_len, n) = sdnv::decode(bytes, cur)?;
    cur += n;
    let dict_len = usize::try_from(dict_len).map_err(|_| malformed(cur, "dictionary too large"))?;
    if bytes.len() - cur < dict_len {
        return Err(malformed(bytes.len(), "input truncated mid-dictionary"));
    }
    let dict_start = cur;
    let dictionary = bytes[cur..cur + dict_len].to_vec();
    cur += dict_len;

    if cur - block_start != block_len as usize {
        return Err(malformed(
            block_start,
            format!("block length {} does not match content length {}", block_len, cur - block_start),
        ));
    }
    validate_dictionary(&dictionary, &eid_offsets, dict_start)?;

    let (payload_flags, n) = sdnv::decode(bytes, cur)?;
    cur += n;
    if payload_flags & !PAYLOAD_FLAG_DEFLATE != 0 {
        return Err(malformed(cur, format!("unknown payload flag bits {payload_flags:#x}")));
    }
    let (payload_len, n) = sdnv::decode(bytes, cur)?;
    cur += n;
    let payload_len =
        usize::try_from(payload_len).map_err(|_| malformed(cur, "payload too large"))?;
    if bytes.len() - cur < payload_len {
        return Err(malformed(bytes.len(), "input truncated mid-payload"));
    }
    let data = Bytes::copy_from_slice(&bytes[cur..cur + payload_len]);
    cur += payload_len;
    if cur != bytes.len() {
        return Err(malformed(cur, format!("{} trailing bytes after bundle", bytes.len() - cur)));
    }

    Ok(Bundle {
        primary: PrimaryBlock {
            version,
            flags,
            eid_offsets,
            creation_time,
            creation_seq,
            lifetime_s,
            dictionary,
        },
        payload: PayloadBlock { flags: payload_flags, data },
    })
}

fn validate_dictionary(
    dictionary: &[u8],
    offsets: &[(u32, u32); EID_FIELDS],
    pos: usize,
) -> Result<(), BundleError> {
    if dictionary.is_empty() || *dictionary.last().unwrap() != 0 {
        return Err(malformed(pos, "dictionary does not end with NUL"));
    }
    // Enumerate entries; check non-empty ASCII and deduplication.
    let mut seen: Vec<&[u8]> = Vec::new();
    let mut cursor = 0usize;
    while cursor < dictionary.len() {
        let end = cursor + dictionary[cursor..].iter().position(|&b| b == 0).unwrap();
        let entry = &dictionary[cursor..end];
        if entry.is_empty() {
            return Err(malformed(pos + cursor, "empty dictionary entry"));
        }
        if !entry.iter().all(|b| b.is_ascii()) {
            return Err(malformed(pos + cursor, "non-ASCII dictionary entry"));
        }
        if seen.contains(&entry) {
            return Err(malformed(pos + cursor, "duplicate dictionary entry"));
        }
        seen.push(entry);
        cursor = end + 1;
    }
    for &(scheme, ssp) in offsets {
        for offset in [scheme, ssp] {
            resolve_entry(dictionary, offset)
                .map_err(|reason| malformed(pos, reason))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eid(s: &str) -> EndpointId {
        s.parse().unwrap()
    }

    fn null_bundle(lifetime: u64) -> Bundle {
        let none = EndpointId::null();
        Bundle::new(&none, &none, &none, &none, 0, 0, lifetime, PayloadBlock::plain(vec![]))
            .unwrap()
    }

    #[test]
    fn endpoint_id_rejects_invalid_parts() {
        assert!(EndpointId::new("", "x").is_err());
        assert!(EndpointId::new("dtn", "").is_err());
        assert!(EndpointId::new("dtn", "a\0b").is_err());
        assert!(EndpointId::new("dtn", "café").is_err());
        assert!(EndpointId::new("dtn", "//c1/app").is_ok());
    }

    #[test]
    fn endpoint_id_parses_uri_form() {
        let e = eid("dtn://pierA/server");
        assert_eq!(e.scheme(), "dtn");
        assert_eq!(e.ssp(), "//pierA/server");
        assert_eq!(e.to_string(), "dtn://pierA/server");
        assert!(eid("dtn:none").is_null());
        assert!("plain".parse::<EndpointId>().is_err());
    }

    #[test]
    fn dictionary_for_all_null_eids() {
        let none = EndpointId::null();
        let (dict, offsets) = build_dictionary(&none, &none, &none, &none).unwrap();
        assert_eq!(dict, b"dtn\0none\0");
        assert_eq!(offsets, [(0, 4); 4]);
    }

    #[test]
    fn dictionary_dedups_in_first_occurrence_order() {
        let dest = eid("dtn://c1/app");
        let source = eid("dtn://pierA/server");
        let none = EndpointId::null();
        let (dict, offsets) = build_dictionary(&dest, &source, &none, &none).unwrap();
        assert_eq!(dict, b"dtn\0//c1/app\0//pierA/server\0none\0");
        // "dtn" stored once, all scheme offsets equal.
        assert_eq!(offsets[0].0, 0);
        assert_eq!(offsets[1].0, 0);
        assert_eq!(offsets[2].0, 0);
        assert_eq!(offsets[3].0, 0);
        // ssp offsets resolve to the intended strings.
        for (field, want) in [(0, "//c1/app"), (1, "//pierA/server"), (2, "none"), (3, "none")] {
            assert_eq!(resolve_entry(&dict, offsets[field].1).unwrap(), want);
        }
        // report_to and custodian share the "none" entry.
        assert_eq!(offsets[2], offsets[3]);
    }

    #[test]
    fn small_dictionary_offsets_serialize_to_eight_bytes() {
        // dest/source distinct, dictionary well under 127 bytes.
        let b = Bundle::new(
            &eid("dtn://c1/app"),
            &eid("dtn://pierA/server"),
            &EndpointId::null(),
            &EndpointId::null(),
            7,
            9,
            3038,
            PayloadBlock::plain(vec![1, 2, 3]),
        )
        .unwrap();
        assert!(b.primary.dictionary.len() < 127);
        let offset_bytes: usize = b
            .primary
            .eid_offsets
            .iter()
            .map(|&(s, e)| sdnv::encoded_len(u64::from(s)) + sdnv::encoded_len(u64::from(e)))
            .sum();
        assert_eq!(offset_bytes, 8);
    }

    #[test]
    fn serialize_matches_hand_decoded_layout() {
        let b = null_bundle(3038);
        let bytes = serialize_bundle(&b);
        let expected: Vec<u8> = vec![
            0x06, // version 6
            0x00, // primary flags
            0x16, // block length: 8 offsets + 1 + 1 + 2 (lifetime) + 1 + 9 dict = 22
            0x00, 0x04, 0x00, 0x04, 0x00, 0x04, 0x00, 0x04, // offsets: (0,4) x 4
            0x00, // creation time 0
            0x00, // creation seq 0
            0x97, 0x5e, // lifetime 3038 = 23*128 + 94
            0x09, // dictionary length 9
            b'd', b't', b'n', 0, b'n', b'o', b'n', b'e', 0, // "dtn\0none\0"
            0x00, // payload flags
            0x00, // payload length
        ];
        assert_eq!(bytes, expected);
        assert_eq!(bytes.len(), b.serialized_len());
    }

    #[test]
    fn golden_null_bundle_vector() {
        let golden = include_bytes!("../tests/golden/null_bundle.bin");
        assert_eq!(serialize_bundle(&null_bundle(3038)), golden);
        assert_eq!(deserialize_bundle(golden).unwrap(), null_bundle(3038));
    }

    #[test]
    fn roundtrips_a_nontrivial_bundle() {
        let b = Bundle::new(
            &eid("dtn://c2/p014"),
            &eid("dtn://pierB/server"),
            &EndpointId::null(),
            &EndpointId::null(),
            86_400,
            17,
            86_400,
            PayloadBlock::plain(vec![0u8; 300]),
        )
        .unwrap();
        let bytes = serialize_bundle(&b);
        assert_eq!(bytes.len(), b.serialized_len());
        assert_eq!(deserialize_bundle(&bytes).unwrap(), b);
    }

    #[test]
    fn rejects_truncated_input() {
        let bytes = serialize_bundle(&null_bundle(3038));
        for cut in [0, 1, 3, 10, bytes.len() - 1] {
            assert!(deserialize_bundle(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn rejects_truncation_mid_dictionary() {
        let bytes = serialize_bundle(&null_bundle(3038));
        // Dictionary spans bytes 16..25 in the golden layout.
        let err = deserialize_bundle(&bytes[..20]).unwrap_err();
        assert!(matches!(err, BundleError::Malformed { .. }), "{err}");
    }

    #[test]
    fn rejects_offset_past_dictionary() {
        let mut bytes = serialize_bundle(&null_bundle(3038));
        bytes[4] = 0x50; // dest ssp offset 80, past the 9-byte dictionary
        let err = deserialize_bundle(&bytes).unwrap_err();
        assert!(err.to_string().contains("past dictionary end"), "{err}");
    }

    #[test]
    fn rejects_offset_not_at_entry_start() {
        let mut bytes = serialize_bundle(&null_bundle(3038));
        bytes[4] = 0x05; // mid-"none"
        let err = deserialize_bundle(&bytes).unwrap_err();
        assert!(err.to_string().contains("not the start"), "{err}");
    }

    #[test]
    fn rejects_unterminated_dictionary() {
        let mut bytes = serialize_bundle(&null_bundle(3038));
        let dict_end = 16 + 9;
        bytes[dict_end - 1] = b'x'; // overwrite final NUL
        let err = deserialize_bundle(&bytes).unwrap_err();
        assert!(err.to_string().contains("NUL"), "{err}");
    }

    #[test]
    fn rejects_fragment_flag_and_trailing_bytes() {
        let mut with_flag = serialize_bundle(&null_bundle(3038));
        with_flag[1] = 0x01;
        assert!(deserialize_bundle(&with_flag).unwrap_err().to_string().contains("fragment"));

        let mut trailing = serialize_bundle(&null_bundle(3038));
        trailing.push(0xff);
        assert!(deserialize_bundle(&trailing).unwrap_err().to_string().contains("trailing"));
    }

    #[test]
    fn rejects_zero_lifetime() {
        let none = EndpointId::null();
        assert!(Bundle::new(&none, &none, &none, &none, 0, 0, 0, PayloadBlock::plain(vec![]))
            .is_err());
    }

    #[test]
    fn bundle_id_orders_lexicographically() {
        let mk = |src: &str, t: u64, seq: u64| BundleId {
            source: eid(src),
            creation_time: t,
            creation_seq: seq,
        };
        let mut ids = vec![
            mk("dtn://b/x", 0, 0),
            mk("dtn://a/x", 9, 9),
            mk("dtn://a/x", 9, 1),
            mk("dtn://a/x", 2, 5),
        ];
        ids.sort();
        assert_eq!(
            ids,
            vec![
                mk("dtn://a/x", 2, 5),
                mk("dtn://a/x", 9, 1),
                mk("dtn://a/x", 9, 9),
                mk("dtn://b/x", 0, 0),
            ]
        );
    }

    #[test]
    fn expiry_is_inclusive_at_deadline() {
        let b = null_bundle(3038);
        assert!(!b.is_expired(3037));
        assert!(b.is_expired(3038));
    }
}
