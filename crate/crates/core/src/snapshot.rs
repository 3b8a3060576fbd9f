//! Binary state snapshots.
//!
//! ```text
//! magic    4 bytes   "QHTF"
//! variant  u32 LE    VariantTag
//! count    u32 LE    number of header fields
//! fields   count x u64 LE
//! bits     u64 LE    payload length in bits
//! payload  ceil(bits / 8) bytes, cells packed row-major, little-endian
//! ```
//!
//! Header fields are variant-specific; each filter documents its own order.

use thiserror::Error;

use crate::packed::PackedCells;

pub const MAGIC: [u8; 4] = *b"QHTF";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantTag {
    Qht = 1,
    Qhtd = 2,
    Qqhtd = 3,
    Sqf = 4,
    Sbf = 5,
    Cuckoo = 6,
}

impl VariantTag {
    fn from_u32(tag: u32) -> Option<Self> {
        Some(match tag {
            1 => VariantTag::Qht,
            2 => VariantTag::Qhtd,
            3 => VariantTag::Qqhtd,
            4 => VariantTag::Sqf,
            5 => VariantTag::Sbf,
            6 => VariantTag::Cuckoo,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("snapshot is truncated")]
    Truncated,
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unknown variant tag {0}")]
    UnknownVariant(u32),
    #[error("payload holds {actual} bytes, header announces {expected}")]
    PayloadLength { expected: u64, actual: u64 },
}

/// Parsed view over a snapshot buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotView<'a> {
    pub variant: VariantTag,
    pub fields: Vec<u64>,
    pub payload_bits: u64,
    pub payload: &'a [u8],
}

pub(crate) fn write_snapshot(variant: VariantTag, fields: &[u64], payload: &PackedCells) -> Vec<u8> {
    let bytes = payload.to_bytes();
    let mut out = Vec::with_capacity(20 + fields.len() * 8 + bytes.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(variant as u32).to_le_bytes());
    out.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for field in fields {
        out.extend_from_slice(&field.to_le_bytes());
    }
    out.extend_from_slice(&payload.bit_len().to_le_bytes());
    out.extend_from_slice(&bytes);
    out
}

pub fn parse_snapshot(bytes: &[u8]) -> Result<SnapshotView<'_>, SnapshotError> {
    fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8], SnapshotError> {
        if bytes.len() < n {
            return Err(SnapshotError::Truncated);
        }
        let (head, tail) = bytes.split_at(n);
        *bytes = tail;
        Ok(head)
    }
    let mut rest = bytes;
    if take(&mut rest, 4)? != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let tag = u32::from_le_bytes(take(&mut rest, 4)?.try_into().unwrap());
    let variant = VariantTag::from_u32(tag).ok_or(SnapshotError::UnknownVariant(tag))?;
    let count = u32::from_le_bytes(take(&mut rest, 4)?.try_into().unwrap()) as usize;
    let fields = (0..count)
        .map(|_| Ok(u64::from_le_bytes(take(&mut rest, 8)?.try_into().unwrap())))
        .collect::<Result<Vec<_>, SnapshotError>>()?;
    let payload_bits = u64::from_le_bytes(take(&mut rest, 8)?.try_into().unwrap());
    let expected = payload_bits.div_ceil(8);
    if rest.len() as u64 != expected {
        return Err(SnapshotError::PayloadLength {
            expected,
            actual: rest.len() as u64,
        });
    }
    Ok(SnapshotView {
        variant,
        fields,
        payload_bits,
        payload: rest,
    })
}
