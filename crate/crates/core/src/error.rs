use thiserror::Error;

/// Rejected filter or formula configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("{memory_bits} bits of memory leave no usable cell for {buckets} buckets of {cell_bits} bits (need more than {})", *buckets as u64 * *cell_bits as u64)]
    InsufficientMemory {
        memory_bits: u64,
        buckets: u32,
        cell_bits: u32,
    },
    #[error("{buckets} buckets per row exceed the limit of {limit}")]
    TooManyBuckets { buckets: u64, limit: u64 },
    #[error("`{name}` = {value} is out of range: {reason}")]
    OutOfRange {
        name: &'static str,
        value: u64,
        reason: &'static str,
    },
    #[error("{0}")]
    Unsupported(&'static str),
}

impl ParamError {
    pub(crate) fn out_of_range(name: &'static str, value: impl TryInto<u64>, reason: &'static str) -> Self {
        ParamError::OutOfRange {
            name,
            value: value.try_into().unwrap_or(u64::MAX),
            reason,
        }
    }
}

/// Fingerprint derivation kept landing on the reserved empty code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("fingerprint derivation produced a reserved value {rounds} times in a row")]
pub struct FingerprintExhausted {
    pub rounds: u32,
}
