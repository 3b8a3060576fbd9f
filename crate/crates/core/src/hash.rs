//! Keyed hashing: row selection and fingerprints.
//!
//! One 64-bit keyed digest per element feeds both outputs. The row index is
//! the high part of `digest * rows` (multiply-shift range reduction, no
//! rejection), the fingerprint comes from the low `bits` of the digest. Cells
//! use 0 as the empty marker, so a fingerprint must avoid it; how it does so
//! is the [`EmptyCellPolicy`].

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use siphasher::sip::SipHasher24;
use std::hash::Hasher;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{FingerprintExhausted, ParamError};

/// Widest fingerprint a cell may hold.
pub const MAX_FINGERPRINT_BITS: u32 = 32;

/// Re-derivation rounds before giving up on a nonzero fingerprint.
pub const MAX_REDERIVE_ROUNDS: u32 = 64;

/// How a fingerprint that collides with the empty code (0) is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EmptyCellPolicy {
    /// 0 is an ordinary fingerprint; cells holding 0 also count as empty.
    /// All `2^bits` values are fingerprints.
    ZeroIsFingerprint,
    /// A fingerprint of 0 becomes 1. Fast, but 1 is twice as likely.
    RemapZero,
    /// Hash the digest again until the value is usable. Fingerprints are
    /// uniform over `1..=space`.
    #[default]
    Rederive,
}

impl EmptyCellPolicy {
    pub fn code(self) -> u64 {
        match self {
            EmptyCellPolicy::ZeroIsFingerprint => 1,
            EmptyCellPolicy::RemapZero => 2,
            EmptyCellPolicy::Rederive => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EmptyCellPolicy::ZeroIsFingerprint => "zero",
            EmptyCellPolicy::RemapZero => "remap",
            EmptyCellPolicy::Rederive => "rederive",
        }
    }
}

impl std::str::FromStr for EmptyCellPolicy {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(EmptyCellPolicy::ZeroIsFingerprint),
            "remap" => Ok(EmptyCellPolicy::RemapZero),
            "rederive" => Ok(EmptyCellPolicy::Rederive),
            _ => Err(ParamError::Unsupported(
                "empty-cell policy must be one of zero, remap, rederive",
            )),
        }
    }
}

/// Underlying keyed hash function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HashKind {
    /// XXH3-64 keyed by the seed.
    #[default]
    Xxh3,
    /// SipHash-2-4 with a 128-bit key expanded from the seed.
    SipHash,
}

/// A seeded pair of hash functions `h: element -> [0, rows)` and
/// `s: element -> fingerprint`.
#[derive(Debug, Clone)]
pub struct HashFamily {
    seed: u64,
    rows: u64,
    bits: u32,
    mask: u64,
    max_fingerprint: u64,
    policy: EmptyCellPolicy,
    kind: HashKind,
    sip_key: (u64, u64),
}

impl HashFamily {
    /// Family with the default `Rederive` policy over `bits`-bit fingerprints.
    pub fn new(seed: u64, rows: u64, bits: u32) -> Result<Self, ParamError> {
        if rows == 0 {
            return Err(ParamError::out_of_range("rows", rows, "must be at least 1"));
        }
        if bits == 0 || bits > MAX_FINGERPRINT_BITS {
            return Err(ParamError::out_of_range("fingerprint_bits", bits, "must be in 1..=32"));
        }
        let mask = (1u64 << bits) - 1;
        Ok(Self {
            seed,
            rows,
            bits,
            mask,
            max_fingerprint: mask,
            policy: EmptyCellPolicy::Rederive,
            kind: HashKind::Xxh3,
            sip_key: (splitmix(seed), splitmix(seed ^ 0x5851_f42d_4c95_7f2d)),
        })
    }

    pub fn with_policy(mut self, policy: EmptyCellPolicy) -> Self {
        self.policy = policy;
        self.max_fingerprint = self.mask;
        self
    }

    pub fn with_kind(mut self, kind: HashKind) -> Self {
        self.kind = kind;
        self
    }

    /// Restricts `Rederive` fingerprints to `1..=space`.
    pub fn with_fingerprint_space(mut self, space: u64) -> Result<Self, ParamError> {
        if self.policy != EmptyCellPolicy::Rederive {
            return Err(ParamError::Unsupported(
                "an explicit fingerprint space requires the rederive policy",
            ));
        }
        if space == 0 || space > self.mask {
            return Err(ParamError::out_of_range(
                "fingerprint_space",
                space,
                "must be in 1..2^bits",
            ));
        }
        self.max_fingerprint = space;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn fingerprint_bits(&self) -> u32 {
        self.bits
    }

    pub fn policy(&self) -> EmptyCellPolicy {
        self.policy
    }

    pub fn kind(&self) -> HashKind {
        self.kind
    }

    /// Number of distinct fingerprints `s` can emit.
    pub fn fingerprint_space(&self) -> u64 {
        match self.policy {
            EmptyCellPolicy::ZeroIsFingerprint => self.mask + 1,
            EmptyCellPolicy::RemapZero => self.mask,
            EmptyCellPolicy::Rederive => self.max_fingerprint,
        }
    }

    #[inline]
    pub fn digest(&self, element: &[u8]) -> u64 {
        match self.kind {
            HashKind::Xxh3 => xxh3_64_with_seed(element, self.seed),
            HashKind::SipHash => {
                let mut hasher = SipHasher24::new_with_keys(self.sip_key.0, self.sip_key.1);
                hasher.write(element);
                hasher.finish()
            }
        }
    }

    #[inline]
    pub fn row_of_digest(&self, digest: u64) -> u64 {
        ((digest as u128 * self.rows as u128) >> 64) as u64
    }

    /// Fingerprint of a digest under this family's policy.
    #[inline]
    pub fn try_fingerprint_of_digest(&self, digest: u64) -> Result<u64, FingerprintExhausted> {
        self.derive_fingerprint(digest, MAX_REDERIVE_ROUNDS)
    }

    #[inline]
    fn derive_fingerprint(&self, digest: u64, max_rounds: u32) -> Result<u64, FingerprintExhausted> {
        let value = digest & self.mask;
        match self.policy {
            EmptyCellPolicy::ZeroIsFingerprint => Ok(value),
            EmptyCellPolicy::RemapZero => Ok(value.max(1)),
            EmptyCellPolicy::Rederive => {
                if value != 0 && value <= self.max_fingerprint {
                    return Ok(value);
                }
                let mut chained = digest;
                for _ in 1..max_rounds {
                    chained = xxh3_64_with_seed(&chained.to_le_bytes(), self.seed);
                    let value = chained & self.mask;
                    if value != 0 && value <= self.max_fingerprint {
                        return Ok(value);
                    }
                }
                Err(FingerprintExhausted { rounds: max_rounds })
            }
        }
    }

    #[inline]
    pub fn hash_row(&self, element: &[u8]) -> u64 {
        self.row_of_digest(self.digest(element))
    }

    pub fn try_fingerprint(&self, element: &[u8]) -> Result<u64, FingerprintExhausted> {
        self.try_fingerprint_of_digest(self.digest(element))
    }

    /// Fingerprint of `element`.
    ///
    /// # Panics
    ///
    /// If re-derivation fails [`MAX_REDERIVE_ROUNDS`] times in a row, which
    /// happens with probability below `2^-64`.
    #[inline]
    pub fn fingerprint(&self, element: &[u8]) -> u64 {
        self.locate(element).1
    }

    /// Row and fingerprint from a single digest.
    #[inline]
    pub fn locate(&self, element: &[u8]) -> (u64, u64) {
        let digest = self.digest(element);
        let fingerprint = self
            .try_fingerprint_of_digest(digest)
            .expect("internal fault: fingerprint re-derivation exhausted");
        (self.row_of_digest(digest), fingerprint)
    }
}

/// SplitMix64 output function, used to spread seeds.
#[inline]
pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Eviction RNG for a filter seeded with `seed`, split off from the hash seed.
pub(crate) fn eviction_rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(splitmix(seed ^ 0xe7ac_0b1d_5eed_0001))
}
