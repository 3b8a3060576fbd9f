//! Streaming quotient filter.
//!
//! A `(q + r)`-bit hash is split into a row index (the `q` most significant
//! bits) and an `r`-bit remainder. The stored fingerprint is the `r'` least
//! significant bits of the remainder followed by its Hamming weight, so only
//! `2^r' * (r - r' + 1)` fingerprints exist even though cells are
//! `r' + ceil(log2(r + 1))` bits wide. Streaming follows the QHT rule.

use rand_xoshiro::SplitMix64;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::ParamError;
use crate::filter::{DuplicateFilter, Snapshot, Verdict};
use crate::hash::{eviction_rng, HashFamily, MAX_FINGERPRINT_BITS, MAX_REDERIVE_ROUNDS};
use crate::packed::FingerprintRows;
use crate::qht::MAX_BUCKETS;
use crate::snapshot::{write_snapshot, VariantTag};

/// Largest supported quotient, `2^40` rows.
pub const MAX_QUOTIENT_BITS: u32 = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqfParams {
    quotient_bits: u32,
    remainder_bits: u32,
    reduced_bits: u32,
    buckets: u32,
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

impl SqfParams {
    pub fn new(quotient_bits: u32, remainder_bits: u32, reduced_bits: u32, buckets: u32) -> Result<Self, ParamError> {
        if quotient_bits > MAX_QUOTIENT_BITS {
            return Err(ParamError::out_of_range(
                "quotient_bits",
                quotient_bits,
                "must be at most 40",
            ));
        }
        if remainder_bits == 0 {
            return Err(ParamError::out_of_range(
                "remainder_bits",
                remainder_bits,
                "must be at least 1",
            ));
        }
        if quotient_bits + remainder_bits > 64 {
            return Err(ParamError::out_of_range(
                "remainder_bits",
                remainder_bits,
                "quotient and remainder must fit in a 64-bit hash",
            ));
        }
        if reduced_bits >= remainder_bits {
            return Err(ParamError::out_of_range(
                "reduced_bits",
                reduced_bits,
                "must be smaller than remainder_bits",
            ));
        }
        let params = Self {
            quotient_bits,
            remainder_bits,
            reduced_bits,
            buckets,
        };
        if params.cell_bits() > MAX_FINGERPRINT_BITS {
            return Err(ParamError::out_of_range(
                "reduced_bits",
                reduced_bits,
                "cells wider than 32 bits are not supported",
            ));
        }
        if buckets == 0 {
            return Err(ParamError::out_of_range("buckets", buckets, "must be at least 1"));
        }
        let limit = params.fingerprint_space().min(MAX_BUCKETS as u64);
        if buckets as u64 > limit {
            return Err(ParamError::TooManyBuckets {
                buckets: buckets as u64,
                limit,
            });
        }
        Ok(params)
    }

    /// Largest quotient whose table fits in `memory_bits`.
    pub fn from_memory(
        memory_bits: u64,
        remainder_bits: u32,
        reduced_bits: u32,
        buckets: u32,
    ) -> Result<Self, ParamError> {
        let probe = Self::new(0, remainder_bits, reduced_bits, buckets)?;
        let row_bits = probe.cell_bits() as u64 * buckets as u64;
        let rows = memory_bits / row_bits;
        if rows == 0 {
            return Err(ParamError::InsufficientMemory {
                memory_bits,
                buckets,
                cell_bits: probe.cell_bits(),
            });
        }
        let quotient_bits = (63 - rows.leading_zeros()).min(MAX_QUOTIENT_BITS);
        Self::new(quotient_bits, remainder_bits, reduced_bits, buckets)
    }

    pub fn quotient_bits(&self) -> u32 {
        self.quotient_bits
    }

    pub fn remainder_bits(&self) -> u32 {
        self.remainder_bits
    }

    pub fn reduced_bits(&self) -> u32 {
        self.reduced_bits
    }

    pub fn buckets(&self) -> u32 {
        self.buckets
    }

    pub fn rows(&self) -> u64 {
        1u64 << self.quotient_bits
    }

    /// Bits used for the Hamming weight.
    pub fn weight_bits(&self) -> u32 {
        ceil_log2(self.remainder_bits as u64 + 1)
    }

    /// `r' + ceil(log2(r + 1))`.
    pub fn cell_bits(&self) -> u32 {
        self.reduced_bits + self.weight_bits()
    }

    /// `2^r' * (r - r' + 1)` reachable fingerprints.
    pub fn fingerprint_space(&self) -> u64 {
        (1u64 << self.reduced_bits) * (self.remainder_bits - self.reduced_bits + 1) as u64
    }

    /// `2^q * k * cell_bits`.
    pub fn memory_bits(&self) -> u64 {
        self.rows() * self.buckets as u64 * self.cell_bits() as u64
    }

    /// Fingerprint of an `r`-bit remainder: low `r'` bits, then the weight.
    #[inline]
    pub fn fingerprint_of_remainder(&self, remainder: u64) -> u64 {
        let low = remainder & ((1u64 << self.reduced_bits) - 1);
        (low << self.weight_bits()) | remainder.count_ones() as u64
    }

    /// A cell value no remainder maps to, if one exists.
    ///
    /// A code `(low, w)` is reachable iff `popcount(low) <= w <= popcount(low) + r - r'`.
    pub fn unused_code(&self) -> Option<u64> {
        let spread = (self.remainder_bits - self.reduced_bits) as u64;
        let weights = 1u64 << self.weight_bits();
        (0..1u64 << self.cell_bits()).rev().find(|&code| {
            let low = code / weights;
            let w = code % weights;
            let ones = low.count_ones() as u64;
            w < ones || w > ones + spread
        })
    }
}

/// A streaming quotient filter.
#[derive(Debug, Clone)]
pub struct SqfTable {
    params: SqfParams,
    seed: u64,
    hash: HashFamily,
    empty: u64,
    /// No free code: the all-zero fingerprint is re-derived instead.
    rederive_zero: bool,
    rng: SplitMix64,
    rows: FingerprintRows,
}

impl SqfTable {
    pub fn new(params: SqfParams, seed: u64) -> Self {
        let (empty, rederive_zero) = match params.unused_code() {
            Some(code) => (code, false),
            None => (0, true),
        };
        let hash = HashFamily::new(seed, 1, params.cell_bits()).expect("validated parameters");
        Self {
            rows: FingerprintRows::new(params.rows(), params.buckets, params.cell_bits(), empty),
            rng: eviction_rng(seed),
            params,
            seed,
            hash,
            empty,
            rederive_zero,
        }
    }

    pub fn params(&self) -> &SqfParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Cell value marking an empty slot.
    pub fn empty_code(&self) -> u64 {
        self.empty
    }

    /// Fingerprints actually storable, one fewer when zero had to be reserved.
    pub fn effective_fingerprint_space(&self) -> u64 {
        self.params.fingerprint_space() - self.rederive_zero as u64
    }

    #[inline]
    fn split(&self, digest: u64) -> (u64, u64) {
        let q = self.params.quotient_bits;
        let r = self.params.remainder_bits;
        let row = if q == 0 { 0 } else { digest >> (64 - q) };
        let remainder = (digest << q) >> (64 - r);
        (row, remainder)
    }

    /// `(row, fingerprint)` of an element.
    #[inline]
    pub fn locate(&self, element: &[u8]) -> (u64, u64) {
        let digest = self.hash.digest(element);
        let (row, remainder) = self.split(digest);
        let fingerprint = self.params.fingerprint_of_remainder(remainder);
        if !self.rederive_zero || fingerprint != 0 {
            return (row, fingerprint);
        }
        let mut chained = digest;
        for _ in 1..MAX_REDERIVE_ROUNDS {
            chained = xxh3_64_with_seed(&chained.to_le_bytes(), self.seed);
            let fingerprint = self.params.fingerprint_of_remainder(self.split(chained).1);
            if fingerprint != 0 {
                return (row, fingerprint);
            }
        }
        panic!("internal fault: fingerprint re-derivation exhausted")
    }

    /// Fingerprint of an element.
    pub fn fingerprint(&self, element: &[u8]) -> u64 {
        self.locate(element).1
    }

    pub fn row(&self, row: u64) -> Vec<u64> {
        self.rows.row(row)
    }

    pub fn occupied_cells(&self) -> u64 {
        self.rows.occupied() as u64
    }
}

impl DuplicateFilter for SqfTable {
    #[inline]
    fn detect(&self, element: &[u8]) -> Verdict {
        let (row, fingerprint) = self.locate(element);
        Verdict::from_duplicate(self.rows.contains(row, fingerprint))
    }

    fn insert(&mut self, element: &[u8]) {
        let (row, fingerprint) = self.locate(element);
        if !self.rows.contains(row, fingerprint) {
            self.rows.place(row, fingerprint, &mut self.rng);
        }
    }

    #[inline]
    fn stream(&mut self, element: &[u8]) -> Verdict {
        let (row, fingerprint) = self.locate(element);
        let duplicate = self.rows.contains(row, fingerprint);
        if !duplicate {
            self.rows.place(row, fingerprint, &mut self.rng);
        }
        Verdict::from_duplicate(duplicate)
    }
}

impl Snapshot for SqfTable {
    /// Header fields: `q, r, r', k, seed, empty code`.
    fn snapshot(&self) -> Vec<u8> {
        let fields = [
            self.params.quotient_bits as u64,
            self.params.remainder_bits as u64,
            self.params.reduced_bits as u64,
            self.params.buckets as u64,
            self.seed,
            self.empty,
        ];
        write_snapshot(VariantTag::Sqf, &fields, &self.rows.cells)
    }
}
