//! Baseline streaming filters: a stable Bloom filter and a cuckoo filter
//! adapted to unbounded streams.

use rand::Rng;
use rand_xoshiro::SplitMix64;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::ParamError;
use crate::filter::{DuplicateFilter, Snapshot, Verdict};
use crate::hash::{eviction_rng, splitmix, HashFamily, MAX_FINGERPRINT_BITS};
use crate::packed::PackedCells;
use crate::snapshot::{write_snapshot, VariantTag};

/// Stable Bloom filter shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbfParams {
    cells: u64,
    cell_bits: u32,
    hash_count: u32,
    decrements: u32,
}

impl SbfParams {
    pub fn new(cells: u64, cell_bits: u32, hash_count: u32, decrements: u32) -> Result<Self, ParamError> {
        if cells == 0 {
            return Err(ParamError::out_of_range("cells", cells, "must be at least 1"));
        }
        if cell_bits == 0 || cell_bits > 16 {
            return Err(ParamError::out_of_range("cell_bits", cell_bits, "must be in 1..=16"));
        }
        if hash_count == 0 {
            return Err(ParamError::out_of_range("hash_count", hash_count, "must be at least 1"));
        }
        if decrements == 0 {
            return Err(ParamError::out_of_range("decrements", decrements, "must be at least 1"));
        }
        Ok(Self {
            cells,
            cell_bits,
            hash_count,
            decrements,
        })
    }

    /// As many cells as fit in `memory_bits`.
    pub fn from_memory(memory_bits: u64, cell_bits: u32, hash_count: u32, decrements: u32) -> Result<Self, ParamError> {
        if cell_bits == 0 {
            return Err(ParamError::out_of_range("cell_bits", cell_bits, "must be in 1..=16"));
        }
        Self::new(memory_bits / cell_bits as u64, cell_bits, hash_count, decrements)
    }

    /// Decrement count whose stable-point FPR is closest to `target`:
    /// solves `target = (1 - (1 / (1 + 1 / (P (1/K - 1/m))))^Max)^K` for `P`.
    pub fn decrements_for_target(
        target_fpr: f64,
        cells: u64,
        cell_bits: u32,
        hash_count: u32,
    ) -> Result<u32, ParamError> {
        if !(target_fpr > 0.0 && target_fpr < 1.0) {
            return Err(ParamError::Unsupported("target FPR must lie strictly between 0 and 1"));
        }
        if cells <= hash_count as u64 {
            return Err(ParamError::out_of_range("cells", cells, "must exceed the hash count"));
        }
        let k = hash_count as f64;
        let max = ((1u64 << cell_bits) - 1) as f64;
        let stay = (1.0 - target_fpr.powf(1.0 / k)).powf(1.0 / max);
        let spread = 1.0 / k - 1.0 / cells as f64;
        let p = 1.0 / (spread * (1.0 / stay - 1.0));
        Ok(p.round().clamp(1.0, u32::MAX as f64) as u32)
    }

    pub fn cells(&self) -> u64 {
        self.cells
    }

    pub fn cell_bits(&self) -> u32 {
        self.cell_bits
    }

    pub fn hash_count(&self) -> u32 {
        self.hash_count
    }

    pub fn decrements(&self) -> u32 {
        self.decrements
    }

    /// Counter ceiling, `2^d - 1`.
    pub fn max_value(&self) -> u64 {
        (1u64 << self.cell_bits) - 1
    }

    pub fn memory_bits(&self) -> u64 {
        self.cells * self.cell_bits as u64
    }
}

/// Stable Bloom filter: `K` probed counters are set to `Max` on each
/// insertion after `P` uniformly chosen counters are decremented.
#[derive(Debug, Clone)]
pub struct StableBloomFilter {
    params: SbfParams,
    seed: u64,
    cells: PackedCells,
    rng: SplitMix64,
}

impl StableBloomFilter {
    pub fn new(params: SbfParams, seed: u64) -> Self {
        Self {
            cells: PackedCells::new(params.cells as usize, params.cell_bits, 0),
            rng: eviction_rng(seed),
            params,
            seed,
        }
    }

    pub fn params(&self) -> &SbfParams {
        &self.params
    }

    pub fn cell(&self, index: u64) -> u64 {
        self.cells.get(index as usize)
    }

    /// Double hashing over two seeded digests.
    #[inline]
    fn probes(&self, element: &[u8]) -> impl Iterator<Item = usize> + '_ {
        let h1 = xxh3_64_with_seed(element, self.seed);
        let h2 = xxh3_64_with_seed(element, splitmix(self.seed)) | 1;
        let m = self.params.cells as u128;
        (0..self.params.hash_count as u64).map(move |i| {
            let h = h1.wrapping_add(i.wrapping_mul(h2));
            ((h as u128 * m) >> 64) as usize
        })
    }
}

impl DuplicateFilter for StableBloomFilter {
    #[inline]
    fn detect(&self, element: &[u8]) -> Verdict {
        Verdict::from_duplicate(self.probes(element).all(|i| self.cells.get(i) != 0))
    }

    fn insert(&mut self, element: &[u8]) {
        let m = self.params.cells;
        for _ in 0..self.params.decrements {
            let i = self.rng.random_range(0..m) as usize;
            let v = self.cells.get(i);
            if v > 0 {
                self.cells.set(i, v - 1);
            }
        }
        let max = self.params.max_value();
        let probes: Vec<usize> = self.probes(element).collect();
        for i in probes {
            self.cells.set(i, max);
        }
    }
}

impl Snapshot for StableBloomFilter {
    /// Header fields: `m, d, K, P, seed`.
    fn snapshot(&self) -> Vec<u8> {
        let fields = [
            self.params.cells,
            self.params.cell_bits as u64,
            self.params.hash_count as u64,
            self.params.decrements as u64,
            self.seed,
        ];
        write_snapshot(VariantTag::Sbf, &fields, &self.cells)
    }
}

pub const DEFAULT_MAX_KICKS: u32 = 500;

/// Cuckoo filter shape. The bucket count is a power of two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CuckooParams {
    buckets: u64,
    entries: u32,
    fingerprint_bits: u32,
    max_kicks: u32,
}

impl CuckooParams {
    pub fn new(buckets: u64, entries: u32, fingerprint_bits: u32) -> Result<Self, ParamError> {
        if !buckets.is_power_of_two() {
            return Err(ParamError::out_of_range("buckets", buckets, "must be a power of two"));
        }
        if entries == 0 {
            return Err(ParamError::out_of_range("entries", entries, "must be at least 1"));
        }
        if !(2..=MAX_FINGERPRINT_BITS).contains(&fingerprint_bits) {
            return Err(ParamError::out_of_range(
                "fingerprint_bits",
                fingerprint_bits,
                "must be in 2..=32 (zero marks an empty entry)",
            ));
        }
        Ok(Self {
            buckets,
            entries,
            fingerprint_bits,
            max_kicks: DEFAULT_MAX_KICKS,
        })
    }

    /// Largest power-of-two bucket count fitting in `memory_bits`.
    pub fn from_memory(memory_bits: u64, entries: u32, fingerprint_bits: u32) -> Result<Self, ParamError> {
        let per_bucket = entries as u64 * fingerprint_bits as u64;
        let fit = memory_bits / per_bucket.max(1);
        if fit == 0 {
            return Err(ParamError::InsufficientMemory {
                memory_bits,
                buckets: entries,
                cell_bits: fingerprint_bits,
            });
        }
        Self::new(1 << (63 - fit.leading_zeros()), entries, fingerprint_bits)
    }

    pub fn with_max_kicks(mut self, max_kicks: u32) -> Self {
        self.max_kicks = max_kicks;
        self
    }

    pub fn buckets(&self) -> u64 {
        self.buckets
    }

    pub fn entries(&self) -> u32 {
        self.entries
    }

    pub fn fingerprint_bits(&self) -> u32 {
        self.fingerprint_bits
    }

    pub fn max_kicks(&self) -> u32 {
        self.max_kicks
    }

    pub fn memory_bits(&self) -> u64 {
        self.buckets * self.entries as u64 * self.fingerprint_bits as u64
    }
}

/// Cuckoo filter that drops the displaced fingerprint instead of failing
/// once the kick budget is spent.
#[derive(Debug, Clone)]
pub struct CuckooFilter {
    params: CuckooParams,
    seed: u64,
    hash: HashFamily,
    cells: PackedCells,
    rng: SplitMix64,
    offset_key: u64,
    dropped: u64,
}

impl CuckooFilter {
    pub fn new(params: CuckooParams, seed: u64) -> Self {
        let hash = HashFamily::new(seed, params.buckets, params.fingerprint_bits).expect("validated parameters");
        let len = (params.buckets * params.entries as u64) as usize;
        Self {
            cells: PackedCells::new(len, params.fingerprint_bits, 0),
            rng: eviction_rng(seed),
            offset_key: splitmix(seed ^ 0x2545_f491_4f6c_dd1d),
            params,
            seed,
            hash,
            dropped: 0,
        }
    }

    pub fn params(&self) -> &CuckooParams {
        &self.params
    }

    /// Fingerprints discarded after exhausting the kick budget.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    #[inline]
    fn alternate(&self, bucket: u64, fingerprint: u64) -> u64 {
        bucket ^ self.offset(fingerprint)
    }

    /// XOR distance between the two buckets of `fingerprint`, in
    /// `1..buckets` so that no fingerprint pairs a bucket with itself.
    #[inline]
    fn offset(&self, fingerprint: u64) -> u64 {
        let buckets = self.params.buckets;
        if buckets == 1 {
            return 0;
        }
        1 + splitmix(fingerprint ^ self.offset_key) % (buckets - 1)
    }

    #[inline]
    fn candidates(&self, element: &[u8]) -> (u64, u64, u64) {
        let (bucket, fingerprint) = self.hash.locate(element);
        (bucket, self.alternate(bucket, fingerprint), fingerprint)
    }

    #[inline]
    fn bucket_contains(&self, bucket: u64, fingerprint: u64) -> bool {
        let base = (bucket * self.params.entries as u64) as usize;
        (base..base + self.params.entries as usize).any(|i| self.cells.get(i) == fingerprint)
    }

    fn try_put(&mut self, bucket: u64, fingerprint: u64) -> bool {
        let base = (bucket * self.params.entries as u64) as usize;
        match (base..base + self.params.entries as usize).find(|&i| self.cells.get(i) == 0) {
            Some(i) => {
                self.cells.set(i, fingerprint);
                true
            }
            None => false,
        }
    }

    fn put(&mut self, first: u64, second: u64, fingerprint: u64) {
        if self.try_put(first, fingerprint) || self.try_put(second, fingerprint) {
            return;
        }
        let mut bucket = if self.rng.random_bool(0.5) { first } else { second };
        let mut carried = fingerprint;
        for _ in 0..self.params.max_kicks {
            let slot = self.rng.random_range(0..self.params.entries as u64);
            let index = (bucket * self.params.entries as u64 + slot) as usize;
            let evicted = self.cells.get(index);
            self.cells.set(index, carried);
            carried = evicted;
            bucket = self.alternate(bucket, carried);
            if self.try_put(bucket, carried) {
                return;
            }
        }
        self.dropped += 1;
    }
}

impl DuplicateFilter for CuckooFilter {
    #[inline]
    fn detect(&self, element: &[u8]) -> Verdict {
        let (first, second, fingerprint) = self.candidates(element);
        Verdict::from_duplicate(self.bucket_contains(first, fingerprint) || self.bucket_contains(second, fingerprint))
    }

    fn insert(&mut self, element: &[u8]) {
        let (first, second, fingerprint) = self.candidates(element);
        if !(self.bucket_contains(first, fingerprint) || self.bucket_contains(second, fingerprint)) {
            self.put(first, second, fingerprint);
        }
    }
}

impl Snapshot for CuckooFilter {
    /// Header fields: `buckets, entries, fingerprint bits, max kicks, seed`.
    fn snapshot(&self) -> Vec<u8> {
        let fields = [
            self.params.buckets,
            self.params.entries as u64,
            self.params.fingerprint_bits as u64,
            self.params.max_kicks as u64,
            self.seed,
        ];
        write_snapshot(VariantTag::Cuckoo, &fields, &self.cells)
    }
}
