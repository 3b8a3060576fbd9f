//! Quotient hash tables.
//!
//! A QHT is an `N x k` grid of `sigma`-bit cells. An element hashes to a row
//! `h(e)` and a fingerprint `s(e)`; it is reported as a duplicate iff `s(e)`
//! sits in row `h(e)`. Three update rules share the grid:
//!
//! * [`QhtVariant::Qht`]: on `Unseen`, store `s(e)` in the first empty cell of
//!   the row, or over a uniformly random cell when the row is full. Nothing is
//!   written on `Duplicate`, so non-empty cells of a row stay distinct.
//! * [`QhtVariant::Qhtd`]: same placement, but performed on every call.
//! * [`QhtVariant::Qqhtd`]: each row is a FIFO of `k` slots; every call drops
//!   the oldest slot and appends `s(e)`.
//!
//! With a single row the structure degenerates to a fingerprint hash table.

use rand::Rng;
use rand_xoshiro::SplitMix64;

use crate::error::ParamError;
use crate::filter::{DuplicateFilter, Snapshot, Verdict};
use crate::hash::{eviction_rng, EmptyCellPolicy, HashFamily, MAX_FINGERPRINT_BITS};
use crate::packed::{FingerprintRows, PackedCells};
use crate::semisort::SemisortCodec;
use crate::snapshot::{write_snapshot, VariantTag};

/// Upper bound on buckets per row.
pub const MAX_BUCKETS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QhtVariant {
    Qht,
    Qhtd,
    Qqhtd,
}

impl QhtVariant {
    pub fn name(self) -> &'static str {
        match self {
            QhtVariant::Qht => "qht",
            QhtVariant::Qhtd => "qhtd",
            QhtVariant::Qqhtd => "qqhtd",
        }
    }

    fn tag(self) -> VariantTag {
        match self {
            QhtVariant::Qht => VariantTag::Qht,
            QhtVariant::Qhtd => VariantTag::Qhtd,
            QhtVariant::Qqhtd => VariantTag::Qqhtd,
        }
    }
}

/// How rows are laid out in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RowLayout {
    /// `k` cells of `sigma` bits each.
    #[default]
    Plain,
    /// One rank per row over sorted contents; see [`crate::semisort`].
    SemiSorted,
}

/// Memory budget and shape of a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QhtParams {
    memory_bits: u64,
    fingerprint_bits: u32,
    buckets: u32,
    policy: EmptyCellPolicy,
    fingerprint_space: Option<u64>,
}

impl QhtParams {
    /// `N = floor(M / (k * sigma))` rows. Requires `M > sigma * k` and
    /// `0 < k <= 2^sigma`.
    pub fn new(memory_bits: u64, fingerprint_bits: u32, buckets: u32) -> Result<Self, ParamError> {
        if fingerprint_bits == 0 || fingerprint_bits > MAX_FINGERPRINT_BITS {
            return Err(ParamError::out_of_range(
                "fingerprint_bits",
                fingerprint_bits,
                "must be in 1..=32",
            ));
        }
        if buckets == 0 {
            return Err(ParamError::out_of_range("buckets", buckets, "must be at least 1"));
        }
        if buckets as u64 > 1u64 << fingerprint_bits {
            return Err(ParamError::TooManyBuckets {
                buckets: buckets as u64,
                limit: 1u64 << fingerprint_bits,
            });
        }
        if buckets > MAX_BUCKETS {
            return Err(ParamError::TooManyBuckets {
                buckets: buckets as u64,
                limit: MAX_BUCKETS as u64,
            });
        }
        if memory_bits <= fingerprint_bits as u64 * buckets as u64 {
            return Err(ParamError::InsufficientMemory {
                memory_bits,
                buckets,
                cell_bits: fingerprint_bits,
            });
        }
        Ok(Self {
            memory_bits,
            fingerprint_bits,
            buckets,
            policy: EmptyCellPolicy::default(),
            fingerprint_space: None,
        })
    }

    /// Exactly `rows * k * sigma` bits. `rows` must be at least 2 because
    /// the memory budget has to exceed a single row.
    pub fn with_rows(rows: u64, buckets: u32, fingerprint_bits: u32) -> Result<Self, ParamError> {
        let memory = rows
            .checked_mul(buckets as u64 * fingerprint_bits as u64)
            .ok_or(ParamError::out_of_range("rows", rows, "memory overflows u64"))?;
        Self::new(memory, fingerprint_bits, buckets)
    }

    pub fn with_policy(mut self, policy: EmptyCellPolicy) -> Self {
        self.policy = policy;
        self.fingerprint_space = None;
        self
    }

    /// Restricts fingerprints to `1..=space` (rederive policy only).
    pub fn with_fingerprint_space(mut self, space: u64) -> Result<Self, ParamError> {
        // validated by building the family once
        HashFamily::new(0, 1, self.fingerprint_bits)?
            .with_policy(self.policy)
            .with_fingerprint_space(space)?;
        self.fingerprint_space = Some(space);
        Ok(self)
    }

    pub fn memory_bits(&self) -> u64 {
        self.memory_bits
    }

    pub fn fingerprint_bits(&self) -> u32 {
        self.fingerprint_bits
    }

    pub fn buckets(&self) -> u32 {
        self.buckets
    }

    pub fn policy(&self) -> EmptyCellPolicy {
        self.policy
    }

    pub fn rows(&self) -> u64 {
        self.memory_bits / (self.buckets as u64 * self.fingerprint_bits as u64)
    }

    /// Number of distinct fingerprints, the `S` of the error-rate formulas.
    pub fn fingerprint_space(&self) -> u64 {
        self.hash_family(0).fingerprint_space()
    }

    /// Bits used by a plain-layout table, `N * k * sigma <= M`.
    pub fn table_bits(&self) -> u64 {
        self.rows() * self.buckets as u64 * self.fingerprint_bits as u64
    }

    fn hash_family(&self, seed: u64) -> HashFamily {
        let family = HashFamily::new(seed, self.rows(), self.fingerprint_bits)
            .expect("validated parameters")
            .with_policy(self.policy);
        match self.fingerprint_space {
            Some(space) => family.with_fingerprint_space(space).expect("validated parameters"),
            None => family,
        }
    }
}

#[derive(Debug, Clone)]
enum Store {
    Plain(FingerprintRows),
    SemiSorted(SemiSortedRows),
}

#[derive(Debug, Clone)]
struct SemiSortedRows {
    ranks: PackedCells,
    codec: SemisortCodec,
    buckets: usize,
}

impl SemiSortedRows {
    #[inline]
    fn load(&self, row: u64, buf: &mut [u64]) {
        self.codec
            .decode(self.ranks.get(row as usize), &mut buf[..self.buckets]);
    }

    #[inline]
    fn save(&mut self, row: u64, buf: &mut [u64]) {
        let rank = self.codec.encode(&mut buf[..self.buckets]);
        self.ranks.set(row as usize, rank);
    }

    fn contains(&self, row: u64, fingerprint: u64) -> bool {
        let mut buf = [0u64; MAX_BUCKETS as usize];
        self.load(row, &mut buf);
        buf[..self.buckets].contains(&fingerprint)
    }

    fn place(&mut self, row: u64, fingerprint: u64, rng: &mut SplitMix64) {
        let mut buf = [0u64; MAX_BUCKETS as usize];
        self.load(row, &mut buf);
        // sorted, so an empty cell (0) can only be at the front
        let slot = if buf[0] == 0 || self.buckets == 1 {
            0
        } else {
            rng.random_range(0..self.buckets)
        };
        buf[slot] = fingerprint;
        self.save(row, &mut buf);
    }
}

/// A quotient hash table of one of the three variants.
#[derive(Debug, Clone)]
pub struct QhtTable {
    params: QhtParams,
    variant: QhtVariant,
    layout: RowLayout,
    seed: u64,
    hash: HashFamily,
    rng: SplitMix64,
    store: Store,
}

impl QhtTable {
    pub fn new(params: QhtParams, variant: QhtVariant, seed: u64) -> Result<Self, ParamError> {
        Self::with_layout(params, variant, RowLayout::Plain, seed)
    }

    pub fn with_layout(
        params: QhtParams,
        variant: QhtVariant,
        layout: RowLayout,
        seed: u64,
    ) -> Result<Self, ParamError> {
        let rows = params.rows();
        let store = match layout {
            RowLayout::Plain => Store::Plain(FingerprintRows::new(rows, params.buckets, params.fingerprint_bits, 0)),
            RowLayout::SemiSorted => {
                if variant == QhtVariant::Qqhtd {
                    return Err(ParamError::Unsupported(
                        "queued rows depend on slot order and cannot be semi-sorted",
                    ));
                }
                let codec = SemisortCodec::new(1u64 << params.fingerprint_bits, params.buckets as usize)
                    .map_err(|_| ParamError::Unsupported("semi-sorted row rank does not fit in 64 bits"))?;
                Store::SemiSorted(SemiSortedRows {
                    ranks: PackedCells::new(rows as usize, codec.width(), 0),
                    codec,
                    buckets: params.buckets as usize,
                })
            }
        };
        Ok(Self {
            hash: params.hash_family(seed),
            rng: eviction_rng(seed),
            params,
            variant,
            layout,
            seed,
            store,
        })
    }

    pub fn params(&self) -> &QhtParams {
        &self.params
    }

    pub fn variant(&self) -> QhtVariant {
        self.variant
    }

    pub fn layout(&self) -> RowLayout {
        self.layout
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash_family(&self) -> &HashFamily {
        &self.hash
    }

    pub fn rows(&self) -> u64 {
        self.params.rows()
    }

    pub fn buckets(&self) -> u32 {
        self.params.buckets
    }

    /// `(row, fingerprint)` of an element.
    #[inline]
    pub fn locate(&self, element: &[u8]) -> (u64, u64) {
        self.hash.locate(element)
    }

    /// Payload bits actually allocated for the cells.
    pub fn table_bits(&self) -> u64 {
        match &self.store {
            Store::Plain(rows) => rows.cells.bit_len(),
            Store::SemiSorted(rows) => rows.ranks.bit_len(),
        }
    }

    /// Contents of a row; slot order for the plain layout, sorted otherwise.
    pub fn row(&self, row: u64) -> Vec<u64> {
        match &self.store {
            Store::Plain(rows) => rows.row(row),
            Store::SemiSorted(rows) => {
                let mut buf = vec![0u64; rows.buckets];
                rows.load(row, &mut buf);
                buf
            }
        }
    }

    /// Number of non-empty cells.
    pub fn occupied_cells(&self) -> u64 {
        if let Store::Plain(rows) = &self.store {
            return rows.occupied() as u64;
        }
        (0..self.rows())
            .map(|r| self.row(r).iter().filter(|&&v| v != 0).count() as u64)
            .sum()
    }

    #[inline]
    fn contains(&self, row: u64, fingerprint: u64) -> bool {
        match &self.store {
            Store::Plain(rows) => rows.contains(row, fingerprint),
            Store::SemiSorted(rows) => rows.contains(row, fingerprint),
        }
    }

    #[inline]
    fn place(&mut self, row: u64, fingerprint: u64) {
        match &mut self.store {
            Store::Plain(rows) => rows.place(row, fingerprint, &mut self.rng),
            Store::SemiSorted(rows) => rows.place(row, fingerprint, &mut self.rng),
        }
    }

    #[inline]
    fn push_back(&mut self, row: u64, fingerprint: u64) {
        match &mut self.store {
            Store::Plain(rows) => rows.push_back(row, fingerprint),
            Store::SemiSorted(_) => unreachable!("rejected at construction"),
        }
    }
}

impl DuplicateFilter for QhtTable {
    #[inline]
    fn detect(&self, element: &[u8]) -> Verdict {
        let (row, fingerprint) = self.locate(element);
        Verdict::from_duplicate(self.contains(row, fingerprint))
    }

    fn insert(&mut self, element: &[u8]) {
        let (row, fingerprint) = self.locate(element);
        match self.variant {
            QhtVariant::Qht => {
                if !self.contains(row, fingerprint) {
                    self.place(row, fingerprint);
                }
            }
            QhtVariant::Qhtd => self.place(row, fingerprint),
            QhtVariant::Qqhtd => self.push_back(row, fingerprint),
        }
    }

    #[inline]
    fn stream(&mut self, element: &[u8]) -> Verdict {
        let (row, fingerprint) = self.locate(element);
        let duplicate = self.contains(row, fingerprint);
        match self.variant {
            QhtVariant::Qht => {
                if !duplicate {
                    self.place(row, fingerprint);
                }
            }
            QhtVariant::Qhtd => self.place(row, fingerprint),
            QhtVariant::Qqhtd => self.push_back(row, fingerprint),
        }
        Verdict::from_duplicate(duplicate)
    }
}

impl Snapshot for QhtTable {
    /// Header fields: `M, sigma, k, N, seed, policy, S, layout`.
    fn snapshot(&self) -> Vec<u8> {
        let fields = [
            self.params.memory_bits,
            self.params.fingerprint_bits as u64,
            self.params.buckets as u64,
            self.rows(),
            self.seed,
            self.params.policy.code(),
            self.params.fingerprint_space(),
            match self.layout {
                RowLayout::Plain => 0,
                RowLayout::SemiSorted => 1,
            },
        ];
        let cells = match &self.store {
            Store::Plain(rows) => &rows.cells,
            Store::SemiSorted(rows) => &rows.ranks,
        };
        write_snapshot(self.variant.tag(), &fields, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::parse_snapshot;
    use proptest::prelude::*;
    use rand::{Rng, RngCore, SeedableRng};

    fn random_stream(n: usize, alphabet: u64, seed: u64) -> Vec<[u8; 8]> {
        let mut rng = SplitMix64::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..alphabet).to_le_bytes()).collect()
    }

    #[test]
    fn setup_derives_rows() {
        assert_eq!(QhtParams::new(65_536, 2, 1).unwrap().rows(), 32_768);
        assert_eq!(QhtParams::new(8_000_000, 3, 1).unwrap().rows(), 2_666_666);
        assert!(matches!(
            QhtParams::new(6, 3, 2),
            Err(ParamError::InsufficientMemory { .. })
        ));
        assert!(QhtParams::new(7, 3, 2).is_ok());
        assert!(matches!(
            QhtParams::new(1000, 2, 5),
            Err(ParamError::TooManyBuckets { .. })
        ));
        assert!(QhtParams::new(1000, 0, 1).is_err());
        assert!(QhtParams::new(1000, 33, 1).is_err());
        let p = QhtParams::new(1000, 3, 3).unwrap();
        assert!(p.table_bits() <= p.memory_bits());
        assert_eq!(p.table_bits(), 111 * 9);
    }

    #[test]
    fn fresh_table_starts_empty() {
        let table = QhtTable::new(QhtParams::new(4096, 4, 2).unwrap(), QhtVariant::Qht, 1).unwrap();
        assert_eq!(table.occupied_cells(), 0);
    }

    #[test]
    fn immediate_repeat_is_duplicate() {
        for variant in [QhtVariant::Qht, QhtVariant::Qhtd, QhtVariant::Qqhtd] {
            let mut table = QhtTable::new(QhtParams::new(4096, 4, 2).unwrap(), variant, 3).unwrap();
            for e in random_stream(500, 1 << 40, 4) {
                table.stream(&e);
                assert_eq!(table.stream(&e), Verdict::Duplicate);
            }
        }
    }

    #[test]
    fn single_cell_eviction_causes_false_negative() {
        // N = 1, k = 1, S = 2: every row collision with a different
        // fingerprint overwrites the only cell.
        let params = QhtParams::new(3, 2, 1).unwrap().with_fingerprint_space(2).unwrap();
        assert_eq!(params.rows(), 1);
        let mut table = QhtTable::new(params, QhtVariant::Qht, 17).unwrap();
        let e1 = b"e1".to_vec();
        let f1 = table.locate(&e1).1;
        let e2 = (0u32..)
            .map(|i| format!("e2-{i}").into_bytes())
            .find(|e| table.locate(e).1 != f1)
            .unwrap();
        assert_eq!(table.stream(&e1), Verdict::Unseen);
        assert_eq!(table.stream(&e2), Verdict::Unseen);
        assert_eq!(table.row(0), vec![table.locate(&e2).1]);
        assert_eq!(table.stream(&e1), Verdict::Unseen);
    }

    #[test]
    fn qhtd_keeps_repeated_copies() {
        let params = QhtParams::new(4 * 4 * 64, 4, 4).unwrap();
        let mut table = QhtTable::new(params, QhtVariant::Qhtd, 5).unwrap();
        let (row, fp) = table.locate(b"same");
        for _ in 0..5 {
            table.stream(b"same");
        }
        assert_eq!(table.row(row), vec![fp; 4]);
    }

    #[test]
    fn qht_leaves_state_untouched_on_duplicate() {
        let mut table = QhtTable::new(QhtParams::new(4096, 4, 2).unwrap(), QhtVariant::Qht, 5).unwrap();
        table.stream(b"x");
        let before = table.snapshot();
        assert_eq!(table.stream(b"x"), Verdict::Duplicate);
        assert_eq!(table.snapshot(), before);
    }

    #[test]
    fn qqhtd_is_fifo() {
        let params = QhtParams::new(7, 3, 2).unwrap();
        let mut table = QhtTable::new(params, QhtVariant::Qqhtd, 8).unwrap();
        let mut by_fp: Vec<Option<Vec<u8>>> = vec![None; 8];
        for i in 0u32.. {
            let e = i.to_le_bytes().to_vec();
            let fp = table.locate(&e).1 as usize;
            by_fp[fp].get_or_insert(e);
            if by_fp[1..].iter().filter(|x| x.is_some()).count() >= 3 {
                break;
            }
        }
        let picks: Vec<(Vec<u8>, u64)> = by_fp
            .iter()
            .enumerate()
            .filter_map(|(fp, e)| e.clone().map(|e| (e, fp as u64)))
            .take(3)
            .collect();
        let (a, b, c) = (&picks[0], &picks[1], &picks[2]);
        table.stream(&a.0);
        table.stream(&b.0);
        assert_eq!(table.row(0), vec![a.1, b.1]);
        assert_eq!(table.stream(&c.0), Verdict::Unseen);
        assert_eq!(table.row(0), vec![b.1, c.1]);
        // a duplicate still pops the oldest slot
        assert_eq!(table.stream(&b.0), Verdict::Duplicate);
        assert_eq!(table.row(0), vec![c.1, b.1]);
    }

    #[test]
    fn qqhtd_with_one_bucket_matches_qht() {
        let params = QhtParams::new(3 * 512, 3, 1).unwrap();
        let mut qht = QhtTable::new(params.clone(), QhtVariant::Qht, 21).unwrap();
        let mut queued = QhtTable::new(params, QhtVariant::Qqhtd, 21).unwrap();
        for e in random_stream(50_000, 4096, 22) {
            assert_eq!(qht.stream(&e), queued.stream(&e));
        }
        let a = qht.snapshot();
        let b = queued.snapshot();
        assert_eq!(parse_snapshot(&a).unwrap().payload, parse_snapshot(&b).unwrap().payload);
    }

    #[test]
    fn saturated_fpr_approaches_k_over_s() {
        // N = 1024, k = 1, S = 8 (all 3-bit values are fingerprints)
        let params = QhtParams::with_rows(1024, 1, 3)
            .unwrap()
            .with_policy(EmptyCellPolicy::ZeroIsFingerprint);
        assert_eq!(params.fingerprint_space(), 8);
        let mut table = QhtTable::new(params, QhtVariant::Qht, 99).unwrap();
        let mut rng = SplitMix64::seed_from_u64(100);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| table.stream(&rng.next_u64().to_le_bytes()).is_duplicate())
            .count();
        let fpr = hits as f64 / n as f64;
        assert!((fpr - 0.125).abs() < 0.01, "fpr {fpr}");
    }

    #[test]
    fn qhtd_asymptotic_fpr() {
        // S = 7 (3-bit cells, 0 reserved), k = 4: 1 - (6/7)^4
        let params = QhtParams::with_rows(256, 4, 3).unwrap();
        let mut table = QhtTable::new(params, QhtVariant::Qhtd, 2).unwrap();
        let mut rng = SplitMix64::seed_from_u64(3);
        for _ in 0..50_000 {
            table.stream(&rng.next_u64().to_le_bytes());
        }
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| table.stream(&rng.next_u64().to_le_bytes()).is_duplicate())
            .count();
        let fpr = hits as f64 / n as f64;
        let expected = 1.0 - (6.0f64 / 7.0).powi(4);
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((fpr - expected).abs() < 4.0 * se + 0.003, "fpr {fpr} vs {expected}");
    }

    #[test]
    fn stream_equals_detect_then_insert() {
        for variant in [QhtVariant::Qht, QhtVariant::Qhtd, QhtVariant::Qqhtd] {
            let params = QhtParams::new(600, 3, 4).unwrap();
            let mut a = QhtTable::new(params.clone(), variant, 12).unwrap();
            let mut b = QhtTable::new(params, variant, 12).unwrap();
            for e in random_stream(20_000, 2000, 13) {
                let expected = b.detect(&e);
                b.insert(&e);
                assert_eq!(a.stream(&e), expected);
            }
            assert_eq!(a.snapshot(), b.snapshot());
        }
    }

    #[test]
    fn detect_is_pure() {
        let mut table = QhtTable::new(QhtParams::new(900, 3, 3).unwrap(), QhtVariant::Qht, 4).unwrap();
        for e in random_stream(2000, 500, 5) {
            table.stream(&e);
        }
        let before = table.snapshot();
        for e in random_stream(2000, 1000, 6) {
            table.detect(&e);
        }
        assert_eq!(table.snapshot(), before);
    }

    #[test]
    fn deterministic_for_same_seed() {
        let params = QhtParams::new(2048, 4, 4).unwrap();
        let mut a = QhtTable::new(params.clone(), QhtVariant::Qht, 77).unwrap();
        let mut b = QhtTable::new(params.clone(), QhtVariant::Qht, 77).unwrap();
        let mut c = QhtTable::new(params, QhtVariant::Qht, 78).unwrap();
        let stream = random_stream(30_000, 5000, 1);
        let va: Vec<_> = stream.iter().map(|e| a.stream(e)).collect();
        let vb: Vec<_> = stream.iter().map(|e| b.stream(e)).collect();
        let vc: Vec<_> = stream.iter().map(|e| c.stream(e)).collect();
        assert_eq!(va, vb);
        assert_eq!(a.snapshot(), b.snapshot());
        assert_ne!(va, vc);
    }

    /// Direct single-row model: one row of `k` slots, same hash and RNG.
    struct OneRowModel {
        slots: Vec<u64>,
        hash: HashFamily,
        rng: SplitMix64,
    }

    impl OneRowModel {
        fn stream(&mut self, e: &[u8]) -> Verdict {
            let fp = self.hash.fingerprint(e);
            if self.slots.contains(&fp) {
                return Verdict::Duplicate;
            }
            if let Some(slot) = self.slots.iter_mut().find(|s| **s == 0) {
                *slot = fp;
            } else {
                let k = self.slots.len();
                let rank = if k == 1 { 0 } else { self.rng.random_range(0..k) };
                let mut order: Vec<usize> = (0..k).collect();
                order.sort_by_key(|&i| (self.slots[i], i));
                self.slots[order[rank]] = fp;
            }
            Verdict::Unseen
        }
    }

    #[test]
    fn single_row_table_is_a_hash_table() {
        for k in [1u32, 2, 5] {
            let params = QhtParams::new(4 * k as u64 + 1, 4, k).unwrap();
            assert_eq!(params.rows(), 1);
            let mut table = QhtTable::new(params, QhtVariant::Qht, 31).unwrap();
            let mut model = OneRowModel {
                slots: vec![0; k as usize],
                hash: table.hash_family().clone(),
                rng: eviction_rng(31),
            };
            for e in random_stream(5000, 64, 32) {
                assert_eq!(table.stream(&e), model.stream(&e));
                assert_eq!(table.row(0), model.slots);
            }
        }
    }

    #[test]
    fn snapshot_header_and_memory_bound() {
        let params = QhtParams::new(10_000, 3, 2).unwrap();
        let table = QhtTable::new(params.clone(), QhtVariant::Qhtd, 9).unwrap();
        let bytes = table.snapshot();
        let view = parse_snapshot(&bytes).unwrap();
        assert_eq!(view.variant, VariantTag::Qhtd);
        assert_eq!(&view.fields[..5], &[10_000, 3, 2, 1666, 9]);
        assert!(view.payload_bits <= params.memory_bits());
    }

    #[test]
    fn semisorted_layout_gives_identical_verdicts() {
        for (variant, k, sigma) in [
            (QhtVariant::Qht, 4, 4),
            (QhtVariant::Qhtd, 3, 3),
            (QhtVariant::Qht, 1, 3),
        ] {
            let params = QhtParams::new(4000, sigma, k).unwrap();
            let mut plain = QhtTable::new(params.clone(), variant, 41).unwrap();
            let mut sorted = QhtTable::with_layout(params, variant, RowLayout::SemiSorted, 41).unwrap();
            assert!(sorted.table_bits() <= plain.table_bits());
            for e in random_stream(30_000, 3000, 42) {
                assert_eq!(plain.stream(&e), sorted.stream(&e));
            }
            for r in 0..plain.rows() {
                let mut row = plain.row(r);
                row.sort_unstable();
                assert_eq!(row, sorted.row(r));
            }
        }
        let params = QhtParams::new(4096, 4, 4).unwrap();
        let sorted = QhtTable::with_layout(params, QhtVariant::Qht, RowLayout::SemiSorted, 1).unwrap();
        assert_eq!(sorted.table_bits(), 256 * 12);
        assert!(QhtTable::with_layout(
            QhtParams::new(4096, 4, 4).unwrap(),
            QhtVariant::Qqhtd,
            RowLayout::SemiSorted,
            1
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn qht_invariants_hold(
            seed: u64,
            rows in 1u64..8,
            k in 1u32..5,
            sigma in 2u32..5,
            stream in proptest::collection::vec(0u16..200, 1..400),
        ) {
            prop_assume!((k as u64) < (1u64 << sigma));
            let params = QhtParams::new(rows * k as u64 * sigma as u64 + 1, sigma, k).unwrap();
            let mut table = QhtTable::new(params, QhtVariant::Qht, seed).unwrap();
            for x in stream {
                let e = x.to_le_bytes();
                let (row, fp) = table.locate(&e);
                let before = table.row(row);
                let verdict = table.stream(&e);
                let after = table.row(row);
                // soundness against the pre-call row
                prop_assert_eq!(verdict.is_duplicate(), before.contains(&fp));
                let changed = before.iter().zip(&after).filter(|(a, b)| a != b).count();
                if verdict.is_duplicate() {
                    prop_assert_eq!(changed, 0);
                } else {
                    prop_assert_eq!(changed, 1);
                    prop_assert!(after.contains(&fp));
                }
                let mut occupied: Vec<u64> = after.iter().copied().filter(|&v| v != 0).collect();
                let n = occupied.len();
                occupied.sort_unstable();
                occupied.dedup();
                prop_assert_eq!(occupied.len(), n);
            }
        }

        #[test]
        fn qqhtd_shifts_by_exactly_one(
            seed: u64,
            k in 1u32..6,
            stream in proptest::collection::vec(any::<u32>(), 1..200),
        ) {
            let params = QhtParams::new(8 * k as u64 * 4, 4, k).unwrap();
            let mut table = QhtTable::new(params, QhtVariant::Qqhtd, seed).unwrap();
            for x in stream {
                let e = x.to_le_bytes();
                let (row, fp) = table.locate(&e);
                let before = table.row(row);
                let verdict = table.stream(&e);
                let after = table.row(row);
                prop_assert_eq!(verdict.is_duplicate(), before.contains(&fp));
                prop_assert_eq!(&after[..k as usize - 1], &before[1..]);
                prop_assert_eq!(after[k as usize - 1], fp);
            }
        }
    }
}
