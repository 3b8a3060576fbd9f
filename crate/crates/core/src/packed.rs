//! Bit-exact cell storage.
//!
//! Cells of any width from 0 to 64 bits are packed contiguously, row-major,
//! into 64-bit words. A table of `n` cells of `w` bits occupies exactly
//! `n * w` bits of payload.

use rand::Rng;
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedCells {
    width: u32,
    len: usize,
    mask: u64,
    words: Vec<u64>,
}

impl PackedCells {
    pub fn new(len: usize, width: u32, fill: u64) -> Self {
        assert!(width <= 64, "cell width {width} exceeds 64 bits");
        let bits = len as u128 * width as u128;
        let words = bits.div_ceil(64) as usize;
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        let mut cells = Self {
            width,
            len,
            mask,
            words: vec![0; words],
        };
        if fill & mask != 0 {
            for i in 0..len {
                cells.set(i, fill);
            }
        }
        cells
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Payload size in bits.
    pub fn bit_len(&self) -> u64 {
        self.len as u64 * self.width as u64
    }

    #[inline]
    pub fn get(&self, index: usize) -> u64 {
        debug_assert!(index < self.len);
        if self.width == 0 {
            return 0;
        }
        let bit = index * self.width as usize;
        let word = bit / 64;
        let offset = (bit % 64) as u32;
        let lo = self.words[word] >> offset;
        if offset + self.width <= 64 {
            lo & self.mask
        } else {
            (lo | (self.words[word + 1] << (64 - offset))) & self.mask
        }
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: u64) {
        debug_assert!(index < self.len);
        if self.width == 0 {
            return;
        }
        let value = value & self.mask;
        let bit = index * self.width as usize;
        let word = bit / 64;
        let offset = (bit % 64) as u32;
        self.words[word] = (self.words[word] & !(self.mask << offset)) | (value << offset);
        if offset + self.width > 64 {
            let spill = 64 - offset;
            let high_mask = self.mask >> spill;
            self.words[word + 1] = (self.words[word + 1] & !high_mask) | (value >> spill);
        }
    }

    /// Payload as little-endian bytes, truncated to `ceil(bit_len / 8)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        bytes.truncate(self.bit_len().div_ceil(8) as usize);
        bytes
    }
}

/// `rows x buckets` fingerprint grid with a designated empty code.
///
/// Row operations are phrased in multiset terms so that a positional layout
/// and an order-free layout evict the same fingerprint for the same random
/// draw: the victim of a full-row insertion is the `j`-th smallest value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct FingerprintRows {
    pub(crate) cells: PackedCells,
    pub(crate) buckets: usize,
    pub(crate) empty: u64,
}

impl FingerprintRows {
    pub(crate) fn new(rows: u64, buckets: u32, width: u32, empty: u64) -> Self {
        let len = rows as usize * buckets as usize;
        Self {
            cells: PackedCells::new(len, width, empty),
            buckets: buckets as usize,
            empty,
        }
    }

    #[inline]
    pub(crate) fn contains(&self, row: u64, fingerprint: u64) -> bool {
        let base = row as usize * self.buckets;
        (base..base + self.buckets).any(|i| self.cells.get(i) == fingerprint)
    }

    /// Stores `fingerprint` in the first empty cell of `row`, or over a
    /// uniformly chosen occupant when the row is full.
    #[inline]
    pub(crate) fn place(&mut self, row: u64, fingerprint: u64, rng: &mut SplitMix64) {
        let base = row as usize * self.buckets;
        if let Some(i) = (base..base + self.buckets).find(|&i| self.cells.get(i) == self.empty) {
            self.cells.set(i, fingerprint);
            return;
        }
        let victim = if self.buckets == 1 {
            base
        } else {
            let rank = rng.random_range(0..self.buckets);
            base + self.position_of_rank(base, rank)
        };
        self.cells.set(victim, fingerprint);
    }

    /// FIFO update: drop the cell at position 0, shift, append at the tail.
    #[inline]
    pub(crate) fn push_back(&mut self, row: u64, fingerprint: u64) {
        let base = row as usize * self.buckets;
        for i in base..base + self.buckets - 1 {
            let next = self.cells.get(i + 1);
            self.cells.set(i, next);
        }
        self.cells.set(base + self.buckets - 1, fingerprint);
    }

    /// Column holding the `rank`-th smallest value of the row (ties broken by
    /// column).
    fn position_of_rank(&self, base: usize, rank: usize) -> usize {
        let k = self.buckets;
        (0..k)
            .find(|&i| {
                let v = self.cells.get(base + i);
                let below = (0..k)
                    .filter(|&j| {
                        let w = self.cells.get(base + j);
                        w < v || (w == v && j < i)
                    })
                    .count();
                below == rank
            })
            .expect("every column has a rank")
    }

    pub(crate) fn row(&self, row: u64) -> Vec<u64> {
        let base = row as usize * self.buckets;
        (base..base + self.buckets).map(|i| self.cells.get(i)).collect()
    }

    pub(crate) fn occupied(&self) -> usize {
        (0..self.cells.len())
            .filter(|&i| self.cells.get(i) != self.empty)
            .count()
    }
}
