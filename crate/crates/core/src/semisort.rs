//! Order-free row encoding.
//!
//! A row of `k` cells over an alphabet of `S` symbols (empty cells count as
//! the symbol 0) only matters as a multiset, and there are `C(S+k-1, k)`
//! multisets instead of `S^k` tuples. A row is stored as the colexicographic
//! rank of its sorted contents: the sorted tuple `x_0 <= ... <= x_{k-1}` maps
//! to the strictly increasing `y_i = x_i + i`, whose rank is
//! `sum_i C(y_i, i + 1)`. The all-empty row has rank 0.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SemisortError {
    #[error("C({n}, {k}) does not fit in 64 bits")]
    Overflow { n: u64, k: u64 },
    #[error("rank {rank} is outside 0..{states}")]
    RankOutOfRange { rank: u64, states: u64 },
    #[error("symbol {value} is outside the alphabet of {alphabet}")]
    SymbolOutOfRange { value: u64, alphabet: u64 },
    #[error("alphabet and row length must both be at least 1")]
    Empty,
}

/// Sorted multiset of `k` cell values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RowMultiset {
    values: Vec<u64>,
}

impl RowMultiset {
    pub fn new(mut values: Vec<u64>) -> Self {
        values.sort_unstable();
        Self { values }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `C(n, k)`, or `None` if it overflows `u64`.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc = C(n - k + i, i), exact at every step
        acc = acc * (n as u128 - k as u128 + i) / i;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Number of sorted rows: multisets of size `k` over `alphabet` symbols.
pub fn count_states(alphabet: u64, k: u64) -> Result<u64, SemisortError> {
    if alphabet == 0 || k == 0 {
        return Err(SemisortError::Empty);
    }
    let n = alphabet - 1 + k;
    binomial(n, k).ok_or(SemisortError::Overflow { n, k })
}

/// Bits needed to store any rank: `ceil(log2(count_states))`.
pub fn encoded_width(alphabet: u64, k: u64) -> Result<u32, SemisortError> {
    let states = count_states(alphabet, k)?;
    Ok(64 - (states - 1).leading_zeros())
}

pub fn encode_row(row: &RowMultiset, alphabet: u64) -> Result<u64, SemisortError> {
    let k = row.len() as u64;
    count_states(alphabet, k)?;
    let mut rank = 0u64;
    for (i, &x) in row.values().iter().enumerate() {
        if x >= alphabet {
            return Err(SemisortError::SymbolOutOfRange { value: x, alphabet });
        }
        let term = binomial(x + i as u64, i as u64 + 1).expect("bounded by count_states");
        rank += term;
    }
    Ok(rank)
}

pub fn decode_row(rank: u64, alphabet: u64, k: u64) -> Result<RowMultiset, SemisortError> {
    let states = count_states(alphabet, k)?;
    if rank >= states {
        return Err(SemisortError::RankOutOfRange { rank, states });
    }
    let mut values = vec![0u64; k as usize];
    let mut rest = rank;
    for i in (1..=k).rev() {
        // largest y in [i-1, alphabet+i-2] with C(y, i) <= rest
        let (mut lo, mut hi) = (i - 1, alphabet + i - 2);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if binomial(mid, i).expect("bounded by count_states") <= rest {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        rest -= binomial(lo, i).expect("bounded by count_states");
        values[i as usize - 1] = lo - (i - 1);
    }
    Ok(RowMultiset { values })
}

/// Table-driven encoder for one `(alphabet, k)` pair, used on the hot path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SemisortCodec {
    alphabet: u64,
    k: usize,
    width: u32,
    /// `binom[r][n] = C(n, r)` for `r <= k`, `n <= alphabet + k - 2`.
    binom: Vec<Vec<u64>>,
}

impl SemisortCodec {
    pub(crate) fn new(alphabet: u64, k: usize) -> Result<Self, SemisortError> {
        let width = encoded_width(alphabet, k as u64)?;
        let top = (alphabet + k as u64 - 1) as usize;
        let binom = (0..=k as u64)
            .map(|r| (0..top as u64).map(|n| binomial(n, r).unwrap_or(u64::MAX)).collect())
            .collect();
        Ok(Self {
            alphabet,
            k,
            width,
            binom,
        })
    }

    pub(crate) fn width(&self) -> u32 {
        self.width
    }

    /// Sorts `values` in place and returns their rank.
    pub(crate) fn encode(&self, values: &mut [u64]) -> u64 {
        values.sort_unstable();
        values
            .iter()
            .enumerate()
            .map(|(i, &x)| self.binom[i + 1][x as usize + i])
            .sum()
    }

    pub(crate) fn decode(&self, mut rank: u64, out: &mut [u64]) {
        for i in (1..=self.k).rev() {
            let column = &self.binom[i];
            let (mut lo, mut hi) = (i - 1, self.alphabet as usize + i - 2);
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                if column[mid] <= rank {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            rank -= column[lo];
            out[i - 1] = (lo - (i - 1)) as u64;
        }
    }
}
