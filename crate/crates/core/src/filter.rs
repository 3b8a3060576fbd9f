//! The duplicate-filter contract shared by every structure in this crate.
//!
//! A filter answers, for each element of a stream, whether it has been seen
//! before. `detect` only reads state, `insert` only updates it, and `stream`
//! is the composition used in practice: answer first, then record.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Owned stream element. Equality is byte-wise and the empty string is legal.
pub type Element = Vec<u8>;

/// Answer of a duplicate filter for one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Duplicate,
    Unseen,
}

impl Verdict {
    #[inline]
    pub fn is_duplicate(self) -> bool {
        matches!(self, Verdict::Duplicate)
    }

    #[inline]
    pub(crate) fn from_duplicate(duplicate: bool) -> Self {
        if duplicate {
            Verdict::Duplicate
        } else {
            Verdict::Unseen
        }
    }
}

/// A bounded-memory duplicate detector.
///
/// Implementations must keep `detect` free of observable side effects, and
/// `stream(e)` must return exactly what `detect(e)` would have returned on the
/// state before the call. Overriding `stream` is allowed for speed only.
pub trait DuplicateFilter {
    fn detect(&self, element: &[u8]) -> Verdict;

    fn insert(&mut self, element: &[u8]);

    fn stream(&mut self, element: &[u8]) -> Verdict {
        let verdict = self.detect(element);
        self.insert(element);
        verdict
    }
}

impl<F: DuplicateFilter + ?Sized> DuplicateFilter for Box<F> {
    fn detect(&self, element: &[u8]) -> Verdict {
        (**self).detect(element)
    }

    fn insert(&mut self, element: &[u8]) {
        (**self).insert(element)
    }

    fn stream(&mut self, element: &[u8]) -> Verdict {
        (**self).stream(element)
    }
}

/// Filters whose full state can be serialized for comparison and persistence.
pub trait Snapshot {
    fn snapshot(&self) -> Vec<u8>;
}

/// Answers `Duplicate` with a fixed probability, ignoring its input.
///
/// Every saturated filter behaves like one of these from the error-rate point
/// of view, so it serves as the reference point for `FPR + FNR = 1`.
///
/// `detect` cannot draw randomness without mutating state, so it reports the
/// answer `stream` will give next; the draw is consumed by `insert`.
#[derive(Debug, Clone)]
pub struct RandomFilter {
    probability: f64,
    rng: SplitMix64,
    next: bool,
}

impl RandomFilter {
    pub fn new(probability: f64, seed: u64) -> Self {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let probability = probability.clamp(0.0, 1.0);
        let next = rng.random_bool(probability);
        Self { probability, rng, next }
    }
}

impl DuplicateFilter for RandomFilter {
    fn detect(&self, _element: &[u8]) -> Verdict {
        Verdict::from_duplicate(self.next)
    }

    fn insert(&mut self, _element: &[u8]) {
        self.next = self.rng.random_bool(self.probability);
    }
}
