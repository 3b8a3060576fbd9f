//! Saturation attacks and the keyed-permutation defense.
//!
//! An attacker who can feed a filter arbitrary elements makes it forget a
//! target by flooding it with about `h * M` fresh elements, where `M` is the
//! number of elements the filter can hold (`N * k` for a quotient hash
//! table). `M` itself can be recovered from the outside by measuring how long
//! a flood must be before a replayed element stops being recognized.

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use num_rational::Ratio;
use thiserror::Error;

use crate::filter::{DuplicateFilter, Element, Snapshot, Verdict};

const TARGET_NAMESPACE: u64 = 0x7461_7267_6574_0000;
const FLOOD_NAMESPACE: u64 = 0x666c_6f6f_6400_0000;

/// Attack element: 24 bytes `namespace | trial | index`, little-endian.
fn attack_element(namespace: u64, trial: u64, index: u64) -> [u8; 24] {
    let mut out = [0u8; 24];
    out[..8].copy_from_slice(&namespace.to_le_bytes());
    out[8..16].copy_from_slice(&trial.to_le_bytes());
    out[16..].copy_from_slice(&index.to_le_bytes());
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("attack needs at least one trial")]
    NoTrials,
    #[error("replay success never reached {threshold:.3} with floods up to {max_flood} elements")]
    NoConvergence { max_flood: u64, threshold: f64 },
}

/// Parameters of a false-negative attack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackConfig {
    capacity: u64,
    flood_factor: Ratio<u64>,
    trials: u32,
    alphabet: u64,
}

impl AttackConfig {
    /// `capacity` is the attacker's estimate of how many elements the filter
    /// holds; each trial floods `ceil(flood_factor * capacity)` elements.
    pub fn new(capacity: u64, flood_factor: Ratio<u64>, trials: u32) -> Result<Self, AdversaryError> {
        if trials == 0 {
            return Err(AdversaryError::NoTrials);
        }
        Ok(Self {
            capacity,
            flood_factor,
            trials,
            alphabet: 0,
        })
    }

    /// Selects a disjoint family of attack elements.
    pub fn with_alphabet(mut self, alphabet: u64) -> Self {
        self.alphabet = alphabet;
        self
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn flood_factor(&self) -> Ratio<u64> {
        self.flood_factor
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    pub fn flood_len(&self) -> u64 {
        (self.flood_factor * Ratio::from_integer(self.capacity))
            .ceil()
            .to_integer()
    }
}

/// Replays a target after a flood of `flood_len` fresh elements, `trials`
/// times on the same filter, and returns the fraction of replays answered
/// `Unseen`.
fn replay_success<F: DuplicateFilter + ?Sized>(
    filter: &mut F,
    flood_len: u64,
    trials: u32,
    alphabet: u64,
    first_trial: u64,
) -> f64 {
    let target_ns = TARGET_NAMESPACE ^ alphabet;
    let flood_ns = FLOOD_NAMESPACE ^ alphabet;
    let mut forgotten = 0u32;
    for t in 0..trials as u64 {
        let trial = first_trial + t;
        let target = attack_element(target_ns, trial, 0);
        filter.stream(&target);
        for i in 0..flood_len {
            filter.stream(&attack_element(flood_ns, trial, i));
        }
        if filter.stream(&target) == Verdict::Unseen {
            forgotten += 1;
        }
    }
    forgotten as f64 / trials as f64
}

/// Runs the flood-and-replay attack; trials use disjoint element ranges.
pub fn false_negative_attack<F: DuplicateFilter + ?Sized>(filter: &mut F, config: &AttackConfig) -> f64 {
    replay_success(filter, config.flood_len(), config.trials, config.alphabet, 0)
}

/// Settings for [`estimate_memory`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub trials_per_probe: u32,
    pub max_flood: u64,
    /// Replay success that marks the capacity, `1 - 1/e` by default.
    pub threshold: f64,
    pub alphabet: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            trials_per_probe: 200,
            max_flood: 1 << 24,
            threshold: 1.0 - (-1.0f64).exp(),
            alphabet: 0,
        }
    }
}

/// Flood length at which replayed elements start being forgotten with
/// probability `threshold`: doubling, then bisection.
pub fn estimate_memory<F: DuplicateFilter + ?Sized>(
    oracle: &mut F,
    config: &EstimateConfig,
) -> Result<u64, AdversaryError> {
    if config.trials_per_probe == 0 {
        return Err(AdversaryError::NoTrials);
    }
    let no_convergence = AdversaryError::NoConvergence {
        max_flood: config.max_flood,
        threshold: config.threshold,
    };
    let mut next_trial = 0u64;
    let mut probe = |oracle: &mut F, flood: u64| {
        let rate = replay_success(oracle, flood, config.trials_per_probe, config.alphabet, next_trial);
        next_trial += config.trials_per_probe as u64;
        rate
    };
    // a filter that forgets without any flood carries no capacity signal
    if probe(oracle, 0) >= config.threshold {
        return Err(no_convergence);
    }
    let mut high = 1u64;
    while probe(oracle, high) < config.threshold {
        if high >= config.max_flood {
            return Err(no_convergence);
        }
        high = (high * 2).min(config.max_flood);
    }
    let mut low = high / 2;
    while high - low > 1.max(low / 16) {
        let mid = low + (high - low) / 2;
        if probe(oracle, mid) >= config.threshold {
            high = mid;
        } else {
            low = mid;
        }
    }
    Ok(high)
}

/// Filter whose inputs first pass through a secret keyed permutation, so
/// that an attacker cannot choose which rows and fingerprints are hit.
///
/// Elements are padded with `0x80` and zeros to whole 16-byte blocks and
/// encrypted with AES-128 in CBC mode under a zero IV.
#[derive(Clone)]
pub struct KeyedFilter<F> {
    inner: F,
    cipher: Aes128,
}

impl<F> std::fmt::Debug for KeyedFilter<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyedFilter").finish_non_exhaustive()
    }
}

pub fn keyed_wrapper<F: DuplicateFilter>(filter: F, secret_key: [u8; 16]) -> KeyedFilter<F> {
    KeyedFilter {
        inner: filter,
        cipher: Aes128::new(&secret_key.into()),
    }
}

impl<F> KeyedFilter<F> {
    pub fn inner(&self) -> &F {
        &self.inner
    }

    pub fn into_inner(self) -> F {
        self.inner
    }

    /// Keyed image of an element.
    pub fn permute(&self, element: &[u8]) -> Element {
        let blocks = element.len() / 16 + 1;
        let mut out = vec![0u8; blocks * 16];
        out[..element.len()].copy_from_slice(element);
        out[element.len()] = 0x80;
        let mut chain = [0u8; 16];
        for block in out.chunks_exact_mut(16) {
            for (b, c) in block.iter_mut().zip(chain) {
                *b ^= c;
            }
            self.cipher.encrypt_block(block.into());
            chain.copy_from_slice(block);
        }
        out
    }
}

impl<F: DuplicateFilter> DuplicateFilter for KeyedFilter<F> {
    fn detect(&self, element: &[u8]) -> Verdict {
        self.inner.detect(&self.permute(element))
    }

    fn insert(&mut self, element: &[u8]) {
        let image = self.permute(element);
        self.inner.insert(&image);
    }

    fn stream(&mut self, element: &[u8]) -> Verdict {
        let image = self.permute(element);
        self.inner.stream(&image)
    }
}

impl<F: Snapshot> Snapshot for KeyedFilter<F> {
    fn snapshot(&self) -> Vec<u8> {
        self.inner.snapshot()
    }
}
