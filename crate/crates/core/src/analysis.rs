//! Closed-form error rates of quotient-style filters.
//!
//! Notation: `N` rows, `k` buckets per row, `S` distinct fingerprints and a
//! universe of `U` elements. With
//!
//! ```text
//! a = (S - k) / (k (N S - 1))     per-step eviction probability of a stored element
//! b = k / S                       saturated false-positive probability
//! c = 1 - 1 / (N k)
//! ```
//!
//! the probability that a fresh element is a false positive after `m`
//! insertions is `b (1 - c^m)`, and the long-run false negative rate is a
//! four-term expression in `a, b, c, U` that tends to `1 - b` as `U` grows.
//!
//! Powers of numbers close to one are evaluated as `exp(m * ln_1p(-x))`.

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("target {target} has no representation k/2^sigma with sigma <= 16")]
    Unreachable { target: Ratio<u64> },
    #[error("{memory_bits} bits cannot hold a row of {buckets} cells of {bits} bits")]
    InsufficientMemory { memory_bits: u64, buckets: u64, bits: u32 },
}

/// `(1 - x)^m` for `x` in `[0, 1]`.
#[inline]
fn pow_one_minus(x: f64, m: f64) -> f64 {
    if m == 0.0 {
        1.0
    } else {
        (m * (-x).ln_1p()).exp()
    }
}

/// `1 - (1 - x)^m`, without cancellation for small `x`.
#[inline]
fn one_minus_pow_one_minus(x: f64, m: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        -(m * (-x).ln_1p()).exp_m1()
    }
}

/// Shape of a filter and its input universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateInputs {
    rows: u64,
    buckets: u64,
    fingerprint_space: u64,
    universe: u64,
}

impl RateInputs {
    pub fn new(rows: u64, buckets: u64, fingerprint_space: u64, universe: u64) -> Result<Self, AnalysisError> {
        if rows == 0 {
            return Err(AnalysisError::InvalidInput("rows must be at least 1"));
        }
        if buckets == 0 {
            return Err(AnalysisError::InvalidInput("buckets must be at least 1"));
        }
        if fingerprint_space < 2 {
            return Err(AnalysisError::InvalidInput("fingerprint space must be at least 2"));
        }
        if buckets > fingerprint_space {
            return Err(AnalysisError::InvalidInput(
                "buckets must not exceed the fingerprint space",
            ));
        }
        if universe == 0 {
            return Err(AnalysisError::InvalidInput("universe must be at least 1"));
        }
        Ok(Self {
            rows,
            buckets,
            fingerprint_space,
            universe,
        })
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn buckets(&self) -> u64 {
        self.buckets
    }

    pub fn fingerprint_space(&self) -> u64 {
        self.fingerprint_space
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    fn ns(&self) -> f64 {
        self.rows as f64 * self.fingerprint_space as f64
    }

    fn nk(&self) -> f64 {
        self.rows as f64 * self.buckets as f64
    }

    /// `(S - k) / (k (N S - 1))`.
    pub fn a(&self) -> f64 {
        (self.fingerprint_space - self.buckets) as f64 / (self.buckets as f64 * (self.ns() - 1.0))
    }

    /// `k / S`.
    pub fn b(&self) -> f64 {
        self.buckets as f64 / self.fingerprint_space as f64
    }

    /// `1 - 1 / (N k)`.
    pub fn c(&self) -> f64 {
        1.0 - 1.0 / self.nk()
    }

    /// `1 - a - c = (N k - 1) / (N k (N S - 1))`, evaluated without cancellation.
    pub fn gap(&self) -> f64 {
        (self.nk() - 1.0) / (self.nk() * (self.ns() - 1.0))
    }

    /// Probability that a given element shares both row and fingerprint
    /// with the probe, `1 / (N S)`.
    pub fn p_same_cell(&self) -> f64 {
        1.0 / self.ns()
    }

    /// Probability that an insertion lands in the probe's row with another
    /// fingerprint, `(S - k) / (N S - 1)`.
    pub fn p_hard_slot(&self) -> f64 {
        (self.fingerprint_space - self.buckets) as f64 / (self.ns() - 1.0)
    }

    /// Probability that a given bucket is the one evicted, `1 / k`.
    pub fn p_selection(&self) -> f64 {
        1.0 / self.buckets as f64
    }

    /// Probability that one insertion does not evict a stored element, `1 - a`.
    pub fn p_not_evicted(&self) -> f64 {
        1.0 - self.a()
    }

    /// Probability that a fresh element is a false positive after `m`
    /// insertions into a filter whose rows are already full.
    pub fn fp_m(&self, m: u64) -> f64 {
        self.b() * one_minus_pow_one_minus(1.0 / self.nk(), m as f64)
    }

    /// Mean of `fp_m` over `m = 1..=n`.
    pub fn fpr_n(&self, n: u64) -> f64 {
        assert!(n >= 1, "stream length must be at least 1");
        let n_f = n as f64;
        let c = self.c();
        // sum_{m=1}^n c^m = c (1 - c^n) / (1 - c), with 1 - c = 1 / (N k)
        let geometric = c * one_minus_pow_one_minus(1.0 / self.nk(), n_f) * self.nk();
        self.b() * (1.0 - geometric / n_f)
    }

    /// Limit of `fpr_n`.
    pub fn fpr_limit(&self) -> f64 {
        self.b()
    }

    /// Probability that an element last seen at position `i` has been lost
    /// by position `m`, with no false duplicate surviving in its place.
    pub fn fn_im(&self, i: u64, m: u64) -> f64 {
        assert!(1 <= i && i <= m, "need 1 <= i <= m, got i = {i}, m = {m}");
        let d = (m - i) as f64;
        let (a, b) = (self.a(), self.b());
        let lost = (1.0 - b) * one_minus_pow_one_minus(a, d);
        lost + a * b * self.power_gap_quotient(d)
    }

    /// `((1 - a)^d - c^d) / (1 - a - c)`, continuous through `1 - a = c`.
    fn power_gap_quotient(&self, d: f64) -> f64 {
        if d == 0.0 {
            return 0.0;
        }
        let c = self.c();
        let gap = self.gap();
        if gap == 0.0 || c == 0.0 {
            // 1 - a = c: the quotient is the derivative d c^(d-1)
            return if c == 0.0 {
                if d == 1.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                d * pow_one_minus(1.0 / self.nk(), d - 1.0)
            };
        }
        // x^d - c^d = c^d expm1(t) with x = c + gap, t = d ln(1 + gap / c)
        let log_c_pow = d * (-1.0 / self.nk()).ln_1p();
        let t = d * (gap / c).ln_1p();
        if t < 1.0 {
            log_c_pow.exp() * t.exp_m1() / gap
        } else {
            ((log_c_pow + t).exp() - log_c_pow.exp()) / gap
        }
    }

    /// Long-run false negative rate for a uniform stream over `U` elements.
    pub fn fnr_infinity(&self) -> f64 {
        let (a, b, c) = (self.a(), self.b(), self.c());
        let u = self.universe as f64;
        let d1 = u - (u - 1.0) * (1.0 - a);
        let d2 = u - (u - 1.0) * c;
        let gap = 1.0 - a - c;
        if gap.abs() < 1e-9 {
            // 1/d1 - 1/d2 = (U - 1)(1 - a - c) / (d1 d2)
            return 1.0 - b - (1.0 - b) / d1 + a * b * (u - 1.0) / (d1 * d2);
        }
        1.0 - b - (1.0 - b) / d1 + a * b / (gap * d1) - a * b / (gap * d2)
    }

    /// Limit of `fnr_infinity` as the universe grows.
    pub fn fnr_limit(&self) -> f64 {
        1.0 - self.b()
    }
}

/// Long-run FPR of a table that inserts on every call: `1 - (1 - 1/S)^k`.
pub fn qhtd_fpr_infinity(fingerprint_space: u64, buckets: u64) -> f64 {
    one_minus_pow_one_minus(1.0 / fingerprint_space as f64, buckets as f64)
}

/// `(1 - 1/S)^k`.
pub fn qhtd_fnr_infinity(fingerprint_space: u64, buckets: u64) -> f64 {
    pow_one_minus(1.0 / fingerprint_space as f64, buckets as f64)
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

fn check_remainder(r: u32, r_reduced: u32) -> Result<(), AnalysisError> {
    if r == 0 || r > 63 {
        return Err(AnalysisError::InvalidInput("remainder bits must be in 1..=63"));
    }
    if r_reduced >= r {
        return Err(AnalysisError::InvalidInput(
            "reduced bits must be smaller than remainder bits",
        ));
    }
    Ok(())
}

/// Cell width and number of distinct fingerprints of a streaming quotient
/// filter: `(r' + ceil(log2(r + 1)), 2^r' (r - r' + 1))`.
pub fn sqf_sigma_and_space(r: u32, r_reduced: u32) -> Result<(u32, u64), AnalysisError> {
    check_remainder(r, r_reduced)?;
    let sigma = r_reduced + ceil_log2(r as u64 + 1);
    let space = (1u64 << r_reduced) * (r - r_reduced + 1) as u64;
    Ok((sigma, space))
}

/// Saturated rates of a streaming quotient filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqfRates {
    /// `k / (2^r' sqrt(pi r))`, the central-binomial approximation.
    pub approx_fpr: f64,
    pub approx_fnr: f64,
    /// `min(1, k / S)` with the exact fingerprint count.
    pub exact_fpr: f64,
    pub exact_fnr: f64,
}

pub fn sqf_rates_approx(r: u32, r_reduced: u32, buckets: u64) -> Result<SqfRates, AnalysisError> {
    let (_, space) = sqf_sigma_and_space(r, r_reduced)?;
    let approx_fpr = buckets as f64 / ((1u64 << r_reduced) as f64 * (std::f64::consts::PI * r as f64).sqrt());
    let exact_fpr = (buckets as f64 / space as f64).min(1.0);
    Ok(SqfRates {
        approx_fpr,
        approx_fnr: 1.0 - approx_fpr,
        exact_fpr,
        exact_fnr: 1.0 - exact_fpr,
    })
}

/// Memory of a quotient hash table over that of a streaming quotient filter
/// with the same number of fingerprints:
/// `(r' + ceil(log2(r - r' + 1))) / (r' + ceil(log2(r + 1)))`.
pub fn memory_ratio(r: u32, r_reduced: u32) -> Result<Ratio<u64>, AnalysisError> {
    let (sqf_bits, _) = sqf_sigma_and_space(r, r_reduced)?;
    let qht_bits = r_reduced + ceil_log2((r - r_reduced + 1) as u64);
    Ok(Ratio::new(qht_bits as u64, sqf_bits as u64))
}

/// Largest fingerprint width considered by [`tune`].
pub const MAX_TUNED_BITS: u32 = 16;

/// Table shape reaching a saturated FPR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tuning {
    pub buckets: u64,
    pub fingerprint_space: u64,
    pub fingerprint_bits: u32,
    pub rows: u64,
}

/// Smallest-fingerprint `(k, S = 2^sigma)` with `k / S = target`.
pub fn tune(memory_bits: u64, target: Ratio<u64>) -> Result<Tuning, AnalysisError> {
    if *target.numer() == 0 || target > Ratio::from_integer(1) {
        return Err(AnalysisError::InvalidInput("target must be in (0, 1]"));
    }
    let (numer, denom) = (*target.numer(), *target.denom());
    if !denom.is_power_of_two() {
        return Err(AnalysisError::Unreachable { target });
    }
    // a fingerprint needs at least one bit, so 1/1 becomes 2/2
    let (buckets, bits) = if denom == 1 {
        (2, 1)
    } else {
        (numer, denom.trailing_zeros())
    };
    if bits > MAX_TUNED_BITS {
        return Err(AnalysisError::Unreachable { target });
    }
    let row_bits = buckets * bits as u64;
    if memory_bits <= row_bits {
        return Err(AnalysisError::InsufficientMemory {
            memory_bits,
            buckets,
            bits,
        });
    }
    Ok(Tuning {
        buckets,
        fingerprint_space: 1 << bits,
        fingerprint_bits: bits,
        rows: memory_bits / row_bits,
    })
}

/// Reference FPR bound of a stable Bloom filter with `K` cells per element,
/// `P` decrements per insertion, counters saturating at `Max` and `m` cells:
/// `(1 - (1 / (1 + 1 / (P (1/K - 1/m))))^Max)^K`.
pub fn sbf_fpr_bound(k: u64, p: u64, max: u64, m_rows: u64) -> Result<f64, AnalysisError> {
    if k == 0 || p == 0 || max == 0 {
        return Err(AnalysisError::InvalidInput("K, P and Max must be at least 1"));
    }
    if (m_rows as u128) <= k as u128 * p as u128 {
        return Err(AnalysisError::InvalidInput("cell count must exceed K * P"));
    }
    let spread = p as f64 * (1.0 / k as f64 - 1.0 / m_rows as f64);
    let stay = 1.0 / (1.0 + 1.0 / spread);
    Ok((1.0 - stay.powf(max as f64)).powf(k as f64))
}
