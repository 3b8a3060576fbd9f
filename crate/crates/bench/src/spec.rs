use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_rational::Ratio;
use qht_core::analysis::tune;
use qht_core::{
    CuckooFilter, CuckooParams, DuplicateFilter, EmptyCellPolicy, QhtParams, QhtTable, QhtVariant, RowLayout,
    SbfParams, SqfParams, SqfTable, StableBloomFilter, StreamSpec, Verdict,
};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Qht,
    Qhtd,
    Qqhtd,
    Sqf,
    Sbf,
    Cuckoo,
}

impl FilterKind {
    pub const ALL: [FilterKind; 6] = [
        FilterKind::Qht,
        FilterKind::Qhtd,
        FilterKind::Qqhtd,
        FilterKind::Sqf,
        FilterKind::Sbf,
        FilterKind::Cuckoo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Qht => "qht",
            FilterKind::Qhtd => "qhtd",
            FilterKind::Qqhtd => "qqhtd",
            FilterKind::Sqf => "sqf",
            FilterKind::Sbf => "sbf",
            FilterKind::Cuckoo => "cuckoo",
        }
    }

    fn qht_variant(self) -> Option<QhtVariant> {
        match self {
            FilterKind::Qht => Some(QhtVariant::Qht),
            FilterKind::Qhtd => Some(QhtVariant::Qhtd),
            FilterKind::Qqhtd => Some(QhtVariant::Qqhtd),
            _ => None,
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FilterKind::ALL
            .into_iter()
            .find(|kind| kind.name() == s)
            .ok_or_else(|| format!("unknown filter `{s}`"))
    }
}

/// Default saturated FPR targeted when picking the SBF decrement count.
pub const DEFAULT_SBF_TARGET: f64 = 0.28;

/// A filter configuration, independent of seed.
///
/// `k` and `sigma` are read per family: buckets and fingerprint bits for the
/// quotient tables, hash count and bits per counter for the stable Bloom
/// filter, entries per bucket and fingerprint bits for the cuckoo filter.
/// The streaming quotient filter derives its cell width from `r` and `r'`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub memory_bits: u64,
    pub k: u32,
    pub sigma: u32,
    pub remainder_bits: u32,
    pub reduced_bits: u32,
    pub semisort: bool,
    pub policy: EmptyCellPolicy,
    pub fingerprint_space: Option<u64>,
    pub sbf_decrements: Option<u32>,
    pub sbf_target_fpr: f64,
}

/// Parameters resolved against the memory budget.
#[derive(Debug, Clone, PartialEq)]
enum Resolved {
    Qht(QhtParams, QhtVariant, RowLayout),
    Sqf(SqfParams),
    Sbf(SbfParams),
    Cuckoo(CuckooParams),
}

impl FilterSpec {
    pub fn new(kind: FilterKind, memory_bits: u64, k: u32, sigma: u32) -> Self {
        Self {
            kind,
            memory_bits,
            k,
            sigma,
            remainder_bits: 2,
            reduced_bits: 1,
            semisort: false,
            policy: EmptyCellPolicy::default(),
            fingerprint_space: None,
            sbf_decrements: None,
            sbf_target_fpr: DEFAULT_SBF_TARGET,
        }
    }

    /// Streaming quotient filter with remainder `r` and reduced bits `r'`.
    pub fn sqf(memory_bits: u64, k: u32, r: u32, r_reduced: u32) -> Self {
        Self {
            remainder_bits: r,
            reduced_bits: r_reduced,
            ..Self::new(FilterKind::Sqf, memory_bits, k, 0)
        }
    }

    /// Quotient table whose saturated FPR is `target`, with the smallest
    /// fingerprints that reach it.
    pub fn tuned(kind: FilterKind, memory_bits: u64, target: Ratio<u64>) -> Result<Self, BenchError> {
        if kind.qht_variant().is_none() {
            return Err(BenchError::Config(format!("{kind} cannot be tuned to a target FPR")));
        }
        let tuning = tune(memory_bits, target)?;
        let k = u32::try_from(tuning.buckets)
            .map_err(|_| BenchError::Config(format!("target {target} needs too many buckets")))?;
        Ok(Self::new(kind, memory_bits, k, tuning.fingerprint_bits).with_policy(EmptyCellPolicy::ZeroIsFingerprint))
    }

    pub fn with_policy(mut self, policy: EmptyCellPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_fingerprint_space(mut self, space: u64) -> Self {
        self.fingerprint_space = Some(space);
        self
    }

    pub fn with_semisort(mut self, semisort: bool) -> Self {
        self.semisort = semisort;
        self
    }

    fn resolve(&self) -> Result<Resolved, BenchError> {
        if self.semisort && self.kind.qht_variant().is_none() {
            return Err(BenchError::Config(format!("{} has no semi-sorted layout", self.kind)));
        }
        Ok(match self.kind {
            FilterKind::Qht | FilterKind::Qhtd | FilterKind::Qqhtd => {
                let mut params = QhtParams::new(self.memory_bits, self.sigma, self.k)?.with_policy(self.policy);
                if let Some(space) = self.fingerprint_space {
                    params = params.with_fingerprint_space(space)?;
                }
                let layout = if self.semisort {
                    RowLayout::SemiSorted
                } else {
                    RowLayout::Plain
                };
                let variant = self.kind.qht_variant().expect("quotient table kind");
                // surface layout errors before any run starts
                QhtTable::with_layout(params.clone(), variant, layout, 0)?;
                Resolved::Qht(params, variant, layout)
            }
            FilterKind::Sqf => Resolved::Sqf(SqfParams::from_memory(
                self.memory_bits,
                self.remainder_bits,
                self.reduced_bits,
                self.k,
            )?),
            FilterKind::Sbf => {
                let cells = self.memory_bits / self.sigma.max(1) as u64;
                let decrements = match self.sbf_decrements {
                    Some(p) => p,
                    None => SbfParams::decrements_for_target(self.sbf_target_fpr, cells, self.sigma, self.k)?,
                };
                Resolved::Sbf(SbfParams::from_memory(
                    self.memory_bits,
                    self.sigma,
                    self.k,
                    decrements,
                )?)
            }
            FilterKind::Cuckoo => Resolved::Cuckoo(CuckooParams::from_memory(self.memory_bits, self.k, self.sigma)?),
        })
    }

    /// Checks the configuration without building a filter.
    pub fn validate(&self) -> Result<(), BenchError> {
        self.resolve().map(|_| ())
    }

    pub fn build(&self, seed: u64) -> Result<AnyFilter, BenchError> {
        Ok(match self.resolve()? {
            Resolved::Qht(params, variant, layout) => {
                AnyFilter::Qht(QhtTable::with_layout(params, variant, layout, seed)?)
            }
            Resolved::Sqf(params) => AnyFilter::Sqf(SqfTable::new(params, seed)),
            Resolved::Sbf(params) => AnyFilter::Sbf(StableBloomFilter::new(params, seed)),
            Resolved::Cuckoo(params) => AnyFilter::Cuckoo(CuckooFilter::new(params, seed)),
        })
    }

    /// `(k, sigma)` as reported; the SQF reports its derived cell width.
    pub fn reported_shape(&self) -> Result<(u32, u32), BenchError> {
        Ok(match self.resolve()? {
            Resolved::Sqf(params) => (params.buckets(), params.cell_bits()),
            _ => (self.k, self.sigma),
        })
    }

    /// Number of elements the filter can hold at once.
    pub fn capacity(&self) -> Result<u64, BenchError> {
        Ok(match self.resolve()? {
            Resolved::Qht(params, ..) => params.rows() * params.buckets() as u64,
            Resolved::Sqf(params) => params.rows() * params.buckets() as u64,
            Resolved::Sbf(params) => params.cells() / params.hash_count() as u64,
            Resolved::Cuckoo(params) => params.buckets() * params.entries() as u64,
        })
    }

    /// Family-specific parameters, `;`-separated.
    pub fn extra_params(&self) -> Result<String, BenchError> {
        Ok(match self.resolve()? {
            Resolved::Qht(params, _, layout) => format!(
                "rows={};S={};policy={};layout={}",
                params.rows(),
                params.fingerprint_space(),
                params.policy().name(),
                match layout {
                    RowLayout::Plain => "plain",
                    RowLayout::SemiSorted => "semisort",
                }
            ),
            Resolved::Sqf(params) => format!(
                "q={};r={};rprime={};S={}",
                params.quotient_bits(),
                params.remainder_bits(),
                params.reduced_bits(),
                params.fingerprint_space()
            ),
            Resolved::Sbf(params) => format!(
                "cells={};P={};Max={}",
                params.cells(),
                params.decrements(),
                params.max_value()
            ),
            Resolved::Cuckoo(params) => format!("buckets={};kicks={}", params.buckets(), params.max_kicks()),
        })
    }
}

/// Any benchmarked filter, dispatched statically.
#[derive(Debug, Clone)]
pub enum AnyFilter {
    Qht(QhtTable),
    Sqf(SqfTable),
    Sbf(StableBloomFilter),
    Cuckoo(CuckooFilter),
}

impl DuplicateFilter for AnyFilter {
    #[inline]
    fn detect(&self, element: &[u8]) -> Verdict {
        match self {
            AnyFilter::Qht(f) => f.detect(element),
            AnyFilter::Sqf(f) => f.detect(element),
            AnyFilter::Sbf(f) => f.detect(element),
            AnyFilter::Cuckoo(f) => f.detect(element),
        }
    }

    #[inline]
    fn insert(&mut self, element: &[u8]) {
        match self {
            AnyFilter::Qht(f) => f.insert(element),
            AnyFilter::Sqf(f) => f.insert(element),
            AnyFilter::Sbf(f) => f.insert(element),
            AnyFilter::Cuckoo(f) => f.insert(element),
        }
    }

    #[inline]
    fn stream(&mut self, element: &[u8]) -> Verdict {
        match self {
            AnyFilter::Qht(f) => f.stream(element),
            AnyFilter::Sqf(f) => f.stream(element),
            AnyFilter::Sbf(f) => f.stream(element),
            AnyFilter::Cuckoo(f) => f.stream(element),
        }
    }
}

/// Stream source of a benchmark; uniform streams are reseeded per run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamSource {
    Uniform { alphabet_bits: u32, length: u64 },
    File(PathBuf),
}

impl StreamSource {
    pub fn uniform(alphabet_bits: u32, length: u64) -> Result<Self, BenchError> {
        if alphabet_bits > 64 {
            return Err(BenchError::Config(format!(
                "alphabet of 2^{alphabet_bits} elements is too large"
            )));
        }
        Ok(StreamSource::Uniform { alphabet_bits, length })
    }

    pub fn universe(alphabet_bits: u32) -> u64 {
        if alphabet_bits >= 64 {
            u64::MAX
        } else {
            1 << alphabet_bits
        }
    }

    pub fn spec(&self, seed: u64) -> StreamSpec {
        match self {
            StreamSource::Uniform { alphabet_bits, length } => StreamSpec::Uniform {
                universe: Self::universe(*alphabet_bits),
                len: *length,
                seed,
            },
            StreamSource::File(path) => StreamSpec::File { path: path.clone() },
        }
    }

    pub fn label(&self) -> String {
        match self {
            StreamSource::Uniform { alphabet_bits, length } => format!("uniform:2^{alphabet_bits}:{length}"),
            StreamSource::File(path) => format!("file:{}", path.display()),
        }
    }
}
