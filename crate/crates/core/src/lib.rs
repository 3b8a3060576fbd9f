//! Duplicate detection over unbounded streams with a fixed memory budget.
//!
//! The main structure is the quotient hash table ([`QhtTable`]) in three
//! update variants, next to a streaming quotient filter ([`SqfTable`]) and two
//! baselines ([`StableBloomFilter`], [`CuckooFilter`]). Every filter
//! implements [`DuplicateFilter`]; [`analysis`] has the closed-form error
//! rates they are checked against.

pub mod adversary;
pub mod analysis;
pub mod baselines;
pub mod error;
pub mod filter;
pub mod hash;
pub mod packed;
pub mod qht;
pub mod semisort;
pub mod snapshot;
pub mod sqf;
pub mod streamgen;

pub use adversary::{
    estimate_memory, false_negative_attack, keyed_wrapper, AdversaryError, AttackConfig, EstimateConfig, KeyedFilter,
};
pub use analysis::{AnalysisError, RateInputs};
pub use baselines::{CuckooFilter, CuckooParams, SbfParams, StableBloomFilter};
pub use error::{FingerprintExhausted, ParamError};
pub use filter::{DuplicateFilter, Element, RandomFilter, Snapshot, Verdict};
pub use hash::{EmptyCellPolicy, HashFamily, HashKind};
pub use qht::{QhtParams, QhtTable, QhtVariant, RowLayout};
pub use snapshot::{parse_snapshot, SnapshotError, SnapshotView, VariantTag};
pub use sqf::{SqfParams, SqfTable};
pub use streamgen::{expected_duplicates, ingest_file, StreamError, StreamSpec, UniformStream};
