use std::hint::black_box;
use std::time::Instant;

use qht_core::DuplicateFilter;
use rayon::prelude::*;

use crate::report::{ErrorCounts, ErrorReport};
use crate::spec::{FilterSpec, StreamSource};
use crate::{BenchError, GroundTruthOracle};

/// Calls between two clock reads.
pub const TIMING_BATCH: usize = 1024;

/// Seed of run `index`; the stream of that run uses the same seed.
pub fn run_seed(seed: u64, index: u32) -> u64 {
    seed.wrapping_add(index as u64)
}

fn single_run(filter: &FilterSpec, stream: &StreamSource, seed: u64) -> Result<ErrorCounts, BenchError> {
    let mut table = filter.build(seed)?;
    let mut oracle = GroundTruthOracle::new();
    let mut counts = ErrorCounts::default();
    for element in stream.spec(seed).open()? {
        let element = element?;
        let truth = oracle.observe(&element);
        counts.record(truth, table.stream(&element).is_duplicate());
    }
    Ok(counts)
}

/// Report row for `filter` on `stream` with no measurements yet.
pub fn report_template(
    filter: &FilterSpec,
    stream: &StreamSource,
    runs: u32,
    seed: u64,
) -> Result<ErrorReport, BenchError> {
    let (k, sigma) = filter.reported_shape()?;
    Ok(ErrorReport {
        filter: filter.kind.name().to_string(),
        variant: if filter.semisort { "semisort" } else { "plain" }.to_string(),
        memory_bits: filter.memory_bits,
        k,
        sigma,
        extra_params: filter.extra_params()?,
        stream: stream.label(),
        seed,
        runs,
        totals: ErrorCounts::default(),
        duplicate_fraction: None,
        fpr: None,
        fnr: None,
        ns_per_op: None,
    })
}

/// Runs `runs` independent filters, in parallel, each against its own
/// oracle, and averages their rates.
pub fn run_benchmark(
    filter: &FilterSpec,
    stream: &StreamSource,
    runs: u32,
    seed: u64,
) -> Result<ErrorReport, BenchError> {
    if runs == 0 {
        return Err(BenchError::Config("at least one run is required".into()));
    }
    let template = report_template(filter, stream, runs, seed)?;
    let per_run = (0..runs)
        .into_par_iter()
        .map(|i| single_run(filter, stream, run_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ErrorReport::aggregate(template, &per_run))
}

/// Wall time of `stream` calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    /// Calls timed, warm-up excluded.
    pub ops: u64,
    /// `None` when nothing was timed.
    pub ns_per_op: Option<f64>,
}

/// Times one run sequentially. The stream is read into memory first so that
/// generation and I/O stay off the clock; the first 1% is warm-up.
pub fn run_timing(filter: &FilterSpec, stream: &StreamSource, seed: u64) -> Result<Timing, BenchError> {
    let mut table = filter.build(seed)?;
    let mut bytes = Vec::new();
    let mut offsets = vec![0];
    for element in stream.spec(seed).open()? {
        bytes.extend_from_slice(&element?);
        offsets.push(bytes.len());
    }
    let len = offsets.len() - 1;
    let element = |i: usize| &bytes[offsets[i]..offsets[i + 1]];

    let warmup = len / 100;
    for i in 0..warmup {
        black_box(table.stream(element(i)));
    }
    let mut elapsed = 0u128;
    let mut i = warmup;
    while i < len {
        let stop = (i + TIMING_BATCH).min(len);
        let start = Instant::now();
        for j in i..stop {
            black_box(table.stream(black_box(element(j))));
        }
        elapsed += start.elapsed().as_nanos();
        i = stop;
    }
    let ops = (len - warmup) as u64;
    Ok(Timing {
        ops,
        ns_per_op: (ops > 0).then(|| elapsed as f64 / ops as f64),
    })
}
