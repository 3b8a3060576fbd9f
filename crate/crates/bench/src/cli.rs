use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;
use qht_core::analysis::{memory_ratio, qhtd_fnr_infinity, qhtd_fpr_infinity, sbf_fpr_bound, sqf_rates_approx, tune};
use qht_core::{
    estimate_memory, false_negative_attack, keyed_wrapper, AttackConfig, DuplicateFilter, EmptyCellPolicy,
    EstimateConfig, RateInputs,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::runner::{run_benchmark, run_timing};
use crate::spec::{FilterKind, FilterSpec, StreamSource};
use crate::{write_csv, BenchError};

#[derive(Debug, Parser)]
#[command(
    name = "qht",
    version,
    about = "Duplicate-detection filters: benchmarks, closed forms and attacks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure FPR and FNR against an exact oracle and write CSV.
    Bench(BenchArgs),
    /// Evaluate a closed-form rate.
    Analyze(AnalyzeArgs),
    /// Run the flood-and-replay attack or estimate a filter's capacity.
    Attack(AttackArgs),
}

/// Parses `a/b`, an integer, or a decimal such as `0.25`.
pub fn parse_ratio(s: &str) -> Result<Ratio<u64>, String> {
    let bad = || format!("`{s}` is not a non-negative rational");
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let frac: u64 = frac.parse().map_err(|_| bad())?;
        let numer = whole
            .checked_mul(denom)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(bad)?;
        return Ok(Ratio::new(numer, denom));
    }
    let ratio = Ratio::<u64>::from_str(s).map_err(|_| bad())?;
    Ok(ratio)
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[arg(long, value_parser = FilterKind::from_str)]
    pub filter: FilterKind,
    #[arg(long = "memory-bits")]
    pub memory_bits: u64,
    /// Remainder bits of the streaming quotient filter.
    #[arg(long, default_value_t = 2)]
    pub r: u32,
    /// Remainder bits kept verbatim by the streaming quotient filter.
    #[arg(long, default_value_t = 1)]
    pub rprime: u32,
    /// Store quotient-table rows as ranks of sorted multisets.
    #[arg(long)]
    pub semisort: bool,
    /// Handling of the zero fingerprint in quotient tables.
    #[arg(long, default_value = "rederive", value_parser = EmptyCellPolicy::from_str)]
    pub policy: EmptyCellPolicy,
    /// Quotient-table fingerprints drawn from `1..=S` instead of the policy default.
    #[arg(long = "fingerprint-space")]
    pub fingerprint_space: Option<u64>,
    /// Stable Bloom filter decrements per insertion; derived from the target FPR if absent.
    #[arg(long = "sbf-p")]
    pub sbf_decrements: Option<u32>,
    #[arg(long = "sbf-target", default_value_t = crate::spec::DEFAULT_SBF_TARGET)]
    pub sbf_target: f64,
}

impl FilterArgs {
    fn spec(&self, k: u32, sigma: u32) -> FilterSpec {
        FilterSpec {
            kind: self.filter,
            memory_bits: self.memory_bits,
            k,
            sigma,
            remainder_bits: self.r,
            reduced_bits: self.rprime,
            semisort: self.semisort,
            policy: self.policy,
            fingerprint_space: self.fingerprint_space,
            sbf_decrements: self.sbf_decrements,
            sbf_target_fpr: self.sbf_target,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Buckets per row (hash count for sbf, entries per bucket for cuckoo); comma list for sweeps.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub k: Vec<u32>,
    /// Fingerprint bits (bits per cell for sbf); comma list, zipped with --k.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub sigma: Vec<u32>,
    /// Quotient tables only: pick k and sigma for this saturated FPR.
    #[arg(long, value_parser = parse_ratio, conflicts_with_all = ["k", "sigma"])]
    pub target: Option<Ratio<u64>>,
    /// `uniform` or `file:PATH`.
    #[arg(long, default_value = "uniform")]
    pub stream: String,
    #[arg(long = "alphabet-bits", default_value_t = 20)]
    pub alphabet_bits: u32,
    #[arg(long, default_value_t = 2_000_000)]
    pub length: u64,
    #[arg(long, default_value_t = 5)]
    pub runs: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also time one sequential run per configuration.
    #[arg(long)]
    pub timing: bool,
}

impl BenchArgs {
    pub fn stream_source(&self) -> Result<StreamSource, BenchError> {
        match self.stream.as_str() {
            "uniform" => StreamSource::uniform(self.alphabet_bits, self.length),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(StreamSource::File(path.into())),
                _ => Err(BenchError::Config(format!("unknown stream `{other}`"))),
            },
        }
    }

    /// One spec per `(k, sigma)` pair; a single value is broadcast.
    pub fn filter_specs(&self) -> Result<Vec<FilterSpec>, BenchError> {
        if let Some(target) = self.target {
            let base = FilterSpec::tuned(self.filter.filter, self.filter.memory_bits, target)?;
            let spec = self.filter.spec(base.k, base.sigma);
            return Ok(vec![FilterSpec {
                policy: base.policy,
                ..spec
            }]);
        }
        let (ks, sigmas) = (&self.k, &self.sigma);
        let len = ks.len().max(sigmas.len());
        if (ks.len() != len && ks.len() != 1) || (sigmas.len() != len && sigmas.len() != 1) {
            return Err(BenchError::Config(format!(
                "--k has {} values and --sigma has {}; lengths must match or be 1",
                ks.len(),
                sigmas.len()
            )));
        }
        Ok((0..len)
            .map(|i| {
                let k = ks[if ks.len() == 1 { 0 } else { i }];
                let sigma = sigmas[if sigmas.len() == 1 { 0 } else { i }];
                self.filter.spec(k, sigma)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum AnalyzeOp {
    FpM,
    FprN,
    FnrInf,
    QhtdFpr,
    SqfApprox,
    Ratio,
    Tune,
    SbfBound,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub op: AnalyzeOp,
    #[arg(long)]
    pub json: bool,
    /// Rows.
    #[arg(long = "N")]
    pub rows: Option<u64>,
    /// Buckets per row.
    #[arg(long)]
    pub k: Option<u64>,
    /// Fingerprint count.
    #[arg(long = "S")]
    pub fingerprint_space: Option<u64>,
    /// Universe size.
    #[arg(long = "U")]
    pub universe: Option<u64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub r: Option<u32>,
    #[arg(long)]
    pub rprime: Option<u32>,
    /// Memory in bits.
    #[arg(long = "M")]
    pub memory_bits: Option<u64>,
    #[arg(long, value_parser = parse_ratio)]
    pub target: Option<Ratio<u64>>,
    /// Stable Bloom filter hash count.
    #[arg(long = "K")]
    pub hash_count: Option<u64>,
    /// Stable Bloom filter decrements.
    #[arg(long = "P")]
    pub decrements: Option<u64>,
    #[arg(long = "Max")]
    pub max: Option<u64>,
    #[arg(long = "m_rows", alias = "m-rows")]
    pub m_rows: Option<u64>,
}

fn need<T: Copy>(value: Option<T>, flag: &str, op: AnalyzeOp) -> Result<T, BenchError> {
    value.ok_or_else(|| BenchError::Config(format!("--{flag} is required for {}", op_name(op))))
}

fn op_name(op: AnalyzeOp) -> String {
    op.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

/// Inputs and outputs of one closed-form evaluation.
pub fn analyze(args: &AnalyzeArgs) -> Result<Map<String, Value>, BenchError> {
    let op = args.op;
    let mut out = Map::new();
    out.insert("op".into(), json!(op_name(op)));
    let rate_inputs = |out: &mut Map<String, Value>, universe: u64| -> Result<RateInputs, BenchError> {
        let rows = need(args.rows, "N", op)?;
        let k = need(args.k, "k", op)?;
        let space = need(args.fingerprint_space, "S", op)?;
        out.insert("N".into(), json!(rows));
        out.insert("k".into(), json!(k));
        out.insert("S".into(), json!(space));
        out.insert("U".into(), json!(universe));
        Ok(RateInputs::new(rows, k, space, universe)?)
    };
    match op {
        AnalyzeOp::FpM => {
            let inputs = rate_inputs(&mut out, args.universe.unwrap_or(u64::MAX))?;
            let m = need(args.m, "m", op)?;
            out.insert("m".into(), json!(m));
            out.insert("fp_m".into(), json!(inputs.fp_m(m)));
        }
        AnalyzeOp::FprN => {
            let inputs = rate_inputs(&mut out, args.universe.unwrap_or(u64::MAX))?;
            let n = need(args.n, "n", op)?;
            out.insert("n".into(), json!(n));
            out.insert("fpr_n".into(), json!(inputs.fpr_n(n)));
            out.insert("fpr_limit".into(), json!(inputs.fpr_limit()));
        }
        AnalyzeOp::FnrInf => {
            let inputs = rate_inputs(&mut out, need(args.universe, "U", op)?)?;
            out.insert("fnr_inf".into(), json!(inputs.fnr_infinity()));
            out.insert("fnr_limit".into(), json!(inputs.fnr_limit()));
            out.insert("fpr_limit".into(), json!(inputs.fpr_limit()));
        }
        AnalyzeOp::QhtdFpr => {
            let k = need(args.k, "k", op)?;
            let space = need(args.fingerprint_space, "S", op)?;
            if k == 0 || space == 0 {
                return Err(BenchError::Config("k and S must be positive".into()));
            }
            out.insert("k".into(), json!(k));
            out.insert("S".into(), json!(space));
            out.insert("qhtd_fpr".into(), json!(qhtd_fpr_infinity(space, k)));
            out.insert("qhtd_fnr".into(), json!(qhtd_fnr_infinity(space, k)));
        }
        AnalyzeOp::SqfApprox => {
            let r = need(args.r, "r", op)?;
            let rprime = need(args.rprime, "rprime", op)?;
            let k = need(args.k, "k", op)?;
            let rates = sqf_rates_approx(r, rprime, k)?;
            let (sigma, space) = qht_core::analysis::sqf_sigma_and_space(r, rprime)?;
            out.insert("r".into(), json!(r));
            out.insert("rprime".into(), json!(rprime));
            out.insert("k".into(), json!(k));
            out.insert("sigma".into(), json!(sigma));
            out.insert("S".into(), json!(space));
            out.insert("approx_fpr".into(), json!(rates.approx_fpr));
            out.insert("approx_fnr".into(), json!(rates.approx_fnr));
            out.insert("exact_fpr".into(), json!(rates.exact_fpr));
            out.insert("exact_fnr".into(), json!(rates.exact_fnr));
        }
        AnalyzeOp::Ratio => {
            let r = need(args.r, "r", op)?;
            let rprime = need(args.rprime, "rprime", op)?;
            let ratio = memory_ratio(r, rprime)?;
            out.insert("r".into(), json!(r));
            out.insert("rprime".into(), json!(rprime));
            out.insert("ratio".into(), json!(ratio.to_string()));
            out.insert(
                "ratio_value".into(),
                json!(*ratio.numer() as f64 / *ratio.denom() as f64),
            );
        }
        AnalyzeOp::Tune => {
            let memory_bits = need(args.memory_bits, "M", op)?;
            let target = need(args.target, "target", op)?;
            let tuning = tune(memory_bits, target)?;
            out.insert("M".into(), json!(memory_bits));
            out.insert("target".into(), json!(target.to_string()));
            out.insert("k".into(), json!(tuning.buckets));
            out.insert("S".into(), json!(tuning.fingerprint_space));
            out.insert("sigma".into(), json!(tuning.fingerprint_bits));
            out.insert("N".into(), json!(tuning.rows));
        }
        AnalyzeOp::SbfBound => {
            let k = need(args.hash_count, "K", op)?;
            let p = need(args.decrements, "P", op)?;
            let max = need(args.max, "Max", op)?;
            let m_rows = need(args.m_rows, "m_rows", op)?;
            out.insert("K".into(), json!(k));
            out.insert("P".into(), json!(p));
            out.insert("Max".into(), json!(max));
            out.insert("m_rows".into(), json!(m_rows));
            out.insert("sbf_bound".into(), json!(sbf_fpr_bound(k, p, max, m_rows)?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackMode {
    Fn,
    Estimate,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    #[arg(long, value_enum)]
    pub mode: AttackMode,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value_t = 8)]
    pub sigma: u32,
    /// Flood length over capacity.
    #[arg(long, value_parser = parse_ratio, default_value = "1")]
    pub h: Ratio<u64>,
    /// Trials of the attack, or per probe when estimating.
    #[arg(long, default_value_t = 200)]
    pub trials: u32,
    /// Capacity assumed by the attacker; the filter's element capacity if absent.
    #[arg(long)]
    pub capacity: Option<u64>,
    /// Put the filter behind a keyed permutation (32 hex digits).
    #[arg(long)]
    pub key: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

fn parse_key(hex: &str) -> Result<[u8; 16], BenchError> {
    let bad = || BenchError::Config(format!("key `{hex}` is not 32 hex digits"));
    if hex.len() != 32 || !hex.is_ascii() {
        return Err(bad());
    }
    let mut key = [0u8; 16];
    for (i, byte) in key.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
    }
    Ok(key)
}

fn attack_filter<F: DuplicateFilter>(
    filter: &mut F,
    args: &AttackArgs,
    capacity: u64,
) -> Result<Map<String, Value>, BenchError> {
    let mut out = Map::new();
    let adversary = |e: qht_core::AdversaryError| BenchError::Config(e.to_string());
    match args.mode {
        AttackMode::Fn => {
            let config = AttackConfig::new(capacity, args.h, args.trials).map_err(adversary)?;
            out.insert("mode".into(), json!("fn"));
            out.insert("h".into(), json!(args.h.to_string()));
            out.insert("trials".into(), json!(args.trials));
            out.insert("flood".into(), json!(config.flood_len()));
            out.insert("success".into(), json!(false_negative_attack(filter, &config)));
        }
        AttackMode::Estimate => {
            let config = EstimateConfig {
                trials_per_probe: args.trials,
                ..EstimateConfig::default()
            };
            out.insert("mode".into(), json!("estimate"));
            out.insert("trials".into(), json!(args.trials));
            match estimate_memory(filter, &config) {
                Ok(estimate) => {
                    out.insert("estimate".into(), json!(estimate));
                }
                Err(e) => {
                    out.insert("estimate".into(), Value::Null);
                    out.insert("error".into(), json!(e.to_string()));
                }
            }
        }
    }
    Ok(out)
}

pub fn attack(args: &AttackArgs) -> Result<Map<String, Value>, BenchError> {
    let spec = args.filter.spec(args.k, args.sigma);
    let true_capacity = spec.capacity()?;
    let capacity = args.capacity.unwrap_or(true_capacity);
    let filter = spec.build(args.seed)?;
    let mut out = match &args.key {
        Some(hex) => attack_filter(&mut keyed_wrapper(filter, parse_key(hex)?), args, capacity)?,
        None => {
            let mut filter = filter;
            attack_filter(&mut filter, args, capacity)?
        }
    };
    out.insert("filter".into(), json!(spec.kind.name()));
    out.insert("capacity".into(), json!(capacity));
    out.insert("filter_capacity".into(), json!(true_capacity));
    out.insert("keyed".into(), json!(args.key.is_some()));
    Ok(out)
}

pub fn bench(args: &BenchArgs, out: impl Write) -> Result<(), BenchError> {
    let stream = args.stream_source()?;
    let specs = args.filter_specs()?;
    for spec in &specs {
        spec.validate()?;
    }
    let mut reports = specs
        .par_iter()
        .map(|spec| run_benchmark(spec, &stream, args.runs, args.seed))
        .collect::<Result<Vec<_>, _>>()?;
    if args.timing {
        for (spec, report) in specs.iter().zip(&mut reports) {
            report.ns_per_op = run_timing(spec, &stream, args.seed)?.ns_per_op;
        }
    }
    write_csv(out, &reports)
}

fn print_map(map: &Map<String, Value>, as_json: bool) -> Result<(), BenchError> {
    let mut stdout = std::io::stdout().lock();
    let io = |source| BenchError::Io {
        context: "writing stdout".into(),
        source,
    };
    if as_json {
        let text = serde_json::to_string(map).expect("maps of plain values serialize");
        writeln!(stdout, "{text}").map_err(io)
    } else {
        for (key, value) in map {
            match value {
                Value::String(s) => writeln!(stdout, "{key} = {s}"),
                other => writeln!(stdout, "{key} = {other}"),
            }
            .map_err(io)?;
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Bench(args) => match &args.out {
            Some(path) => {
                let file = std::fs::File::create(path).map_err(|source| BenchError::Io {
                    context: format!("creating {}", path.display()),
                    source,
                })?;
                bench(&args, file)
            }
            None => bench(&args, std::io::stdout().lock()),
        },
        Command::Analyze(args) => print_map(&analyze(&args)?, args.json),
        Command::Attack(args) => print_map(&attack(&args)?, args.json),
    }
}
