use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::ErrorReport;
use crate::BenchError;

/// One CSV line; rates are fractions, `duplicate_pct` is a percentage and
/// `error_x100` is `100 * (fpr + fnr)`. Undefined values are left blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub filter: String,
    pub variant: String,
    pub memory_bits: u64,
    pub k: u32,
    pub sigma: u32,
    pub extra_params: String,
    pub stream: String,
    pub duplicate_pct: Option<f64>,
    pub runs: u32,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub error_x100: Option<f64>,
    pub ns_per_op: Option<f64>,
    pub seed: u64,
}

impl From<&ErrorReport> for CsvRow {
    fn from(r: &ErrorReport) -> Self {
        CsvRow {
            filter: r.filter.clone(),
            variant: r.variant.clone(),
            memory_bits: r.memory_bits,
            k: r.k,
            sigma: r.sigma,
            extra_params: r.extra_params.clone(),
            stream: r.stream.clone(),
            duplicate_pct: r.duplicate_fraction.map(|d| 100.0 * d),
            runs: r.runs,
            fpr: r.fpr,
            fnr: r.fnr,
            error_x100: r.error_x100(),
            ns_per_op: r.ns_per_op,
            seed: r.seed,
        }
    }
}

/// Writes a header and one row per report, in the given order.
pub fn write_csv<W: Write>(writer: W, reports: &[ErrorReport]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(writer);
    for report in reports {
        out.serialize(CsvRow::from(report))?;
    }
    if reports.is_empty() {
        out.write_record([
            "filter",
            "variant",
            "memory_bits",
            "k",
            "sigma",
            "extra_params",
            "stream",
            "duplicate_pct",
            "runs",
            "fpr",
            "fnr",
            "error_x100",
            "ns_per_op",
            "seed",
        ])?;
    }
    out.flush().map_err(|source| BenchError::Io {
        context: "flushing csv".into(),
        source,
    })
}

pub fn emit_csv(path: impl AsRef<Path>, reports: &[ErrorReport]) -> Result<(), BenchError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| BenchError::Io {
        context: format!("creating {}", path.display()),
        source,
    })?;
    write_csv(file, reports)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>, BenchError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::ErrorCounts;

    fn report(fpr: Option<f64>) -> ErrorReport {
        ErrorReport {
            filter: "qht".into(),
            variant: "plain".into(),
            memory_bits: 65_536,
            k: 1,
            sigma: 2,
            extra_params: "rows=32768;S=3".into(),
            stream: "uniform:2^20:100000".into(),
            seed: 7,
            runs: 10,
            totals: ErrorCounts::default(),
            duplicate_fraction: Some(0.0465),
            fpr,
            fnr: Some(0.3589),
            ns_per_op: None,
        }
    }

    #[test]
    fn one_report_two_lines() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[report(Some(0.2257))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "filter,variant,memory_bits,k,sigma,extra_params,stream,duplicate_pct,runs,fpr,fnr,error_x100,ns_per_op,seed"
        );
        assert!(lines[1].ends_with(",,7"));
    }

    #[test]
    fn empty_file_has_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let reports = [report(Some(0.2257)), report(None)];
        emit_csv(&path, &reports).unwrap();
        let rows = read_csv(&path).unwrap();
        let expected: Vec<CsvRow> = reports.iter().map(CsvRow::from).collect();
        assert_eq!(rows, expected);
        assert_eq!(rows[1].fpr, None);
        assert!((rows[0].error_x100.unwrap() - 58.46).abs() < 1e-9);
    }

    #[test]
    fn unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_csv(dir.path().join("missing/out.csv"), &[]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
