/// Raw outcome counts of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub n: u64,
    pub duplicates: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ErrorCounts {
    #[inline]
    pub fn record(&mut self, truly_duplicate: bool, said_duplicate: bool) {
        self.n += 1;
        if truly_duplicate {
            self.duplicates += 1;
            self.false_neg += !said_duplicate as u64;
        } else {
            self.false_pos += said_duplicate as u64;
        }
    }

    pub fn unseen(&self) -> u64 {
        self.n - self.duplicates
    }

    /// False positives over unseen elements; `None` without unseen elements.
    pub fn fpr(&self) -> Option<f64> {
        (self.unseen() > 0).then(|| self.false_pos as f64 / self.unseen() as f64)
    }

    /// False negatives over duplicates; `None` without duplicates.
    pub fn fnr(&self) -> Option<f64> {
        (self.duplicates > 0).then(|| self.false_neg as f64 / self.duplicates as f64)
    }

    pub fn duplicate_fraction(&self) -> Option<f64> {
        (self.n > 0).then(|| self.duplicates as f64 / self.n as f64)
    }

    fn add(&mut self, other: &ErrorCounts) {
        self.n += other.n;
        self.duplicates += other.duplicates;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
    }
}

/// Rates averaged over runs, with the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub filter: String,
    pub variant: String,
    pub memory_bits: u64,
    pub k: u32,
    pub sigma: u32,
    pub extra_params: String,
    pub stream: String,
    pub seed: u64,
    pub runs: u32,
    /// Counts summed over runs.
    pub totals: ErrorCounts,
    pub duplicate_fraction: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub ns_per_op: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values.flatten().fold((0.0, 0u32), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl ErrorReport {
    /// Per-run rates are averaged arithmetically; runs where a rate is
    /// undefined do not contribute to it.
    pub fn aggregate(template: ErrorReport, per_run: &[ErrorCounts]) -> ErrorReport {
        let mut totals = ErrorCounts::default();
        for counts in per_run {
            totals.add(counts);
        }
        ErrorReport {
            runs: per_run.len() as u32,
            totals,
            duplicate_fraction: mean(per_run.iter().map(ErrorCounts::duplicate_fraction)),
            fpr: mean(per_run.iter().map(ErrorCounts::fpr)),
            fnr: mean(per_run.iter().map(ErrorCounts::fnr)),
            ..template
        }
    }

    /// `100 (FPR + FNR)`; an undefined rate counts as zero. Values above 100
    /// mean the filter does worse than a random answerer.
    pub fn error_x100(&self) -> Option<f64> {
        if self.fpr.is_none() && self.fnr.is_none() {
            return None;
        }
        Some(100.0 * (self.fpr.unwrap_or(0.0) + self.fnr.unwrap_or(0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template() -> ErrorReport {
        ErrorReport {
            filter: "qht".into(),
            variant: "qht".into(),
            memory_bits: 64,
            k: 1,
            sigma: 2,
            extra_params: String::new(),
            stream: "test".into(),
            seed: 0,
            runs: 0,
            totals: ErrorCounts::default(),
            duplicate_fraction: None,
            fpr: None,
            fnr: None,
            ns_per_op: None,
        }
    }

    #[test]
    fn rates_use_their_own_denominators() {
        let mut c = ErrorCounts::default();
        for (truth, said) in [
            (false, false),
            (false, true),
            (false, false),
            (false, false),
            (true, false),
            (true, true),
        ] {
            c.record(truth, said);
        }
        assert_eq!(c.fpr(), Some(0.25));
        assert_eq!(c.fnr(), Some(0.5));
        assert_eq!(ErrorCounts::default().fpr(), None);
    }

    #[test]
    fn aggregate_averages_rates() {
        let a = ErrorCounts {
            n: 10,
            duplicates: 5,
            false_pos: 1,
            false_neg: 1,
        };
        let b = ErrorCounts {
            n: 10,
            duplicates: 5,
            false_pos: 3,
            false_neg: 0,
        };
        let report = ErrorReport::aggregate(template(), &[a, b]);
        assert_eq!(report.runs, 2);
        assert_eq!(report.totals.n, 20);
        assert!((report.fpr.unwrap() - 0.4).abs() < 1e-15);
        assert!((report.fnr.unwrap() - 0.1).abs() < 1e-15);
        assert!((report.error_x100().unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn single_value_stream_has_no_fpr_denominator_issue() {
        // one unseen element, then repeats
        let mut c = ErrorCounts::default();
        c.record(false, false);
        for _ in 0..9 {
            c.record(true, true);
        }
        assert_eq!(c.fpr(), Some(0.0));
        assert_eq!(c.fnr(), Some(0.0));
        let report = ErrorReport::aggregate(template(), &[ErrorCounts::default()]);
        assert_eq!(report.error_x100(), None);
    }
}
