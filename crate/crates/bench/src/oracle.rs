use std::collections::HashSet;

/// Exact duplicate detector: remembers every element.
#[derive(Debug, Default, Clone)]
pub struct GroundTruthOracle {
    seen: HashSet<Box<[u8]>>,
}

impl GroundTruthOracle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Whether `element` occurred earlier, recording it either way.
    pub fn observe(&mut self, element: &[u8]) -> bool {
        if self.seen.contains(element) {
            true
        } else {
            self.seen.insert(element.into());
            false
        }
    }

    /// Whether `element` occurred earlier, without recording it.
    pub fn classify(&self, element: &[u8]) -> bool {
        self.seen.contains(element)
    }

    pub fn distinct(&self) -> usize {
        self.seen.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qht_core::UniformStream;

    #[test]
    fn first_occurrence_is_unseen() {
        let mut oracle = GroundTruthOracle::new();
        assert!(!oracle.observe(b""));
        assert!(oracle.observe(b""));
        assert!(!oracle.observe(b"a"));
        assert!(oracle.classify(b"a"));
        assert!(!oracle.classify(b"b"));
        assert_eq!(oracle.distinct(), 2);
    }

    #[test]
    fn duplicate_count_matches_a_sorting_pass() {
        let stream: Vec<[u8; 8]> = UniformStream::new(50_000, 200_000, 4).collect();
        let mut oracle = GroundTruthOracle::new();
        let duplicates = stream.iter().filter(|e| oracle.observe(&e[..])).count();
        let mut sorted = stream.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(duplicates, stream.len() - sorted.len());
    }
}
