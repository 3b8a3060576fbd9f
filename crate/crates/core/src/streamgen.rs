//! Element streams: uniform synthetic draws and newline-delimited files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::filter::Element;

/// Default cap on the length of one file record.
pub const DEFAULT_MAX_LINE: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line} is longer than {cap} bytes")]
    LineTooLong { line: u64, cap: usize },
}

/// Fraction of duplicates expected in `n` uniform draws over `U` values:
/// `(n - U (1 - (1 - 1/U)^n)) / n`.
pub fn expected_duplicates(universe: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let u = universe as f64;
    let distinct = u * -(n as f64 * (-1.0 / u).ln_1p()).exp_m1();
    (n as f64 - distinct) / n as f64
}

/// `n` i.i.d. uniform values in `[0, U)` as 8-byte little-endian elements.
///
/// Draw `i` comes from a ChaCha8 keystream at word `2 i`, so any position
/// can be regenerated independently with [`UniformStream::element_at`].
#[derive(Debug, Clone)]
pub struct UniformStream {
    universe: u64,
    len: u64,
    seed: u64,
    position: u64,
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(universe: u64, len: u64, seed: u64) -> Self {
        assert!(universe >= 1, "universe must hold at least one element");
        Self {
            universe,
            len,
            seed,
            position: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn scale(&self, word: u64) -> u64 {
        ((word as u128 * self.universe as u128) >> 64) as u64
    }

    /// Value of draw `index`.
    pub fn value_at(&self, index: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_word_pos(2 * index as u128);
        self.scale(rng.next_u64())
    }

    pub fn element_at(&self, index: u64) -> [u8; 8] {
        self.value_at(index).to_le_bytes()
    }

    /// Next raw value, without byte encoding.
    #[inline]
    pub fn next_value(&mut self) -> Option<u64> {
        if self.position == self.len {
            return None;
        }
        self.position += 1;
        let word = self.rng.next_u64();
        Some(self.scale(word))
    }
}

impl Iterator for UniformStream {
    type Item = [u8; 8];

    #[inline]
    fn next(&mut self) -> Option<[u8; 8]> {
        self.next_value().map(u64::to_le_bytes)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.len - self.position) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for UniformStream {}

/// Newline-delimited records read one at a time.
#[derive(Debug)]
pub struct LineStream<R> {
    reader: R,
    max_line: usize,
    line: u64,
    buf: Vec<u8>,
    path: PathBuf,
    failed: bool,
}

/// Opens `path` as a stream of records, one per `\n`-terminated line.
pub fn ingest_file(path: impl AsRef<Path>) -> Result<LineStream<BufReader<File>>, StreamError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| StreamError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(LineStream::new(BufReader::new(file), path))
}

impl<R: BufRead> LineStream<R> {
    pub fn new(reader: R, path: impl Into<PathBuf>) -> Self {
        Self {
            reader,
            max_line: DEFAULT_MAX_LINE,
            line: 0,
            buf: Vec::new(),
            path: path.into(),
            failed: false,
        }
    }

    /// Rejects records longer than `max_line` bytes.
    pub fn with_max_line(mut self, max_line: usize) -> Self {
        self.max_line = max_line;
        self
    }

    fn read_record(&mut self) -> Result<Option<Element>, StreamError> {
        self.buf.clear();
        let limit = self.max_line as u64 + 1;
        let read = (&mut self.reader)
            .take(limit)
            .read_until(b'\n', &mut self.buf)
            .map_err(|source| StreamError::Io {
                path: self.path.clone(),
                source,
            })?;
        if read == 0 {
            return Ok(None);
        }
        self.line += 1;
        if self.buf.last() == Some(&b'\n') {
            self.buf.pop();
        }
        if self.buf.len() > self.max_line {
            return Err(StreamError::LineTooLong {
                line: self.line,
                cap: self.max_line,
            });
        }
        Ok(Some(self.buf.clone()))
    }
}

impl<R: BufRead> Iterator for LineStream<R> {
    type Item = Result<Element, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.read_record() {
            Ok(record) => record.map(Ok),
            Err(err) => {
                self.failed = true;
                Some(Err(err))
            }
        }
    }
}

/// Where a benchmark stream comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamSpec {
    Uniform { universe: u64, len: u64, seed: u64 },
    File { path: PathBuf },
}

impl StreamSpec {
    /// Expected duplicate fraction, known only for uniform sources.
    pub fn expected_duplicate_fraction(&self) -> Option<f64> {
        match self {
            StreamSpec::Uniform { universe, len, .. } => Some(expected_duplicates(*universe, *len)),
            StreamSpec::File { .. } => None,
        }
    }

    /// Stream of elements; uniform sources never fail.
    pub fn open(&self) -> Result<Box<dyn Iterator<Item = Result<Element, StreamError>>>, StreamError> {
        Ok(match self {
            StreamSpec::Uniform { universe, len, seed } => {
                Box::new(UniformStream::new(*universe, *len, *seed).map(|e| Ok(e.to_vec())))
            }
            StreamSpec::File { path } => Box::new(ingest_file(path)?),
        })
    }
}
