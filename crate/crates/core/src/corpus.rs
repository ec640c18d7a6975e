//! Corpus loading and block segmentation.
//!
//! Corpora are newline-delimited UTF-8 files, one record per line. Blank
//! lines are skipped, and record text is otherwise kept verbatim (no case
//! folding or Unicode normalization) so that compression can be checked for
//! exact losslessness.

use std::fs;
use std::path::Path;

use thiserror::Error;

/// One source sequence `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextRecord {
    pub id: usize,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus {path} is not valid UTF-8 (first bad byte at offset {offset})")]
    InvalidUtf8 { path: String, offset: usize },
}

/// About 10 kB of original parliamentary-debate prose, one utterance per
/// line, shipped for compression and end-to-end experiments.
pub const BUILTIN_CORPUS: &str = include_str!("../data/debates.txt");

/// Records of [`BUILTIN_CORPUS`].
pub fn builtin_corpus(limit: Option<usize>) -> Vec<TextRecord> {
    parse_records(BUILTIN_CORPUS, limit)
}

/// Loads up to `limit` records from a newline-delimited UTF-8 file.
///
/// CRLF line endings are normalized to LF before splitting. Lines that are
/// empty after trimming whitespace are not records.
pub fn load_corpus(path: impl AsRef<Path>, limit: Option<usize>) -> Result<Vec<TextRecord>, CorpusError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|e| CorpusError::InvalidUtf8 {
        path: display,
        offset: e.utf8_error().valid_up_to(),
    })?;
    Ok(parse_records(&text, limit))
}

/// Splits already-decoded text into records, applying the same rules as
/// [`load_corpus`].
pub fn parse_records(text: &str, limit: Option<usize>) -> Vec<TextRecord> {
    let normalized = text.replace("\r\n", "\n");
    normalized
        .split('\n')
        .filter(|line| !line.trim().is_empty())
        .take(limit.unwrap_or(usize::MAX))
        .enumerate()
        .map(|(id, line)| TextRecord {
            id,
            text: line.to_string(),
        })
        .collect()
}

/// Joins records back into one source text, separated by newlines.
pub fn join_records(records: &[TextRecord]) -> String {
    records
        .iter()
        .map(|r| r.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// How a token sequence is cut into independently coded blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub block_size: usize,
    /// Bits spent per block on the token-count header.
    pub header_bits: u32,
}

impl BlockPlan {
    /// Width of the per-block token-count field used on the channel.
    pub const COUNT_BITS: u32 = 16;

    pub fn new(block_size: usize) -> Self {
        Self {
            block_size,
            header_bits: Self::COUNT_BITS,
        }
    }

    /// A plan that keeps the whole input in a single block whenever the
    /// count fits the header.
    pub fn whole() -> Self {
        Self::new(u16::MAX as usize)
    }
}

/// Cuts `tokens` into consecutive blocks of `plan.block_size`; only the last
/// block may be shorter.
///
/// # Panics
///
/// Panics if `plan.block_size` is zero.
pub fn segment_blocks<T: Clone>(tokens: &[T], plan: &BlockPlan) -> Vec<Vec<T>> {
    assert!(plan.block_size >= 1, "block size must be positive");
    tokens.chunks(plan.block_size).map(<[T]>::to_vec).collect()
}
