//! BLEU and compression-rate metrics.

use std::collections::HashMap;

use thiserror::Error;

use crate::codec::{CodecError, SourceCodec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("reference text is empty")]
    EmptyReference,
    #[error("max_order must be in 1..=4, got {0}")]
    Order(usize),
    #[error("input text is empty")]
    EmptyInput,
}

/// BLEU scores of one candidate against one reference.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// `bleu[n-1]` is BLEU-n; orders above `max_order` are zero.
    pub bleu: [f64; 4],
    /// Modified n-gram precisions.
    pub precisions: [f64; 4],
    pub brevity_penalty: f64,
}

impl BleuReport {
    pub fn bleu1(&self) -> f64 {
        self.bleu[0]
    }

    pub fn bleu4(&self) -> f64 {
        self.bleu[3]
    }
}

fn ngram_counts<'w, 'a>(words: &'w [&'a str], n: usize) -> HashMap<&'w [&'a str], usize> {
    let mut counts = HashMap::new();
    for gram in words.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped matches and candidate n-gram total for order `n`.
pub fn modified_precision_counts(candidate: &[&str], reference: &[&str], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let matches = cand.iter().map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0))).sum();
    (matches, candidate.len().saturating_sub(n - 1))
}

/// Case-sensitive BLEU over whitespace-separated words.
///
/// With `smoothing`, orders two and up use `(matches + 1) / (total + 1)` so
/// short texts do not collapse to zero.
pub fn bleu(candidate: &str, reference: &str, max_order: usize, smoothing: bool) -> Result<BleuReport, MetricError> {
    if !(1..=4).contains(&max_order) {
        return Err(MetricError::Order(max_order));
    }
    let cand: Vec<&str> = candidate.split_whitespace().collect();
    let refw: Vec<&str> = reference.split_whitespace().collect();
    if refw.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let mut precisions = [0.0; 4];
    for n in 1..=max_order {
        let (m, t) = modified_precision_counts(&cand, &refw, n);
        precisions[n - 1] = if smoothing && n > 1 {
            (m as f64 + 1.0) / (t as f64 + 1.0)
        } else if t == 0 {
            0.0
        } else {
            m as f64 / t as f64
        };
    }
    let (c, r) = (cand.len() as f64, refw.len() as f64);
    let brevity_penalty = if c == 0.0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r / c).exp()
    };
    let mut scores = [0.0; 4];
    let mut log_sum = 0.0;
    for n in 1..=max_order {
        log_sum += precisions[n - 1].ln();
        scores[n - 1] = if precisions[..n].iter().any(|&p| p == 0.0) {
            0.0
        } else {
            brevity_penalty * (log_sum / n as f64).exp()
        };
    }
    Ok(BleuReport {
        bleu: scores,
        precisions,
        brevity_penalty,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub input_chars: usize,
    /// Size of the complete serialized output, headers included.
    pub output_bits: usize,
    /// `output_bits / (8 * input_chars)`.
    pub rate: f64,
}

/// Compresses `text`, checks the output decodes back to it, and reports the
/// rate against an 8-bit-per-character baseline.
pub fn compression_rate(text: &str, codec: &dyn SourceCodec) -> Result<CompressionReport, CodecError> {
    let input_chars = text.chars().count();
    if input_chars == 0 {
        return Err(CodecError::Metric(MetricError::EmptyInput));
    }
    let bytes = codec.compress(text)?;
    if codec.decompress(&bytes)? != text {
        return Err(CodecError::Mismatch);
    }
    let output_bits = bytes.len() * 8;
    Ok(CompressionReport {
        input_chars,
        output_bits,
        rate: output_bits as f64 / (8.0 * input_chars as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bleu_examples() {
        let r = bleu("the cat sat on the mat", "the cat sat on the mat", 4, false).unwrap();
        assert_eq!(r.bleu, [1.0; 4]);
        let r = bleu("dog runs fast", "the cat sat", 4, false).unwrap();
        assert_eq!(r.bleu1(), 0.0);
        let r = bleu("the the the", "the cat", 1, false).unwrap();
        assert!((r.bleu1() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(bleu("x", "", 4, false), Err(MetricError::EmptyReference));
        assert_eq!(bleu("x", "y", 5, false), Err(MetricError::Order(5)));
        assert_eq!(bleu("", "a b", 4, false).unwrap().bleu, [0.0; 4]);
    }

    #[test]
    fn brevity_and_smoothing() {
        let r = bleu("the cat", "the cat sat on the mat", 2, false).unwrap();
        assert!((r.brevity_penalty - (1.0f64 - 3.0).exp()).abs() < 1e-15);
        assert!((r.bleu[1] - r.brevity_penalty).abs() < 1e-15);
        let r = bleu("a b", "a c", 2, false).unwrap();
        assert_eq!(r.bleu[1], 0.0);
        let r = bleu("a b", "a c", 2, true).unwrap();
        assert!((r.bleu[1] - (0.5f64 * 0.5).sqrt()).abs() < 1e-15);
    }
}
