//! Static character-level Huffman coding with canonical codewords.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::arith::EncodedBlock;
use crate::bits::BitBuffer;
use crate::corpus::{segment_blocks, BlockPlan};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HuffmanError {
    #[error("a Huffman table needs at least two symbols with non-zero count, got {0}")]
    TooFewSymbols(usize),
    #[error("symbol {0:?} is not in the table")]
    UnknownSymbol(char),
    #[error("bits ran out after {decoded} of {expected} symbols")]
    Exhausted { decoded: usize, expected: usize },
    #[error("{0} trailing bits are not a complete codeword")]
    Dangling(usize),
    #[error("block of {0} symbols does not fit the 16-bit count header")]
    TooLong(usize),
}

/// Canonical prefix code over characters.
///
/// Symbols are kept in `char` order; codewords are assigned shortest first,
/// ties broken by that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    symbols: Vec<char>,
    freqs: Vec<u64>,
    lengths: Vec<u32>,
    codes: Vec<u64>,
    index: BTreeMap<char, usize>,
}

/// Counts characters of `text`.
pub fn char_frequencies(text: &str) -> BTreeMap<char, u64> {
    let mut f = BTreeMap::new();
    for c in text.chars() {
        *f.entry(c).or_insert(0) += 1;
    }
    f
}

/// Optimal code lengths for `weights` (all positive, at least two).
pub fn huffman_lengths(weights: &[u64]) -> Vec<u32> {
    // Nodes 0..n are leaves; internal nodes are appended with their parent
    // recorded so depths can be read back.
    let n = weights.len();
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = weights.iter().enumerate().map(|(i, &w)| Reverse((w, i))).collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().unwrap();
        let Reverse((wb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((wa + wb, next)));
        next += 1;
    }
    (0..n)
        .map(|mut i| {
            let mut depth = 0;
            while parent[i] != usize::MAX {
                i = parent[i];
                depth += 1;
            }
            depth
        })
        .collect()
}

impl HuffmanTable {
    pub fn build(frequencies: &BTreeMap<char, u64>) -> Result<Self, HuffmanError> {
        let (symbols, freqs): (Vec<char>, Vec<u64>) = frequencies.iter().filter(|(_, &f)| f > 0).map(|(&c, &f)| (c, f)).unzip();
        if symbols.len() < 2 {
            return Err(HuffmanError::TooFewSymbols(symbols.len()));
        }
        let lengths = huffman_lengths(&freqs);
        let mut order: Vec<usize> = (0..symbols.len()).collect();
        order.sort_by_key(|&i| (lengths[i], i));
        let mut codes = vec![0u64; symbols.len()];
        let mut code = 0u64;
        let mut prev_len = lengths[order[0]];
        for (k, &i) in order.iter().enumerate() {
            if k > 0 {
                code = (code + 1) << (lengths[i] - prev_len);
            }
            codes[i] = code;
            prev_len = lengths[i];
        }
        let index = symbols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(Self {
            symbols,
            freqs,
            lengths,
            codes,
            index,
        })
    }

    /// Table built from the text it will encode.
    pub fn from_text(text: &str) -> Result<Self, HuffmanError> {
        Self::build(&char_frequencies(text))
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn code_length(&self, c: char) -> Option<u32> {
        self.index.get(&c).map(|&i| self.lengths[i])
    }

    /// Codeword of `c` as a `'0'`/`'1'` string.
    pub fn codeword(&self, c: char) -> Option<String> {
        self.index.get(&c).map(|&i| {
            (0..self.lengths[i])
                .rev()
                .map(|b| if (self.codes[i] >> b) & 1 == 1 { '1' } else { '0' })
                .collect()
        })
    }

    pub fn kraft_sum(&self) -> f64 {
        self.lengths.iter().map(|&l| 0.5f64.powi(l as i32)).sum()
    }

    /// Frequency-weighted mean codeword length in bits per symbol.
    pub fn average_length(&self) -> f64 {
        let total: u64 = self.freqs.iter().sum();
        let weighted: u64 = self.freqs.iter().zip(&self.lengths).map(|(&f, &l)| f * u64::from(l)).sum();
        weighted as f64 / total as f64
    }

    /// Entropy of the table's frequencies in bits per symbol.
    pub fn entropy(&self) -> f64 {
        let total: u64 = self.freqs.iter().sum();
        self.freqs
            .iter()
            .map(|&f| {
                let p = f as f64 / total as f64;
                -p * p.log2()
            })
            .sum()
    }

    pub fn encode(&self, text: &str) -> Result<BitBuffer, HuffmanError> {
        let mut out = BitBuffer::new();
        for c in text.chars() {
            let &i = self.index.get(&c).ok_or(HuffmanError::UnknownSymbol(c))?;
            out.push_uint(self.codes[i], self.lengths[i]);
        }
        Ok(out)
    }

    /// Decodes one symbol starting at `bits[pos..]`, returning it and the
    /// number of bits used, or `None` if the bits end first.
    fn decode_one(&self, bits: &[u8]) -> Option<(char, usize)> {
        // Canonical codes: walk lengths in increasing order.
        let mut code = 0u64;
        let max = *self.lengths.iter().max().unwrap();
        for len in 1..=max {
            code = (code << 1) | u64::from(*bits.get(len as usize - 1)?);
            if let Some(i) = (0..self.symbols.len()).find(|&i| self.lengths[i] == len && self.codes[i] == code) {
                return Some((self.symbols[i], len as usize));
            }
        }
        None
    }

    /// Decodes every bit; trailing bits that are not a codeword are an error.
    pub fn decode(&self, bits: &[u8]) -> Result<String, HuffmanError> {
        let mut out = String::new();
        let mut pos = 0;
        while pos < bits.len() {
            match self.decode_one(&bits[pos..]) {
                Some((c, used)) => {
                    out.push(c);
                    pos += used;
                }
                None => return Err(HuffmanError::Dangling(bits.len() - pos)),
            }
        }
        Ok(out)
    }

    /// Decodes exactly `count` symbols and ignores any remaining bits.
    pub fn decode_count(&self, bits: &[u8], count: usize) -> Result<String, HuffmanError> {
        let mut out = String::new();
        let mut pos = 0;
        for decoded in 0..count {
            let (c, used) = self
                .decode_one(&bits[pos..])
                .ok_or(HuffmanError::Exhausted { decoded, expected: count })?;
            out.push(c);
            pos += used;
        }
        Ok(out)
    }

    /// Splits `text` into character blocks and encodes each one.
    pub fn encode_blocked(&self, text: &str, plan: &BlockPlan) -> Result<Vec<EncodedBlock>, HuffmanError> {
        let chars: Vec<char> = text.chars().collect();
        segment_blocks(&chars, plan)
            .into_iter()
            .map(|blk| {
                if blk.len() > u16::MAX as usize {
                    return Err(HuffmanError::TooLong(blk.len()));
                }
                let s: String = blk.iter().collect();
                Ok(EncodedBlock {
                    token_count: blk.len(),
                    payload: self.encode(&s)?,
                })
            })
            .collect()
    }

    pub fn decode_block(&self, block: &EncodedBlock) -> Result<String, HuffmanError> {
        self.decode_count(block.payload.as_slice(), block.token_count)
    }
}
