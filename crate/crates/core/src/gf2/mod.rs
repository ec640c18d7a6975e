//! Binary linear block codes: parity-check and generator matrices, alist
//! files, encoding, syndromes and the classical decoders.

mod alist;
mod construct;
mod decode;

use thiserror::Error;

pub use alist::{parse_alist, write_alist};
pub use construct::{peg_parity_check, girth};
pub use decode::{DecodeOutcome, DEFAULT_BITFLIP_ITERS, DEFAULT_BP_ITERS, LLR_CLIP};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("malformed alist: {0}")]
    Alist(String),
    #[error("parity-check matrix has {rows} rows but rank {rank}")]
    RankDeficient { rows: usize, rank: usize },
    #[error("expected {expected} bits, got {got}")]
    Length { expected: usize, got: usize },
    #[error("LLR {index} is not finite")]
    NonFiniteLlr { index: usize },
    #[error("unknown built-in code {0:?}")]
    UnknownCode(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Dense GF(2) matrix, one byte per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<u8>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged rows");
            for (j, &b) in r.iter().enumerate() {
                m.set(i, j, b & 1);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.cols + c] = v & 1;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Column indices holding a one in row `r`.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.get(r, c) == 1).collect()
    }

    pub fn col_support(&self, c: usize) -> Vec<usize> {
        (0..self.rows).filter(|&r| self.get(r, c) == 1).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self.get(i, k) == 1 {
                    for j in 0..other.cols {
                        let v = out.get(i, j) ^ other.get(k, j);
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    /// `self * v` over GF(2).
    pub fn mul_vec(&self, v: &[u8]) -> Vec<u8> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).fold(0, |acc, (a, b)| acc ^ (a & b)))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&b| b == 0)
    }

    /// Reduced row echelon form and its pivot columns.
    pub fn rref(&self) -> (BitMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| m.get(i, c) == 1) else {
                continue;
            };
            if p != r {
                for j in 0..m.cols {
                    let (a, b) = (m.get(r, j), m.get(p, j));
                    m.set(r, j, b);
                    m.set(p, j, a);
                }
            }
            for i in 0..m.rows {
                if i != r && m.get(i, c) == 1 {
                    for j in 0..m.cols {
                        let v = m.get(i, j) ^ m.get(r, j);
                        m.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }
}

/// A binary linear code `C(N, K)` given by its parity-check matrix.
///
/// The generator is derived from the reduced row echelon form of `H`:
/// pivot columns carry parity bits and the remaining `K` columns carry the
/// message verbatim, so no physical permutation of codeword positions is
/// needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    pub name: String,
    h: BitMatrix,
    g: BitMatrix,
    n: usize,
    k: usize,
    info: Vec<usize>,
    parity: Vec<usize>,
    /// RREF rows restricted to the message columns, one per parity column.
    parity_eqs: Vec<Vec<usize>>,
    check_adj: Vec<Vec<usize>>,
    bit_adj: Vec<Vec<usize>>,
}

impl LinearCode {
    pub fn from_parity_check(name: impl Into<String>, h: BitMatrix) -> Result<Self, CodeError> {
        let (r, pivots) = h.rref();
        if pivots.len() < h.rows {
            return Err(CodeError::RankDeficient {
                rows: h.rows,
                rank: pivots.len(),
            });
        }
        let n = h.cols;
        let k = n - pivots.len();
        let info: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
        let parity_eqs: Vec<Vec<usize>> = (0..pivots.len())
            .map(|row| (0..k).filter(|&i| r.get(row, info[i]) == 1).collect())
            .collect();
        let check_adj = (0..h.rows).map(|i| h.row_support(i)).collect();
        let bit_adj = (0..n).map(|j| h.col_support(j)).collect();
        let mut code = Self {
            name: name.into(),
            g: BitMatrix::zeros(k, n),
            h,
            n,
            k,
            info,
            parity: pivots,
            parity_eqs,
            check_adj,
            bit_adj,
        };
        for i in 0..k {
            let mut m = vec![0u8; k];
            m[i] = 1;
            let x = code.encode_unchecked(&m);
            for (j, &b) in x.iter().enumerate() {
                code.g.set(i, j, b);
            }
        }
        Ok(code)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of parity checks `N - K`.
    pub fn m(&self) -> usize {
        self.n - self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn h(&self) -> &BitMatrix {
        &self.h
    }

    pub fn g(&self) -> &BitMatrix {
        &self.g
    }

    /// Codeword positions that carry the message, in message order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info
    }

    pub fn parity_positions(&self) -> &[usize] {
        &self.parity
    }

    /// Bits taking part in each check.
    pub fn check_neighbors(&self) -> &[Vec<usize>] {
        &self.check_adj
    }

    /// Checks each bit takes part in.
    pub fn bit_neighbors(&self) -> &[Vec<usize>] {
        &self.bit_adj
    }

    fn encode_unchecked(&self, message: &[u8]) -> Vec<u8> {
        let mut x = vec![0u8; self.n];
        for (i, &p) in self.info.iter().enumerate() {
            x[p] = message[i] & 1;
        }
        for (row, &p) in self.parity.iter().enumerate() {
            x[p] = self.parity_eqs[row].iter().fold(0, |acc, &i| acc ^ (message[i] & 1));
        }
        x
    }

    /// `x = m G`; message bits appear verbatim at [`Self::info_positions`].
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, CodeError> {
        if message.len() != self.k {
            return Err(CodeError::Length {
                expected: self.k,
                got: message.len(),
            });
        }
        Ok(self.encode_unchecked(message))
    }

    pub fn syndrome(&self, hard: &[u8]) -> Result<Vec<u8>, CodeError> {
        if hard.len() != self.n {
            return Err(CodeError::Length {
                expected: self.n,
                got: hard.len(),
            });
        }
        Ok(self.syndrome_unchecked(hard))
    }

    pub(crate) fn syndrome_unchecked(&self, hard: &[u8]) -> Vec<u8> {
        self.check_adj
            .iter()
            .map(|bits| bits.iter().fold(0, |acc, &j| acc ^ hard[j]))
            .collect()
    }

    pub fn is_codeword(&self, hard: &[u8]) -> bool {
        hard.len() == self.n && self.check_adj.iter().all(|bits| bits.iter().fold(0, |acc, &j| acc ^ hard[j]) == 0)
    }

    /// Message bits of a (hard) codeword estimate.
    pub fn extract_message(&self, codeword: &[u8]) -> Vec<u8> {
        self.info.iter().map(|&p| codeword[p]).collect()
    }

    pub fn repetition(n: usize) -> Self {
        let mut h = BitMatrix::zeros(n - 1, n);
        for i in 0..n - 1 {
            h.set(i, i, 1);
            h.set(i, i + 1, 1);
        }
        Self::from_parity_check(format!("rep_{n}_1"), h).expect("repetition H is full rank")
    }

    /// Parses an alist description.
    pub fn from_alist(name: impl Into<String>, text: &str) -> Result<Self, CodeError> {
        Self::from_parity_check(name, parse_alist(text)?)
    }

    pub fn load_alist(path: &std::path::Path) -> Result<Self, CodeError> {
        let text = std::fs::read_to_string(path).map_err(|e| CodeError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let name = path.file_stem().map_or_else(|| "code".into(), |s| s.to_string_lossy().into_owned());
        Self::from_alist(name, &text)
    }

    /// Loads a shipped code by name, or an alist file if `spec` is a path.
    pub fn resolve(spec: &str) -> Result<Self, CodeError> {
        match builtin_alist(spec) {
            Some(text) => Self::from_alist(spec, text),
            None if std::path::Path::new(spec).exists() => Self::load_alist(std::path::Path::new(spec)),
            None => Err(CodeError::UnknownCode(spec.to_string())),
        }
    }
}

/// Names of the codes compiled into the library.
pub const BUILTIN_CODES: &[&str] = &[
    "ldpc_49_24",
    "ldpc_49_30",
    "ldpc_49_36",
    "ldpc_121_110",
    "hamming_7_4",
    "rep_2_1",
    "rep_3_1",
];

pub fn builtin_alist(name: &str) -> Option<&'static str> {
    Some(match name {
        "ldpc_49_24" => include_str!("../../codes/ldpc_49_24.alist"),
        "ldpc_49_30" => include_str!("../../codes/ldpc_49_30.alist"),
        "ldpc_49_36" => include_str!("../../codes/ldpc_49_36.alist"),
        "ldpc_121_110" => include_str!("../../codes/ldpc_121_110.alist"),
        "hamming_7_4" => include_str!("../../codes/hamming_7_4.alist"),
        "rep_2_1" => include_str!("../../codes/rep_2_1.alist"),
        "rep_3_1" => include_str!("../../codes/rep_3_1.alist"),
        _ => return None,
    })
}

/// Parsed built-in code; panics only if a shipped file is broken.
pub fn builtin(name: &str) -> Result<LinearCode, CodeError> {
    let text = builtin_alist(name).ok_or_else(|| CodeError::UnknownCode(name.to_string()))?;
    LinearCode::from_alist(name, text)
}
