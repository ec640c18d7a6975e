//! Finite-precision arithmetic coding driven by a [`Predictor`].
//!
//! The encoder narrows an integer interval `[low, high)` of `P`-bit
//! registers token by token and renormalizes with three scaling rules:
//!
//! 1. `high <= 1/2`: emit `0` plus any pending `1`s, double.
//! 2. `low >= 1/2`: emit `1` plus any pending `0`s, subtract `1/2`, double.
//! 3. `1/4 <= low` and `high <= 3/4`: defer one bit, subtract `1/4`, double.
//!
//! After the last token the encoder emits the shortest bit string whose
//! dyadic interval fits inside the final interval. One bit is enough when
//! the interval covers a whole half (the upper half is preferred). Otherwise
//! two bits are needed: `01` when `low < 1/4`, else `10`. The first bit
//! releases the pending bits as usual.
//!
//! The decoder keeps the dyadic interval spelled by the bits read so far
//! (halved once per bit) in the same register coordinates, and outputs a
//! token as soon as that interval lies inside the token's sub-interval. It
//! then applies exactly the encoder's scaling steps to both intervals. The
//! number of tokens comes from the block header, so no probability mass is
//! spent on an end-of-sequence symbol.

use thiserror::Error;

use crate::bits::BitBuffer;
use crate::corpus::{segment_blocks, BlockPlan};
use crate::predictor::{CumulativeDistribution, PredictError, Predictor, TokenId, TokenSequence, PROB_BITS};

/// Register width used for every headline experiment.
pub const DEFAULT_PRECISION: u32 = 31;

#[derive(Debug, Error)]
pub enum ArithError {
    #[error("precision {0} is outside {min}..={max}", min = PROB_BITS + 2, max = 47)]
    InvalidPrecision(u32),
    #[error("interval collapsed to [{low}, {high}); precision is too small for the distribution")]
    Collapse { low: u64, high: u64 },
    #[error("payload exhausted after {decoded} of {expected} tokens ({pad} padding bits read)")]
    Exhausted { decoded: usize, expected: usize, pad: usize },
    #[error("no token interval contains the received bits")]
    NoContainingToken,
    #[error("block of {0} tokens does not fit the 16-bit count header")]
    TooLong(usize),
    #[error(transparent)]
    Predictor(#[from] PredictError),
}

impl ArithError {
    /// True for errors caused by damaged input rather than misuse.
    pub fn is_corruption(&self) -> bool {
        matches!(self, ArithError::Exhausted { .. } | ArithError::NoContainingToken)
    }
}

/// One renormalization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// Interval inside the lower half (rule 1).
    Lower,
    /// Interval inside the upper half (rule 2).
    Upper,
    /// Interval straddles the midpoint inside the middle half (rule 3).
    Middle,
}

/// Live coder interval `[low, high)` with its pending-bit counter.
///
/// The emitted bit prefix is the dyadic expansion of every point of the
/// current interval's preimage; nothing else about the interval needs to be
/// stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalState {
    pub low: u64,
    pub high: u64,
    /// Scaling-3 steps whose output bit is not yet known.
    pub pending: u64,
    pub precision: u32,
}

impl IntervalState {
    pub fn new(precision: u32) -> Result<Self, ArithError> {
        if !(PROB_BITS + 2..=47).contains(&precision) {
            return Err(ArithError::InvalidPrecision(precision));
        }
        Ok(Self {
            low: 0,
            high: 1 << precision,
            pending: 0,
            precision,
        })
    }

    #[inline]
    pub fn half(&self) -> u64 {
        1 << (self.precision - 1)
    }

    #[inline]
    pub fn quarter(&self) -> u64 {
        1 << (self.precision - 2)
    }

    pub fn range(&self) -> u64 {
        self.high - self.low
    }

    /// Start of the sub-interval of cumulative index `i`.
    #[inline]
    pub fn boundary(&self, dist: &CumulativeDistribution, i: usize) -> u64 {
        self.low + self.range() * u64::from(dist.cumulative()[i]) / u64::from(dist.scale())
    }

    /// Replaces the interval by the sub-interval of `token`.
    pub fn narrow(&mut self, dist: &CumulativeDistribution, token: usize) -> Result<(), ArithError> {
        let lo = self.boundary(dist, token);
        let hi = self.boundary(dist, token + 1);
        if hi <= lo {
            return Err(ArithError::Collapse { low: lo, high: hi });
        }
        self.low = lo;
        self.high = hi;
        Ok(())
    }

    /// The scaling rule that currently applies, if any.
    pub fn next_scaling(&self) -> Option<Scaling> {
        let (half, quarter) = (self.half(), self.quarter());
        if self.high <= half {
            Some(Scaling::Lower)
        } else if self.low >= half {
            Some(Scaling::Upper)
        } else if self.low >= quarter && self.high <= half + quarter {
            Some(Scaling::Middle)
        } else {
            None
        }
    }

    /// Affine map of one scaling step, applied to any point of the interval.
    #[inline]
    pub fn map_point(&self, step: Scaling, x: u64) -> u64 {
        match step {
            Scaling::Lower => 2 * x,
            Scaling::Upper => 2 * (x - self.half()),
            Scaling::Middle => 2 * (x - self.quarter()),
        }
    }

    pub fn apply(&mut self, step: Scaling) {
        self.low = self.map_point(step, self.low);
        self.high = self.map_point(step, self.high);
    }
}

/// Streaming encoder.
#[derive(Debug, Clone)]
pub struct Encoder {
    state: IntervalState,
    out: BitBuffer,
    trace: Option<Vec<(u64, u64)>>,
}

impl Encoder {
    pub fn new(precision: u32) -> Result<Self, ArithError> {
        Ok(Self {
            state: IntervalState::new(precision)?,
            out: BitBuffer::new(),
            trace: None,
        })
    }

    /// Records the interval after every token for later comparison.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn state(&self) -> &IntervalState {
        &self.state
    }

    /// Bits emitted so far.
    pub fn emitted(&self) -> &BitBuffer {
        &self.out
    }

    pub fn encode(&mut self, dist: &CumulativeDistribution, token: usize) -> Result<(), ArithError> {
        self.state.narrow(dist, token)?;
        while let Some(step) = self.state.next_scaling() {
            match step {
                Scaling::Lower => {
                    self.out.push_with_pending(0, self.state.pending);
                    self.state.pending = 0;
                }
                Scaling::Upper => {
                    self.out.push_with_pending(1, self.state.pending);
                    self.state.pending = 0;
                }
                Scaling::Middle => self.state.pending += 1,
            }
            self.state.apply(step);
        }
        if let Some(t) = &mut self.trace {
            t.push((self.state.low, self.state.high));
        }
        Ok(())
    }

    /// Flushes the final interval and returns `(bits, trace)`.
    pub fn finish(mut self) -> (BitBuffer, Option<Vec<(u64, u64)>>) {
        let s = self.state;
        let pending = s.pending;
        if s.high == 1 << s.precision {
            self.out.push_with_pending(1, pending);
        } else if s.low == 0 {
            self.out.push_with_pending(0, pending);
        } else if s.low < s.quarter() {
            self.out.push_with_pending(0, pending);
            self.out.push(1);
        } else {
            self.out.push_with_pending(1, pending);
            self.out.push(0);
        }
        (self.out, self.trace)
    }
}

/// Streaming decoder over a fixed payload.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    state: IntervalState,
    bit_low: u64,
    bit_width: u64,
    bits: &'a [u8],
    pos: usize,
    pad: usize,
    trace: Option<Vec<(u64, u64)>>,
}

impl<'a> Decoder<'a> {
    pub fn new(bits: &'a [u8], precision: u32) -> Result<Self, ArithError> {
        let state = IntervalState::new(precision)?;
        Ok(Self {
            bit_low: 0,
            bit_width: state.high,
            state,
            bits,
            pos: 0,
            pad: 0,
            trace: None,
        })
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn trace(&self) -> Option<&[(u64, u64)]> {
        self.trace.as_deref()
    }

    /// Payload bits consumed so far.
    pub fn consumed(&self) -> usize {
        self.pos
    }

    /// Zero bits read past the end of the payload.
    pub fn padding(&self) -> usize {
        self.pad
    }

    /// Halves the bit interval according to the next payload bit.
    fn read_bit(&mut self) -> bool {
        let bit = match self.bits.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                b
            }
            None => {
                self.pad += 1;
                if self.pad > self.state.precision as usize {
                    return false;
                }
                0
            }
        };
        self.bit_width /= 2;
        if bit == 1 {
            self.bit_low += self.bit_width;
        }
        true
    }

    /// Decodes one token; `expected` and `decoded` only label errors.
    pub fn decode(&mut self, dist: &CumulativeDistribution, decoded: usize, expected: usize) -> Result<usize, ArithError> {
        let tau = dist.tau();
        let token = loop {
            // Largest i with boundary(i) <= bit_low.
            let (mut lo, mut hi) = (0usize, tau);
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if self.state.boundary(dist, mid) <= self.bit_low {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if self.bit_low + self.bit_width <= self.state.boundary(dist, lo + 1) {
                break lo;
            }
            if self.bit_width == 1 {
                return Err(ArithError::NoContainingToken);
            }
            if !self.read_bit() {
                return Err(ArithError::Exhausted {
                    decoded,
                    expected,
                    pad: self.pad,
                });
            }
        };
        self.state.narrow(dist, token)?;
        while let Some(step) = self.state.next_scaling() {
            self.bit_low = self.state.map_point(step, self.bit_low);
            self.bit_width *= 2;
            self.state.apply(step);
        }
        if let Some(t) = &mut self.trace {
            t.push((self.state.low, self.state.high));
        }
        Ok(token)
    }
}

/// One independently decodable block: token count plus payload `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBlock {
    pub token_count: usize,
    pub payload: BitBuffer,
}

/// Encodes `tokens` with `predictor`, context starting empty.
pub fn ac_encode(tokens: &[TokenId], predictor: &dyn Predictor, precision: u32) -> Result<EncodedBlock, ArithError> {
    encode_traced(tokens, predictor, precision, false).map(|(b, _)| b)
}

/// [`ac_encode`] that also returns the interval after each token.
pub fn encode_traced(
    tokens: &[TokenId],
    predictor: &dyn Predictor,
    precision: u32,
    trace: bool,
) -> Result<(EncodedBlock, Vec<(u64, u64)>), ArithError> {
    let mut enc = Encoder::new(precision)?;
    if trace {
        enc = enc.with_trace();
    }
    for k in 0..tokens.len() {
        let dist = predictor.predict(&tokens[..k])?;
        if tokens[k] as usize >= dist.tau() {
            return Err(PredictError::TokenOutOfRange {
                token: tokens[k],
                tau: dist.tau(),
            }
            .into());
        }
        enc.encode(&dist, tokens[k] as usize)?;
    }
    let (payload, t) = if tokens.is_empty() {
        (BitBuffer::new(), Some(Vec::new()))
    } else {
        enc.finish()
    };
    Ok((
        EncodedBlock {
            token_count: tokens.len(),
            payload,
        },
        t.unwrap_or_default(),
    ))
}

/// Decodes exactly `block.token_count` tokens.
pub fn ac_decode(block: &EncodedBlock, predictor: &dyn Predictor, precision: u32) -> Result<TokenSequence, ArithError> {
    decode_traced(block.payload.as_slice(), block.token_count, predictor, precision, false).map(|(t, _)| t)
}

/// Decodes `count` tokens from raw payload bits, optionally tracing.
pub fn decode_traced(
    bits: &[u8],
    count: usize,
    predictor: &dyn Predictor,
    precision: u32,
    trace: bool,
) -> Result<(TokenSequence, Vec<(u64, u64)>), ArithError> {
    let mut dec = Decoder::new(bits, precision)?;
    if trace {
        dec = dec.with_trace();
    }
    let mut out: TokenSequence = Vec::with_capacity(count);
    for k in 0..count {
        let dist = predictor.predict(&out)?;
        let t = dec.decode(&dist, k, count)?;
        out.push(t as TokenId);
    }
    let trace = dec.trace.take().unwrap_or_default();
    Ok((out, trace))
}

/// Tokenizes `text`, cuts it into blocks and codes each block with the
/// predictor's context reset.
pub fn ac_encode_blocked(
    text: &str,
    predictor: &dyn Predictor,
    plan: &BlockPlan,
    precision: u32,
) -> Result<Vec<EncodedBlock>, ArithError> {
    let tokens = predictor.tokenize(text)?;
    segment_blocks(&tokens, plan)
        .iter()
        .map(|blk| {
            if blk.len() > u16::MAX as usize {
                return Err(ArithError::TooLong(blk.len()));
            }
            ac_encode(blk, predictor, precision)
        })
        .collect()
}

/// Per-block results of [`ac_decode_blocked`].
#[derive(Debug)]
pub struct BlockedDecode {
    pub blocks: Vec<Result<TokenSequence, ArithError>>,
}

impl BlockedDecode {
    pub fn failures(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_err())
            .map(|(i, _)| i)
            .collect()
    }

    /// Reconstructed text; failed blocks contribute nothing.
    pub fn text(&self, predictor: &dyn Predictor) -> String {
        self.blocks
            .iter()
            .filter_map(|b| b.as_ref().ok())
            .map(|t| predictor.detokenize_lossy(t))
            .collect()
    }

    /// Exact reconstruction, failing if any block failed or the tokens do
    /// not detokenize.
    pub fn exact_text(&self, predictor: &dyn Predictor) -> Result<String, ArithError> {
        let mut tokens = Vec::new();
        for b in &self.blocks {
            match b {
                Ok(t) => tokens.extend_from_slice(t),
                Err(_) => {
                    return Err(ArithError::Exhausted {
                        decoded: tokens.len(),
                        expected: tokens.len(),
                        pad: 0,
                    })
                }
            }
        }
        Ok(predictor.detokenize(&tokens)?)
    }
}

/// Decodes every block independently; a failed block does not affect the
/// others.
pub fn ac_decode_blocked(blocks: &[EncodedBlock], predictor: &dyn Predictor, precision: u32) -> BlockedDecode {
    BlockedDecode {
        blocks: blocks.iter().map(|b| ac_decode(b, predictor, precision)).collect(),
    }
}
