//! Probability oracles that drive arithmetic coding.
//!
//! A [`Predictor`] maps a token prefix to a quantized next-token
//! [`CumulativeDistribution`]. The distribution must be a pure function of
//! the prefix: the decoder replays the encoder's queries and any difference,
//! even in one quantum, desynchronizes the two.

mod dictionary;
mod dist;
mod ngram;
pub mod remote;
pub mod tiny_lm;

use std::io;

use thiserror::Error;

pub use dictionary::{Dictionary, TokenId, TokenSequence};
pub use dist::{quantize, CumulativeDistribution, PROB_BITS};
pub use ngram::{train_ngram, AdaptiveNgram, NgramPredictor};
pub use remote::RemotePredictor;
pub use tiny_lm::{train_tiny_lm, TinyLm, TinyLmConfig};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("invalid distribution: {0}")]
    Invalid(String),
    #[error("symbol {0:?} is not in the dictionary")]
    UnknownSymbol(char),
    #[error("token {token} out of range for a dictionary of {tau}")]
    TokenOutOfRange { token: TokenId, tau: usize },
    #[error("tokens do not form valid UTF-8 (valid up to byte {0})")]
    InvalidText(usize),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    /// Transport-level failure talking to a remote predictor; retrying on a
    /// fresh connection may succeed.
    #[error("remote predictor transport: {0}")]
    Transport(String),
    #[error("remote predictor error: {0}")]
    Remote(String),
    #[error("bad model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PredictError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, PredictError::Transport(_))
    }
}

/// The probability oracle `rho~` together with its tokenizer.
pub trait Predictor: Send + Sync {
    /// Dictionary size `tau`.
    fn tau(&self) -> usize;

    /// Next-token distribution given `prefix`. Must be deterministic.
    fn predict(&self, prefix: &[TokenId]) -> Result<CumulativeDistribution, PredictError>;

    fn tokenize(&self, text: &str) -> Result<TokenSequence, PredictError>;

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, PredictError>;

    /// Best-effort detokenization of possibly corrupted tokens.
    fn detokenize_lossy(&self, tokens: &[TokenId]) -> String {
        self.detokenize(tokens).unwrap_or_default()
    }

    /// Short human-readable identifier used in reports.
    fn name(&self) -> String;
}

/// Equal mass on every token of the dictionary.
#[derive(Debug, Clone)]
pub struct UniformPredictor {
    dictionary: Dictionary,
    dist: CumulativeDistribution,
}

impl UniformPredictor {
    pub fn new(dictionary: Dictionary) -> Self {
        let dist = CumulativeDistribution::uniform(dictionary.len());
        Self { dictionary, dist }
    }
}

impl Predictor for UniformPredictor {
    fn tau(&self) -> usize {
        self.dictionary.len()
    }

    fn predict(&self, prefix: &[TokenId]) -> Result<CumulativeDistribution, PredictError> {
        self.dictionary.check(prefix)?;
        Ok(self.dist.clone())
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence, PredictError> {
        self.dictionary.tokenize(text)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, PredictError> {
        self.dictionary.detokenize(tokens)
    }

    fn detokenize_lossy(&self, tokens: &[TokenId]) -> String {
        self.dictionary.detokenize_lossy(tokens)
    }

    fn name(&self) -> String {
        "uniform".into()
    }
}

/// A memoryless source model: the same distribution at every position.
#[derive(Debug, Clone)]
pub struct StaticPredictor {
    dictionary: Dictionary,
    dist: CumulativeDistribution,
}

impl StaticPredictor {
    pub fn new(dictionary: Dictionary, dist: CumulativeDistribution) -> Result<Self, PredictError> {
        if dist.tau() != dictionary.len() {
            return Err(PredictError::Invalid(format!(
                "distribution has {} tokens, dictionary {}",
                dist.tau(),
                dictionary.len()
            )));
        }
        Ok(Self { dictionary, dist })
    }

    /// An iid model over a synthetic alphabet `'a', 'b', ...` with the given
    /// weights.
    pub fn iid(weights: &[f64]) -> Result<Self, PredictError> {
        let chars = (0..weights.len() as u32).map(|i| char::from_u32('a' as u32 + i).unwrap());
        Self::new(Dictionary::from_chars(chars)?, quantize(weights, PROB_BITS)?)
    }

    pub fn distribution(&self) -> &CumulativeDistribution {
        &self.dist
    }
}

impl Predictor for StaticPredictor {
    fn tau(&self) -> usize {
        self.dictionary.len()
    }

    fn predict(&self, prefix: &[TokenId]) -> Result<CumulativeDistribution, PredictError> {
        self.dictionary.check(prefix)?;
        Ok(self.dist.clone())
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence, PredictError> {
        self.dictionary.tokenize(text)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, PredictError> {
        self.dictionary.detokenize(tokens)
    }

    fn detokenize_lossy(&self, tokens: &[TokenId]) -> String {
        self.dictionary.detokenize_lossy(tokens)
    }

    fn name(&self) -> String {
        "static".into()
    }
}

/// Average of `-log2 p~(t_k | t_<k)` over `tokens`, in bits per token, under
/// the quantized distributions the coder actually uses.
pub fn cross_entropy_bits(predictor: &dyn Predictor, tokens: &[TokenId]) -> Result<f64, PredictError> {
    Ok(code_length_bits(predictor, tokens)? / tokens.len().max(1) as f64)
}

/// Total ideal code length `sum -log2 p~` of `tokens`, in bits.
pub fn code_length_bits(predictor: &dyn Predictor, tokens: &[TokenId]) -> Result<f64, PredictError> {
    let mut bits = 0.0;
    for k in 0..tokens.len() {
        let dist = predictor.predict(&tokens[..k])?;
        bits -= dist.probability(tokens[k] as usize).log2();
    }
    Ok(bits)
}
