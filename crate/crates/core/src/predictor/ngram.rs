//! Count-based n-gram predictors with add-one smoothing.
//!
//! An order-`k` model conditions on the previous `k - 1` tokens. Prefixes
//! shorter than that (the start of every block) condition on the whole
//! prefix, using counts collected for that shorter context length.

use std::collections::HashMap;
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{quantize, CumulativeDistribution, Dictionary, PredictError, Predictor, TokenId, TokenSequence, PROB_BITS};
use crate::corpus::{join_records, TextRecord};

const MAGIC: &[u8; 8] = b"SSCCNGRM";
const VERSION: u32 = 1;

/// Smoothed probabilities from raw successor counts: `(c_i + 1) / (n + tau)`.
fn smoothed(counts: Option<&Vec<u32>>, tau: usize) -> Result<CumulativeDistribution, PredictError> {
    match counts {
        Some(c) => {
            let weights: Vec<f64> = c.iter().map(|&n| f64::from(n) + 1.0).collect();
            quantize(&weights, PROB_BITS)
        }
        None => Ok(CumulativeDistribution::uniform(tau)),
    }
}

/// An n-gram model with counts frozen at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramPredictor {
    dictionary: Dictionary,
    order: usize,
    counts: HashMap<Vec<TokenId>, Vec<u32>>,
}

/// Trains a frozen order-`order` model on the concatenated corpus text.
pub fn train_ngram(
    corpus: &[TextRecord],
    order: usize,
    dictionary: Dictionary,
) -> Result<NgramPredictor, PredictError> {
    if order == 0 {
        return Err(PredictError::Invalid("n-gram order must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(PredictError::EmptyCorpus);
    }
    let tokens = dictionary.tokenize(&join_records(corpus))?;
    if tokens.is_empty() {
        return Err(PredictError::EmptyCorpus);
    }
    Ok(NgramPredictor::from_tokens(&tokens, order, dictionary))
}

impl NgramPredictor {
    pub fn from_tokens(tokens: &[TokenId], order: usize, dictionary: Dictionary) -> Self {
        let tau = dictionary.len();
        let mut counts: HashMap<Vec<TokenId>, Vec<u32>> = HashMap::new();
        for i in 0..tokens.len() {
            for len in 0..order.min(i + 1) {
                let ctx = &tokens[i - len..i];
                counts.entry(ctx.to_vec()).or_insert_with(|| vec![0; tau])[tokens[i] as usize] += 1;
            }
        }
        Self {
            dictionary,
            order,
            counts,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Raw successor counts of `context`, if it was seen in training.
    pub fn counts(&self, context: &[TokenId]) -> Option<&[u32]> {
        self.counts.get(context).map(Vec::as_slice)
    }

    pub fn save(&self, mut w: impl Write) -> Result<(), PredictError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        write_dictionary(&mut w, &self.dictionary)?;
        w.write_u32::<LittleEndian>(self.order as u32)?;
        // Sorted for byte-stable files.
        let mut entries: Vec<_> = self.counts.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        w.write_u32::<LittleEndian>(entries.len() as u32)?;
        for (ctx, c) in entries {
            w.write_u32::<LittleEndian>(ctx.len() as u32)?;
            for &t in ctx {
                w.write_u32::<LittleEndian>(t)?;
            }
            let nonzero: Vec<_> = c.iter().enumerate().filter(|(_, &n)| n > 0).collect();
            w.write_u32::<LittleEndian>(nonzero.len() as u32)?;
            for (t, &n) in nonzero {
                w.write_u32::<LittleEndian>(t as u32)?;
                w.write_u32::<LittleEndian>(n)?;
            }
        }
        Ok(())
    }

    pub fn load(mut r: impl Read) -> Result<Self, PredictError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(PredictError::Format("not an n-gram model file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(PredictError::Format(format!("unsupported version {version}")));
        }
        let dictionary = read_dictionary(&mut r)?;
        let tau = dictionary.len();
        let order = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u32::<LittleEndian>()?;
        let mut counts = HashMap::new();
        for _ in 0..n {
            let len = r.read_u32::<LittleEndian>()?;
            let ctx = (0..len)
                .map(|_| r.read_u32::<LittleEndian>())
                .collect::<Result<Vec<_>, _>>()?;
            let mut c = vec![0u32; tau];
            for _ in 0..r.read_u32::<LittleEndian>()? {
                let t = r.read_u32::<LittleEndian>()? as usize;
                let v = r.read_u32::<LittleEndian>()?;
                *c.get_mut(t).ok_or_else(|| PredictError::Format(format!("token {t} out of range")))? = v;
            }
            counts.insert(ctx, c);
        }
        Ok(Self {
            dictionary,
            order,
            counts,
        })
    }
}

impl Predictor for NgramPredictor {
    fn tau(&self) -> usize {
        self.dictionary.len()
    }

    fn predict(&self, prefix: &[TokenId]) -> Result<CumulativeDistribution, PredictError> {
        self.dictionary.check(prefix)?;
        let len = prefix.len().min(self.order - 1);
        smoothed(self.counts.get(&prefix[prefix.len() - len..]), self.tau())
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
        format!("ngram{}", self.order)
    }
}

/// An n-gram model whose counts come only from the prefix being coded, so it
/// needs no training and adapts to any text.
#[derive(Debug, Clone)]
pub struct AdaptiveNgram {
    dictionary: Dictionary,
    order: usize,
}

impl AdaptiveNgram {
    pub fn new(dictionary: Dictionary, order: usize) -> Result<Self, PredictError> {
        if order == 0 {
            return Err(PredictError::Invalid("n-gram order must be at least 1".into()));
        }
        Ok(Self { dictionary, order })
    }
}

impl Predictor for AdaptiveNgram {
    fn tau(&self) -> usize {
        self.dictionary.len()
    }

    fn predict(&self, prefix: &[TokenId]) -> Result<CumulativeDistribution, PredictError> {
        self.dictionary.check(prefix)?;
        let n = prefix.len();
        let len = n.min(self.order - 1);
        let ctx = &prefix[n - len..];
        let mut counts = vec![0u32; self.tau()];
        for i in len..n {
            if &prefix[i - len..i] == ctx {
                counts[prefix[i] as usize] += 1;
            }
        }
        smoothed(Some(&counts), self.tau())
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
        format!("adaptive{}", self.order)
    }
}

pub(crate) fn write_dictionary(w: &mut impl Write, d: &Dictionary) -> Result<(), PredictError> {
    match d {
        Dictionary::Bytes => w.write_u8(0)?,
        Dictionary::Chars(chars) => {
            w.write_u8(1)?;
            w.write_u32::<LittleEndian>(chars.len() as u32)?;
            for &c in chars {
                w.write_u32::<LittleEndian>(c as u32)?;
            }
        }
    }
    Ok(())
}

pub(crate) fn read_dictionary(r: &mut impl Read) -> Result<Dictionary, PredictError> {
    match r.read_u8()? {
        0 => Ok(Dictionary::Bytes),
        1 => {
            let n = r.read_u32::<LittleEndian>()?;
            let chars = (0..n)
                .map(|_| {
                    let v = r.read_u32::<LittleEndian>()?;
                    char::from_u32(v).ok_or_else(|| PredictError::Format(format!("bad char {v:#x}")))
                })
                .collect::<Result<Vec<_>, PredictError>>()?;
            Dictionary::from_chars(chars)
        }
        k => Err(PredictError::Format(format!("unknown dictionary kind {k}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_records;
    use rand::{Rng, SeedableRng};

    fn ab() -> Dictionary {
        Dictionary::from_chars(['a', 'b']).unwrap()
    }

    #[test]
    fn bigram_laplace_estimate() {
        let p = train_ngram(&parse_records("aaab", None), 2, ab()).unwrap();
        let d = p.predict(&[0]).unwrap();
        assert!((d.probability(0) - 0.6).abs() < 1e-4);
        assert!((d.probability(1) - 0.4).abs() < 1e-4);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let p = train_ngram(&parse_records("aaaa", None), 2, ab()).unwrap();
        assert_eq!(p.predict(&[1]).unwrap(), CumulativeDistribution::uniform(2));
    }

    #[test]
    fn adaptive_bigram_counts_prefix() {
        let p = AdaptiveNgram::new(ab(), 2).unwrap();
        // "a a b a": a->a once, a->b once
        let d = p.predict(&[0, 0, 1, 0]).unwrap();
        assert_eq!(d.probability(0), 0.5);
        assert_eq!(d.probability(1), 0.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(train_ngram(&[], 2, ab()), Err(PredictError::EmptyCorpus)));
        assert!(train_ngram(&parse_records("ab", None), 0, ab()).is_err());
    }

    /// Counts every occurrence of `ctx` followed by each token, by direct
    /// scanning of the text.
    fn brute_force(tokens: &[TokenId], ctx: &[TokenId], tau: usize) -> Vec<f64> {
        let mut c = vec![1.0; tau];
        for i in ctx.len()..tokens.len() {
            if &tokens[i - ctx.len()..i] == ctx {
                c[tokens[i] as usize] += 1.0;
            }
        }
        let s: f64 = c.iter().sum();
        c.iter().map(|x| x / s).collect()
    }

    #[test]
    fn matches_count_table_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dict = Dictionary::from_chars(['a', 'b', 'c', 'd']).unwrap();
        for order in 1..=4 {
            let text: String = (0..1000).map(|_| ['a', 'b', 'c', 'd'][rng.random_range(0..4)]).collect();
            let p = train_ngram(&parse_records(&text, None), order, dict.clone()).unwrap();
            let tokens = dict.tokenize(&text).unwrap();
            for _ in 0..30 {
                let len = rng.random_range(0..8);
                let prefix: Vec<TokenId> = (0..len).map(|_| rng.random_range(0..4)).collect();
                let k = len.min(order - 1);
                let expect = brute_force(&tokens, &prefix[len - k..], 4);
                let got = p.predict(&prefix).unwrap();
                for t in 0..4 {
                    assert!((got.probability(t) - expect[t]).abs() < 1e-4, "order {order}");
                }
            }
        }
    }

    #[test]
    fn unigram_on_uniform_text_is_near_log_tau() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let dict = Dictionary::from_chars("abcdefghijklmnop".chars()).unwrap();
        let text: String = (0..100_000)
            .map(|_| char::from(b'a' + rng.random_range(0..16u8)))
            .collect();
        let p = train_ngram(&parse_records(&text, None), 1, dict.clone()).unwrap();
        let tokens = dict.tokenize(&text).unwrap();
        let h = crate::predictor::cross_entropy_bits(&p, &tokens).unwrap();
        assert!((h - 4.0).abs() < 0.05, "cross entropy {h}");
    }

    #[test]
    fn model_file_roundtrip() {
        let p = train_ngram(&parse_records("the cat sat on the mat", None), 3, Dictionary::Bytes).unwrap();
        let mut buf = Vec::new();
        p.save(&mut buf).unwrap();
        let q = NgramPredictor::load(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        let mut again = Vec::new();
        q.save(&mut again).unwrap();
        assert_eq!(buf, again);
        assert!(NgramPredictor::load(&b"garbage!xxxx"[..]).is_err());
    }
}
