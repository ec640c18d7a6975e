//! A small causal transformer language model used as a stand-in for a large
//! pretrained predictor.
//!
//! Inputs are `[BOS, t_1, ..., t_n]` with learned token and position
//! embeddings; the logits at the last position give the next-token
//! distribution. Prefixes longer than the context window keep their most
//! recent `context - 1` tokens, the same rule in training and inference.

use std::io::{Read, Write};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ngram::{read_dictionary, write_dictionary};
use super::{quantize, CumulativeDistribution, Dictionary, PredictError, Predictor, TokenId, TokenSequence, PROB_BITS};
use crate::corpus::{join_records, TextRecord};
use crate::nn::{causal_mask, Adam, Checkpoint, Graph, LayerNorm, Linear, Mat, ParamId, Params, TransformerBlock};

#[derive(Debug, Clone, PartialEq)]
pub struct TinyLmConfig {
    pub layers: usize,
    pub dim: usize,
    pub heads: usize,
    /// Context window in positions, including the BOS slot.
    pub context: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl TinyLmConfig {
    /// A model small enough for unit tests and CI.
    pub fn small() -> Self {
        Self {
            layers: 1,
            dim: 32,
            heads: 4,
            context: 32,
            steps: 300,
            batch: 16,
            lr: 3e-3,
            seed: 0,
        }
    }

    /// Roughly a third of a million parameters over a byte dictionary.
    pub fn reference() -> Self {
        Self {
            layers: 2,
            dim: 104,
            heads: 4,
            context: 64,
            steps: 4000,
            batch: 32,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    tok_emb: ParamId,
    pos_emb: ParamId,
    blocks: Vec<TransformerBlock>,
    norm: LayerNorm,
    head: Linear,
}

/// A trained causal transformer predictor.
#[derive(Debug, Clone)]
pub struct TinyLm {
    dictionary: Dictionary,
    config: TinyLmConfig,
    params: Params,
    layout: Layout,
    losses: Vec<f64>,
}

fn build_layout(params: &mut Params, tau: usize, cfg: &TinyLmConfig, rng: &mut impl Rng) -> Layout {
    let tok_emb = params.add("tok_emb", Mat::randn(tau + 1, cfg.dim, 0.1, rng));
    let pos_emb = params.add("pos_emb", Mat::randn(cfg.context, cfg.dim, 0.1, rng));
    let blocks = (0..cfg.layers)
        .map(|l| TransformerBlock::new(params, &format!("block{l}"), cfg.dim, cfg.heads, 4, rng))
        .collect();
    let norm = LayerNorm::new(params, "ln_f", cfg.dim);
    let head = Linear::new(params, "head", cfg.dim, tau, rng);
    // Start near uniform.
    params.get_mut(head.w).data.iter_mut().for_each(|w| *w *= 0.1);
    Layout {
        tok_emb,
        pos_emb,
        blocks,
        norm,
        head,
    }
}

impl TinyLm {
    /// An untrained model with random weights.
    pub fn untrained(dictionary: Dictionary, config: TinyLmConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = Params::new();
        let layout = build_layout(&mut params, dictionary.len(), &config, &mut rng);
        Self {
            dictionary,
            config,
            params,
            layout,
            losses: Vec::new(),
        }
    }

    pub fn config(&self) -> &TinyLmConfig {
        &self.config
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    /// Training loss per step, in nats per token.
    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    fn bos(&self) -> usize {
        self.dictionary.len()
    }

    /// Logits for every position of `batch` equal-length input rows.
    fn forward(&self, g: &mut Graph, inputs: &[Vec<usize>]) -> crate::nn::Var {
        let seq = inputs[0].len();
        let ids: Vec<usize> = inputs.iter().flatten().copied().collect();
        let table = g.param(&self.params, self.layout.tok_emb);
        let pos_table = g.param(&self.params, self.layout.pos_emb);
        let pos = g.embedding(pos_table, Rc::new((0..seq).collect()));
        let x = g.embedding(table, Rc::new(ids));
        let mut x = g.add_tiled(x, pos);
        let mask = g.cached_mask(seq, || causal_mask(seq));
        for block in &self.layout.blocks {
            x = block.forward(g, &self.params, x, Some(&mask), inputs.len(), seq);
        }
        let x = self.layout.norm.forward(g, &self.params, x);
        self.layout.head.forward(g, &self.params, x)
    }

    fn window(&self, prefix: &[TokenId]) -> Vec<usize> {
        let keep = self.config.context - 1;
        let tail = &prefix[prefix.len().saturating_sub(keep)..];
        std::iter::once(self.bos()).chain(tail.iter().map(|&t| t as usize)).collect()
    }

    /// Next-token probabilities before quantization.
    pub fn probabilities(&self, prefix: &[TokenId]) -> Vec<f64> {
        let input = self.window(prefix);
        let mut g = Graph::new();
        let logits = self.forward(&mut g, &[input]);
        let lv = g.value(logits);
        let last = lv.row(lv.rows - 1);
        let max = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = last.iter().map(|x| (x - max).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let c = &self.config;
        Checkpoint {
            kind: "tiny-lm".into(),
            hyper: vec![
                ("layers".into(), c.layers as f64),
                ("dim".into(), c.dim as f64),
                ("heads".into(), c.heads as f64),
                ("context".into(), c.context as f64),
            ],
            params: self.params.clone(),
            optimizer: None,
        }
    }

    /// Writes the dictionary followed by a checkpoint.
    pub fn save(&self, mut w: impl Write) -> Result<(), PredictError> {
        w.write_all(b"SSCCTLM1")?;
        write_dictionary(&mut w, &self.dictionary)?;
        self.to_checkpoint()
            .write(w)
            .map_err(|e| PredictError::Format(e.to_string()))
    }

    pub fn load(mut r: impl Read) -> Result<Self, PredictError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"SSCCTLM1" {
            return Err(PredictError::Format("not a tiny-LM model file".into()));
        }
        let dictionary = read_dictionary(&mut r)?;
        let ckpt = Checkpoint::read(r).map_err(|e| PredictError::Format(e.to_string()))?;
        let get = |n: &str| ckpt.require(n).map(|v| v as usize).map_err(|e| PredictError::Format(e.to_string()));
        let config = TinyLmConfig {
            layers: get("layers")?,
            dim: get("dim")?,
            heads: get("heads")?,
            context: get("context")?,
            steps: 0,
            batch: 0,
            lr: 0.0,
            seed: 0,
        };
        let mut model = Self::untrained(dictionary, config);
        if model.params.len() != ckpt.params.len()
            || model
                .params
                .iter()
                .zip(ckpt.params.iter())
                .any(|(a, b)| a.1 != b.1 || a.2.shape() != b.2.shape())
        {
            return Err(PredictError::Format("parameter layout does not match hyperparameters".into()));
        }
        model.params = ckpt.params;
        Ok(model)
    }
}

/// Trains a causal LM on the concatenated corpus with Adam.
pub fn train_tiny_lm(corpus: &[TextRecord], dictionary: Dictionary, config: TinyLmConfig) -> Result<TinyLm, PredictError> {
    if corpus.is_empty() {
        return Err(PredictError::EmptyCorpus);
    }
    let tokens = dictionary.tokenize(&join_records(corpus))?;
    if tokens.is_empty() {
        return Err(PredictError::EmptyCorpus);
    }
    let mut model = TinyLm::untrained(dictionary, config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut opt = Adam::new(&model.params, config.lr);
    let span = (config.context - 1).min(tokens.len());
    for step in 0..config.steps {
        let mut inputs = Vec::with_capacity(config.batch);
        let mut targets = Vec::with_capacity(config.batch * span);
        for _ in 0..config.batch {
            let start = rng.random_range(0..=tokens.len() - span);
            let window = &tokens[start..start + span];
            let mut input = vec![model.bos()];
            input.extend(window[..span - 1].iter().map(|&t| t as usize));
            inputs.push(input);
            targets.extend(window.iter().map(|&t| t as usize));
        }
        let mut g = Graph::new();
        let logits = model.forward(&mut g, &inputs);
        let loss = g.softmax_cross_entropy(logits, Rc::new(targets));
        let value = g.value(loss).data[0];
        if !value.is_finite() {
            return Err(PredictError::Diverged { step, loss: value });
        }
        g.backward(loss);
        let grads = g.param_grads(&model.params);
        opt.step(&mut model.params, &grads);
        model.losses.push(value);
    }
    Ok(model)
}

impl Predictor for TinyLm {
    fn tau(&self) -> usize {
        self.dictionary.len()
    }

    fn predict(&self, prefix: &[TokenId]) -> Result<CumulativeDistribution, PredictError> {
        self.dictionary.check(prefix)?;
        quantize(&self.probabilities(prefix), PROB_BITS)
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
        format!("tinylm-{}x{}", self.config.layers, self.config.dim)
    }
}
