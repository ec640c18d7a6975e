use std::rc::Rc;

use rand::{Rng, SeedableRng};

use super::{build_mask, EcctError};
use crate::channel::{bin_to_sign, sign_to_bin};
use crate::gf2::{BitMatrix, LinearCode};
use crate::nn::{Checkpoint, Graph, LayerNorm, Linear, Mat, ParamId, Params, TransformerBlock, Var};

/// Scale on the output head's initial weights.
const HEAD_INIT_GAIN: f64 = 0.1;

/// Transformer shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EcctArch {
    pub layers: usize,
    pub dim: usize,
    pub heads: usize,
    /// Feed-forward width as a multiple of `dim`.
    pub ff_mult: usize,
}

impl EcctArch {
    /// Small model for tests and quick experiments.
    pub fn ci() -> Self {
        Self {
            layers: 2,
            dim: 16,
            heads: 4,
            ff_mult: 4,
        }
    }

    /// Full-size model: 6 layers, width 32, 8 heads.
    pub fn full() -> Self {
        Self {
            layers: 6,
            dim: 32,
            heads: 8,
            ff_mult: 4,
        }
    }
}

/// Reliability vector `[|y|, syn(y_b)]` of length `2N-K`.
pub fn preprocess(y: &[f64], code: &LinearCode) -> Vec<f64> {
    let hard = sign_to_bin(y);
    let mut out: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    out.extend(code.syndrome_unchecked(&hard).iter().map(|&s| f64::from(s)));
    out
}

/// Per-position scale applied to the embedding rows: `|y_i|` for bits and
/// `bin_to_sign(syndrome bit)` for checks.
pub fn embedding_scales(reliability: &[f64], n: usize) -> Vec<f64> {
    reliability
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < n { v } else { bin_to_sign(&[v as u8])[0] })
        .collect()
}

/// Hard codeword estimate `sign_to_bin(y * s)` from an estimated sign `s`
/// of the multiplicative noise.
pub fn postprocess_sign(y: &[f64], z_sign: &[f64]) -> Vec<u8> {
    let prod: Vec<f64> = y.iter().zip(z_sign).map(|(a, b)| a * b).collect();
    sign_to_bin(&prod)
}

/// Hard codeword estimate from model logits, where `sigmoid(logit)` is the
/// probability that the multiplicative noise is negative.
pub fn postprocess_logits(y: &[f64], logits: &[f64]) -> Vec<u8> {
    let signs: Vec<f64> = logits.iter().map(|&l| if l < 0.0 { 1.0 } else { -1.0 }).collect();
    postprocess_sign(y, &signs)
}

/// The error correction code transformer.
#[derive(Debug, Clone)]
pub struct EcctModel {
    pub arch: EcctArch,
    code: LinearCode,
    pub params: Params,
    embed: ParamId,
    blocks: Vec<TransformerBlock>,
    norm: LayerNorm,
    head_pos: Linear,
    head_out: Linear,
    mask: Vec<f64>,
}

impl EcctModel {
    pub fn new(code: LinearCode, arch: EcctArch, rng: &mut impl Rng) -> Self {
        assert_eq!(arch.dim % arch.heads, 0, "dim must be divisible by heads");
        let len = code.n() + code.m();
        let mut params = Params::new();
        let embed = params.add("embed", Mat::randn(len, arch.dim, 1.0, rng));
        let blocks = (0..arch.layers)
            .map(|l| TransformerBlock::new(&mut params, &format!("block{l}"), arch.dim, arch.heads, arch.ff_mult, rng))
            .collect();
        let norm = LayerNorm::new(&mut params, "final_norm", arch.dim);
        let head_pos = Linear::new(&mut params, "head_pos", arch.dim, 1, rng);
        let head_out = Linear::new(&mut params, "head_out", len, code.n(), rng);
        // Start with logits near zero so the initial loss sits at ln 2.
        let w = params.get_mut(head_out.w);
        *w = w.map(|v| v * HEAD_INIT_GAIN);
        let mask = build_mask(code.h());
        Self {
            arch,
            code,
            params,
            embed,
            blocks,
            norm,
            head_pos,
            head_out,
            mask,
        }
    }

    pub fn code(&self) -> &LinearCode {
        &self.code
    }

    /// Sequence length `2N-K`.
    pub fn seq_len(&self) -> usize {
        self.code.n() + self.code.m()
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    /// Builds the graph for a batch of reliability vectors; returns
    /// `batch x N` logits.
    pub fn forward(&self, g: &mut Graph, batch: &[Vec<f64>]) -> Var {
        let mask = g.cached_mask(0, || self.mask.clone());
        self.forward_masked(g, batch, &mask)
    }

    /// [`Self::forward`] with an arbitrary attention mask.
    pub fn forward_masked(&self, g: &mut Graph, batch: &[Vec<f64>], mask: &Rc<Vec<f64>>) -> Var {
        let (b, len, n) = (batch.len(), self.seq_len(), self.code.n());
        let scales: Vec<f64> = batch
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), len, "reliability vector has the wrong length");
                embedding_scales(r, n)
            })
            .collect();
        let w = g.param(&self.params, self.embed);
        let mut x = g.row_scale(w, Rc::new(scales));
        for block in &self.blocks {
            x = block.forward(g, &self.params, x, Some(mask), b, len);
        }
        let x = self.norm.forward(g, &self.params, x);
        let per_pos = self.head_pos.forward(g, &self.params, x);
        let flat = g.reshape(per_pos, b, len);
        self.head_out.forward(g, &self.params, flat)
    }

    /// Logits for each received word.
    pub fn predict(&self, ys: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, EcctError> {
        let mut out = Vec::with_capacity(ys.len());
        for chunk in ys.chunks(256) {
            let inputs: Vec<Vec<f64>> = chunk.iter().map(|y| preprocess(y, &self.code)).collect();
            let mut g = Graph::new();
            let logits = self.forward(&mut g, &inputs);
            g.check_finite()?;
            let v = g.value(logits);
            out.extend((0..v.rows).map(|r| v.row(r).to_vec()));
        }
        Ok(out)
    }

    /// Codeword estimates for each received word.
    pub fn decode(&self, ys: &[Vec<f64>]) -> Result<Vec<Vec<u8>>, EcctError> {
        Ok(self
            .predict(ys)?
            .iter()
            .zip(ys)
            .map(|(logits, y)| postprocess_logits(y, logits))
            .collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut params = self.params.clone();
        let h = self.code.h();
        let data = (0..h.rows).flat_map(|r| h.row(r).iter().map(|&b| f64::from(b)).collect::<Vec<_>>()).collect();
        params.add("code.h", Mat::from_vec(h.rows, h.cols, data));
        Checkpoint {
            kind: "ecct".into(),
            hyper: vec![
                ("layers".into(), self.arch.layers as f64),
                ("dim".into(), self.arch.dim as f64),
                ("heads".into(), self.arch.heads as f64),
                ("ff_mult".into(), self.arch.ff_mult as f64),
            ],
            params,
            optimizer: None,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, name: &str) -> Result<Self, EcctError> {
        if ckpt.kind != "ecct" {
            return Err(EcctError::Checkpoint(format!("expected an ecct checkpoint, found {:?}", ckpt.kind)));
        }
        let arch = EcctArch {
            layers: ckpt.require("layers")? as usize,
            dim: ckpt.require("dim")? as usize,
            heads: ckpt.require("heads")? as usize,
            ff_mult: ckpt.require("ff_mult")? as usize,
        };
        let hm = ckpt
            .params
            .by_name("code.h")
            .map(|id| ckpt.params.get(id))
            .ok_or_else(|| EcctError::Checkpoint("missing code.h".into()))?;
        let mut h = BitMatrix::zeros(hm.rows, hm.cols);
        for r in 0..hm.rows {
            for c in 0..hm.cols {
                h.set(r, c, u8::from(hm.at(r, c) != 0.0));
            }
        }
        let code = LinearCode::from_parity_check(name, h)?;
        // Build the skeleton, then overwrite every tensor by name.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::new(code, arch, &mut rng);
        let ids: Vec<(ParamId, String)> = model.params.iter().map(|(id, n, _)| (id, n.to_string())).collect();
        for (id, pname) in ids {
            let src = ckpt
                .params
                .by_name(&pname)
                .ok_or_else(|| EcctError::Checkpoint(format!("missing tensor {pname}")))?;
            let value = ckpt.params.get(src);
            if value.shape() != model.params.get(id).shape() {
                return Err(EcctError::Checkpoint(format!("tensor {pname} has the wrong shape")));
            }
            *model.params.get_mut(id) = value.clone();
        }
        Ok(model)
    }
}
