use rand::Rng;

use super::graph::{AttnMask, AttnShape, Graph, Var};
use super::mat::Mat;
use super::params::{ParamId, Params};

/// `y = x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    /// Registers `prefix.w` and `prefix.b` with scaled-normal weights.
    pub fn new(params: &mut Params, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let std = (1.0 / fan_in as f64).sqrt();
        Self {
            w: params.add(format!("{prefix}.w"), Mat::randn(fan_in, fan_out, std, rng)),
            b: params.add(format!("{prefix}.b"), Mat::zeros(1, fan_out)),
        }
    }

    pub fn forward(&self, g: &mut Graph, params: &Params, x: Var) -> Var {
        let w = g.param(params, self.w);
        let b = g.param(params, self.b);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(params: &mut Params, prefix: &str, dim: usize) -> Self {
        Self {
            gamma: params.add(format!("{prefix}.gamma"), Mat::filled(1, dim, 1.0)),
            beta: params.add(format!("{prefix}.beta"), Mat::zeros(1, dim)),
        }
    }

    pub fn forward(&self, g: &mut Graph, params: &Params, x: Var) -> Var {
        let gamma = g.param(params, self.gamma);
        let beta = g.param(params, self.beta);
        g.layer_norm(x, gamma, beta)
    }
}

/// One pre-norm transformer block: masked multi-head self-attention and a
/// GELU feed-forward network, each wrapped in a residual connection.
#[derive(Debug, Clone, Copy)]
pub struct TransformerBlock {
    pub norm_attn: LayerNorm,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub norm_ff: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
    pub heads: usize,
}

impl TransformerBlock {
    pub fn new(params: &mut Params, prefix: &str, dim: usize, heads: usize, ff_mult: usize, rng: &mut impl Rng) -> Self {
        assert_eq!(dim % heads, 0, "embedding width must be divisible by heads");
        Self {
            norm_attn: LayerNorm::new(params, &format!("{prefix}.ln1"), dim),
            query: Linear::new(params, &format!("{prefix}.q"), dim, dim, rng),
            key: Linear::new(params, &format!("{prefix}.k"), dim, dim, rng),
            value: Linear::new(params, &format!("{prefix}.v"), dim, dim, rng),
            out: Linear::new(params, &format!("{prefix}.o"), dim, dim, rng),
            norm_ff: LayerNorm::new(params, &format!("{prefix}.ln2"), dim),
            ff_in: Linear::new(params, &format!("{prefix}.ff1"), dim, ff_mult * dim, rng),
            ff_out: Linear::new(params, &format!("{prefix}.ff2"), ff_mult * dim, dim, rng),
            heads,
        }
    }

    /// `x` holds `batch * seq` rows.
    pub fn forward(&self, g: &mut Graph, params: &Params, x: Var, mask: Option<&AttnMask>, batch: usize, seq: usize) -> Var {
        let h = self.norm_attn.forward(g, params, x);
        let q = self.query.forward(g, params, h);
        let k = self.key.forward(g, params, h);
        let v = self.value.forward(g, params, h);
        let a = g.attention(
            q,
            k,
            v,
            mask,
            AttnShape {
                batch,
                seq,
                heads: self.heads,
            },
        );
        let a = self.out.forward(g, params, a);
        let x = g.add(x, a);
        let h = self.norm_ff.forward(g, params, x);
        let h = self.ff_in.forward(g, params, h);
        let h = g.gelu(h);
        let h = self.ff_out.forward(g, params, h);
        g.add(x, h)
    }
}
