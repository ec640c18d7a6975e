//! A minimal reverse-mode autodiff engine with just the layers the ECCT
//! decoder and the tiny language model need.
//!
//! Everything is `f64`. Models are small enough that double precision costs
//! little, and it keeps finite-difference gradient checks meaningful.

mod adam;
mod checkpoint;
mod graph;
mod layers;
mod mat;
mod params;

use thiserror::Error;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use graph::{AttnMask, AttnShape, Graph, Var};
pub use layers::{LayerNorm, Linear, TransformerBlock};
pub use mat::{gemm, matmul, Mat};
pub use params::{ParamId, Params};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("non-finite value produced by {op} (node {node})")]
    NonFinite { node: usize, op: &'static str },
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Additive causal mask: position `i` may attend to `j <= i`.
pub fn causal_mask(seq: usize) -> Vec<f64> {
    let mut m = vec![0.0; seq * seq];
    for i in 0..seq {
        for j in i + 1..seq {
            m[i * seq + j] = f64::NEG_INFINITY;
        }
    }
    m
}
