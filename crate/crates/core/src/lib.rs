//! Separate source and channel coding of text: predictor-driven arithmetic
//! coding, GF(2) channel codes, BPSK channels, a transformer decoder and the
//! pipeline that ties them together. The guide in `book/` walks through each
//! part.

pub mod arith;
pub mod bits;
pub mod channel;
pub mod codec;
pub mod container;
pub mod corpus;
pub mod ecct;
pub mod gf2;
pub mod huffman;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod predictor;

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/arithmetic-coding.md")]
    mod arithmetic_coding {}
    #[doc = include_str!("../../../book/src/huffman-and-metrics.md")]
    mod huffman_and_metrics {}
    #[doc = include_str!("../../../book/src/linear-codes.md")]
    mod linear_codes {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/ecct.md")]
    mod ecct {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
