//! Source coders behind one interface: predictor-driven arithmetic coding,
//! character-level Huffman and DEFLATE.

use std::io::{Read, Write};
use std::sync::Arc;

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::arith::{ac_decode, ac_encode_blocked, ArithError, EncodedBlock, DEFAULT_PRECISION};
use crate::container::{read_container, write_container, ContainerError};
use crate::corpus::BlockPlan;
use crate::huffman::{HuffmanError, HuffmanTable};
use crate::metrics::MetricError;
use crate::predictor::{PredictError, Predictor, TokenId};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Huffman(#[from] HuffmanError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Predictor(#[from] PredictError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("deflate: {0}")]
    Deflate(#[from] std::io::Error),
    #[error("decoded text differs from the input")]
    Mismatch,
}

/// Whole-text compression to bytes.
pub trait SourceCodec {
    fn name(&self) -> String;
    fn compress(&self, text: &str) -> Result<Vec<u8>, CodecError>;
    fn decompress(&self, bytes: &[u8]) -> Result<String, CodecError>;
}

/// A coder that produces independently decodable blocks.
#[derive(Clone)]
pub enum BlockCoder {
    Arithmetic { predictor: Arc<dyn Predictor>, precision: u32 },
    /// Static table; its transmission cost is not counted.
    Huffman(HuffmanTable),
}

/// Blocks recovered at the receiver, with failures replaced by nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecode {
    pub text: String,
    /// Index of every block that could not be decoded.
    pub failed: Vec<usize>,
}

impl BlockCoder {
    pub fn arithmetic(predictor: Arc<dyn Predictor>) -> Self {
        BlockCoder::Arithmetic {
            predictor,
            precision: DEFAULT_PRECISION,
        }
    }

    pub fn name(&self) -> String {
        match self {
            BlockCoder::Arithmetic { predictor, .. } => format!("ac-{}", predictor.name()),
            BlockCoder::Huffman(_) => "huffman".into(),
        }
    }

    pub fn encode_blocks(&self, text: &str, plan: &BlockPlan) -> Result<Vec<EncodedBlock>, CodecError> {
        Ok(match self {
            BlockCoder::Arithmetic { predictor, precision } => ac_encode_blocked(text, predictor.as_ref(), plan, *precision)?,
            BlockCoder::Huffman(table) => table.encode_blocked(text, plan)?,
        })
    }

    /// Decodes what arrived; `None` marks a block lost on the channel.
    /// Successful blocks are joined in order and failed ones contribute an
    /// empty string.
    pub fn decode_blocks(&self, blocks: &[Option<EncodedBlock>]) -> BlockDecode {
        let mut failed = Vec::new();
        match self {
            BlockCoder::Arithmetic { predictor, precision } => {
                let mut tokens: Vec<TokenId> = Vec::new();
                for (i, b) in blocks.iter().enumerate() {
                    match b.as_ref().map(|b| ac_decode(b, predictor.as_ref(), *precision)) {
                        Some(Ok(t)) => tokens.extend(t),
                        _ => failed.push(i),
                    }
                }
                BlockDecode {
                    text: predictor.detokenize_lossy(&tokens),
                    failed,
                }
            }
            BlockCoder::Huffman(table) => {
                let mut text = String::new();
                for (i, b) in blocks.iter().enumerate() {
                    match b.as_ref().map(|b| table.decode_block(b)) {
                        Some(Ok(s)) => text.push_str(&s),
                        _ => failed.push(i),
                    }
                }
                BlockDecode { text, failed }
            }
        }
    }
}

/// [`BlockCoder`] plus block plan, serialized with the block container.
#[derive(Clone)]
pub struct ContainerCodec {
    pub coder: BlockCoder,
    pub plan: BlockPlan,
}

impl SourceCodec for ContainerCodec {
    fn name(&self) -> String {
        self.coder.name()
    }

    fn compress(&self, text: &str) -> Result<Vec<u8>, CodecError> {
        Ok(write_container(&self.coder.encode_blocks(text, &self.plan)?)?)
    }

    fn decompress(&self, bytes: &[u8]) -> Result<String, CodecError> {
        let blocks: Vec<Option<EncodedBlock>> = read_container(bytes)?.into_iter().map(Some).collect();
        match &self.coder {
            BlockCoder::Arithmetic { predictor, precision } => {
                let mut tokens = Vec::new();
                for b in blocks.iter().flatten() {
                    tokens.extend(ac_decode(b, predictor.as_ref(), *precision)?);
                }
                Ok(predictor.detokenize(&tokens)?)
            }
            BlockCoder::Huffman(table) => {
                let mut text = String::new();
                for b in blocks.iter().flatten() {
                    text.push_str(&table.decode_block(b)?);
                }
                Ok(text)
            }
        }
    }
}

/// Raw DEFLATE at the best compression level.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeflateCodec;

impl SourceCodec for DeflateCodec {
    fn name(&self) -> String {
        "deflate".into()
    }

    fn compress(&self, text: &str) -> Result<Vec<u8>, CodecError> {
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::best());
        enc.write_all(text.as_bytes())?;
        Ok(enc.finish()?)
    }

    fn decompress(&self, bytes: &[u8]) -> Result<String, CodecError> {
        let mut s = String::new();
        DeflateDecoder::new(bytes).read_to_string(&mut s)?;
        Ok(s)
    }
}
