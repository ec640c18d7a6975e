//! End-to-end experiments: source coding, channel coding, the channel,
//! channel decoding and source decoding, swept over SNR and seeds.
//!
//! Every source block travels as its own group of codewords: a 16-bit token
//! count, the payload bits, then zeros up to a multiple of `K`. The receiver
//! knows where each group starts; it does not know the payload length, so
//! the decoders read the zero padding as part of the payload.

mod framing;
mod report;
mod run;
mod sim;
mod spec;

use std::io;

use thiserror::Error;

pub use framing::{deframe_block, frame_block, framed_bits, REFERENCE_BLOCK_SIZE, REFERENCE_CODE};
pub use report::{plot_svg, read_csv, write_csv, write_report, CsvRow, CSV_COLUMNS};
pub use run::{
    audit_energy, fig7, median, reference_num_bits, sweep_code_rate, table3, CompressionRow, Experiment, RateRow, RunRow,
};
pub use sim::{measure_ber, BerRun, ChannelDecoder, FrameDecision};
pub use spec::{Alphabet, CoderKind, DecoderKind, EcctSpec, ExperimentSpec, PredictorSpec, Profile};

use crate::codec::CodecError;
use crate::corpus::CorpusError;
use crate::ecct::EcctError;
use crate::gf2::CodeError;
use crate::metrics::MetricError;
use crate::predictor::PredictError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("cannot parse experiment spec: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Ecct(#[from] EcctError),
    #[error(transparent)]
    Predictor(#[from] PredictError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}
