use std::sync::Arc;

use super::framing::{deframe_block, frame_block, framed_bits, REFERENCE_BLOCK_SIZE, REFERENCE_CODE};
use super::sim::{measure_ber, ChannelDecoder};
use super::spec::DecoderKind;
use super::PipelineError;
use crate::arith::{ac_encode_blocked, EncodedBlock, DEFAULT_PRECISION};
use crate::channel::{effective_snr, frame_rng, sigma_from_snr, snr_from_sigma, transmit, ChannelModel, SnrConfig};
use crate::codec::{BlockCoder, ContainerCodec, DeflateCodec, SourceCodec};
use crate::corpus::BlockPlan;
use crate::ecct::EcctModel;
use crate::gf2::{builtin, LinearCode};
use crate::huffman::HuffmanTable;
use crate::metrics::{bleu, compression_rate};
use crate::predictor::Predictor;

/// Everything one end-to-end sweep needs, fully loaded.
#[derive(Clone)]
pub struct Experiment {
    pub name: String,
    /// Source text `s`.
    pub text: String,
    pub coder: BlockCoder,
    pub code: LinearCode,
    pub decoder: DecoderKind,
    /// Required when `decoder` is [`DecoderKind::Ecct`].
    pub ecct: Option<Arc<EcctModel>>,
    pub channel: ChannelModel,
    pub genie_csi: bool,
    pub plan: BlockPlan,
    /// Channel bits of the reference transmission of `text`.
    pub num_unified: usize,
    pub bitflip_iters: usize,
    pub bp_iters: usize,
}

/// One `(snr_unified, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub experiment: String,
    pub snr_unified_db: f64,
    pub channel: String,
    pub coder: String,
    pub decoder: String,
    pub block_size: usize,
    /// Message-bit error rate after channel decoding, headers and padding
    /// included.
    pub ber: f64,
    pub bleu: [f64; 4],
    /// Source-coded bits (headers included) over `8 * chars`.
    pub rate: f64,
    /// Channel bits sent, `Num`.
    pub num_bits: usize,
    pub num_unified: usize,
    pub seed: u64,
    pub effective_snr_db: f64,
    pub sigma: f64,
    pub blocks: usize,
    pub failed_blocks: Vec<usize>,
    /// Set when a stage failed; the metrics are then NaN.
    pub error: Option<String>,
}

impl Experiment {
    pub fn channel_decoder(&self) -> Result<ChannelDecoder<'_>, PipelineError> {
        Ok(match self.decoder {
            DecoderKind::Uncoded => ChannelDecoder::Uncoded,
            DecoderKind::Bitflip => ChannelDecoder::BitFlip {
                max_iters: self.bitflip_iters,
            },
            DecoderKind::Bp => ChannelDecoder::SumProduct {
                max_iters: self.bp_iters,
                genie_csi: self.genie_csi,
            },
            DecoderKind::Ecct => ChannelDecoder::Ecct(
                self.ecct
                    .as_deref()
                    .ok_or_else(|| PipelineError::Spec("the ECCT decoder needs a model".into()))?,
            ),
        })
    }

    fn decoder_name(&self) -> &'static str {
        match self.decoder {
            DecoderKind::Uncoded => "uncoded",
            DecoderKind::Bitflip => "bitflip",
            DecoderKind::Bp => "bp",
            DecoderKind::Ecct => "ecct",
        }
    }

    /// Every grid point for every seed. A failing run becomes a row with
    /// `error` set and the sweep continues.
    pub fn run(&self, snrs: &[f64], seeds: &[u64]) -> Vec<RunRow> {
        let mut rows = Vec::with_capacity(snrs.len() * seeds.len());
        for &snr in snrs {
            for &seed in seeds {
                rows.push(self.run_point(snr, seed).unwrap_or_else(|e| self.failed_row(snr, seed, e)));
            }
        }
        rows
    }

    fn failed_row(&self, snr: f64, seed: u64, e: PipelineError) -> RunRow {
        RunRow {
            experiment: self.name.clone(),
            snr_unified_db: snr,
            channel: self.channel.kind.as_str().into(),
            coder: self.coder.name(),
            decoder: self.decoder_name().into(),
            block_size: self.plan.block_size,
            ber: f64::NAN,
            bleu: [f64::NAN; 4],
            rate: f64::NAN,
            num_bits: 0,
            num_unified: self.num_unified,
            seed,
            effective_snr_db: f64::NAN,
            sigma: f64::NAN,
            blocks: 0,
            failed_blocks: Vec::new(),
            error: Some(e.to_string()),
        }
    }

    /// Channel bits this experiment sends for its text.
    pub fn num_bits(&self) -> Result<usize, PipelineError> {
        let blocks = self.coder.encode_blocks(&self.text, &self.plan)?;
        Ok(framed_bits(&blocks, self.code.n(), self.code.k()))
    }

    /// Runs the whole chain once.
    pub fn run_point(&self, snr_unified_db: f64, seed: u64) -> Result<RunRow, PipelineError> {
        self.run_point_with(snr_unified_db, seed, &[])
    }

    /// Like [`Experiment::run_point`], but the blocks listed in `force_fail`
    /// are dropped at the receiver regardless of what the decoder says.
    pub fn run_point_with(&self, snr_unified_db: f64, seed: u64, force_fail: &[usize]) -> Result<RunRow, PipelineError> {
        let (n, k) = (self.code.n(), self.code.k());
        let blocks = self.coder.encode_blocks(&self.text, &self.plan)?;
        let framed: Vec<Vec<u8>> = blocks.iter().map(|b| frame_block(b, k)).collect();
        let num_bits: usize = framed.iter().map(|f| f.len() / k * n).sum();
        let effective_snr_db = effective_snr(&SnrConfig {
            snr_unified_db,
            num_unified: self.num_unified as f64,
            num: num_bits as f64,
            float_based: false,
        });
        let sigma = sigma_from_snr(effective_snr_db);

        let mut frames = Vec::new();
        for msg in framed.iter().flat_map(|f| f.chunks(k)) {
            let mut rng = frame_rng(seed, frames.len() as u64);
            frames.push(transmit(&self.code.encode(msg)?, &self.channel, sigma, &mut rng));
        }
        let decisions = self.channel_decoder()?.decode(&self.code, &frames, sigma)?;

        let mut received: Vec<Option<EncodedBlock>> = Vec::with_capacity(blocks.len());
        let mut failed = Vec::new();
        let (mut errors, mut total) = (0usize, 0usize);
        let mut next = 0;
        for (i, sent) in framed.iter().enumerate() {
            let count = sent.len() / k;
            let group = &decisions[next..next + count];
            next += count;
            let bits: Vec<u8> = group.iter().flat_map(|d| d.message.iter().copied()).collect();
            errors += bits.iter().zip(sent).filter(|(a, b)| a != b).count();
            total += bits.len();
            let ok = group.iter().all(|d| d.ok) && !force_fail.contains(&i);
            received.push(if ok { deframe_block(&bits) } else { None });
        }
        let decoded = self.coder.decode_blocks(&received);
        failed.extend(decoded.failed.iter().copied());

        let source_bits: usize = blocks
            .iter()
            .map(|b| BlockPlan::COUNT_BITS as usize + b.payload.len())
            .sum();
        let chars = self.text.chars().count();
        let scores = bleu(&decoded.text, &self.text, 4, false)?;
        Ok(RunRow {
            experiment: self.name.clone(),
            snr_unified_db,
            channel: self.channel.kind.as_str().into(),
            coder: self.coder.name(),
            decoder: self.decoder_name().into(),
            block_size: self.plan.block_size,
            ber: errors as f64 / total as f64,
            bleu: scores.bleu,
            rate: source_bits as f64 / (8 * chars) as f64,
            num_bits,
            num_unified: self.num_unified,
            seed,
            effective_snr_db,
            sigma,
            blocks: blocks.len(),
            failed_blocks: failed,
            error: None,
        })
    }
}

/// Channel bits of the reference transmission: arithmetic coding with
/// `predictor` in blocks of 64 tokens, framed on LDPC(49,24).
pub fn reference_num_bits(text: &str, predictor: &dyn Predictor) -> Result<usize, PipelineError> {
    let code = builtin(REFERENCE_CODE)?;
    let blocks = ac_encode_blocked(text, predictor, &BlockPlan::new(REFERENCE_BLOCK_SIZE), DEFAULT_PRECISION)
        .map_err(crate::codec::CodecError::from)?;
    Ok(framed_bits(&blocks, code.n(), code.k()))
}

/// Gap in dB between the SNR implied by a row's bit counts and the SNR of
/// the noise deviation it used.
pub fn audit_energy(row: &RunRow) -> f64 {
    let expected = effective_snr(&SnrConfig {
        snr_unified_db: row.snr_unified_db,
        num_unified: row.num_unified as f64,
        num: row.num_bits as f64,
        float_based: false,
    });
    (expected - snr_from_sigma(row.sigma)).abs()
}

/// The end-to-end sweep repeated for each block size.
pub fn table3(base: &Experiment, block_sizes: &[usize], snrs: &[f64], seeds: &[u64]) -> Vec<RunRow> {
    block_sizes
        .iter()
        .flat_map(|&b| {
            let mut exp = base.clone();
            exp.plan = BlockPlan::new(b);
            exp.run(snrs, seeds)
        })
        .collect()
}

/// Bit error rate of one code and decoder at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub code: String,
    pub rate: f64,
    pub decoder: String,
    pub snr_unified_db: f64,
    /// Channel SNR after crediting the code's rate against the reference.
    pub channel_snr_db: f64,
    pub ber: f64,
    pub bits: usize,
}

/// BER of every `(code, decoders)` pair on shared seeds. `decoders_for`
/// returns the decoders to compare on a code; an ECCT entry must hold a
/// model trained for that code.
///
/// `snrs` are unified SNRs: every code carries the same message bits as the
/// reference LDPC(49,24) transmission, so a code of rate `R` runs at
/// `snr + 10 log10(R / R_ref)`.
pub fn sweep_code_rate<'a>(
    codes: &'a [LinearCode],
    mut decoders_for: impl FnMut(&'a LinearCode) -> Vec<ChannelDecoder<'a>>,
    channel: &ChannelModel,
    snrs: &[f64],
    seed: u64,
    min_bits: usize,
) -> Result<Vec<RateRow>, PipelineError> {
    let reference = builtin(REFERENCE_CODE)?;
    let mut rows = Vec::new();
    for code in codes {
        let decoders = decoders_for(code);
        let frames = min_bits.div_ceil(code.k());
        for &snr in snrs {
            let channel_snr_db = effective_snr(&SnrConfig {
                snr_unified_db: snr,
                num_unified: reference.n() as f64 / reference.k() as f64,
                num: code.n() as f64 / code.k() as f64,
                float_based: false,
            });
            for run in measure_ber(code, &decoders, channel, channel_snr_db, seed, frames)? {
                rows.push(RateRow {
                    code: code.name.clone(),
                    rate: code.rate(),
                    decoder: run.decoder.clone(),
                    snr_unified_db: snr,
                    channel_snr_db,
                    ber: run.ber(),
                    bits: run.bits,
                });
            }
        }
    }
    Ok(rows)
}

/// Compression rate of one source codec.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionRow {
    pub codec: String,
    pub output_bits: usize,
    pub rate: f64,
}

/// Huffman, DEFLATE and arithmetic coding with each predictor, compared on
/// `text` coded as one block.
pub fn fig7(text: &str, predictors: &[Arc<dyn Predictor>]) -> Result<Vec<CompressionRow>, PipelineError> {
    let plan = BlockPlan::whole();
    let mut codecs: Vec<Box<dyn SourceCodec>> = vec![
        Box::new(ContainerCodec {
            coder: BlockCoder::Huffman(HuffmanTable::from_text(text).map_err(crate::codec::CodecError::from)?),
            plan,
        }),
        Box::new(DeflateCodec),
    ];
    for p in predictors {
        codecs.push(Box::new(ContainerCodec {
            coder: BlockCoder::arithmetic(p.clone()),
            plan,
        }));
    }
    codecs
        .iter()
        .map(|c| {
            let r = compression_rate(text, c.as_ref())?;
            Ok(CompressionRow {
                codec: c.name(),
                output_bits: r.output_bits,
                rate: r.rate,
            })
        })
        .collect()
}

/// Median of `values`; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
