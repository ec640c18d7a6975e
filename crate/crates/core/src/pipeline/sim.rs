use rand::Rng;

use super::PipelineError;
use crate::channel::{frame_rng, sigma_from_snr, transmit, ChannelFrame, ChannelModel};
use crate::ecct::EcctModel;
use crate::gf2::{LinearCode, LLR_CLIP};

/// Receiver-side channel decoder.
#[derive(Clone, Copy)]
pub enum ChannelDecoder<'a> {
    /// Hard decisions, no correction.
    Uncoded,
    BitFlip { max_iters: usize },
    SumProduct { max_iters: usize, genie_csi: bool },
    Ecct(&'a EcctModel),
}

/// One decoded codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecision {
    pub codeword: Vec<u8>,
    pub message: Vec<u8>,
    /// The decoder believes the result: it converged or satisfies every
    /// check. Always true for [`ChannelDecoder::Uncoded`].
    pub ok: bool,
}

impl ChannelDecoder<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelDecoder::Uncoded => "uncoded",
            ChannelDecoder::BitFlip { .. } => "bitflip",
            ChannelDecoder::SumProduct { .. } => "bp",
            ChannelDecoder::Ecct(_) => "ecct",
        }
    }

    /// Decodes every frame. `sigma` is the noise deviation the frames were
    /// generated with; only the sum-product decoder uses it.
    pub fn decode(
        &self,
        code: &LinearCode,
        frames: &[ChannelFrame],
        sigma: f64,
    ) -> Result<Vec<FrameDecision>, PipelineError> {
        let decide = |codeword: Vec<u8>, ok: bool| FrameDecision {
            message: code.extract_message(&codeword),
            codeword,
            ok,
        };
        match *self {
            ChannelDecoder::Uncoded => Ok(frames.iter().map(|f| decide(f.hard(), true)).collect()),
            ChannelDecoder::BitFlip { max_iters } => frames
                .iter()
                .map(|f| {
                    let out = code.decode_bitflip(&f.hard(), max_iters)?;
                    Ok(decide(out.codeword, out.converged))
                })
                .collect(),
            ChannelDecoder::SumProduct { max_iters, genie_csi } => frames
                .iter()
                .map(|f| {
                    // A noiseless channel gives infinite LLRs.
                    let llrs: Vec<f64> = f
                        .llrs(sigma, genie_csi)
                        .iter()
                        .map(|l| if l.is_nan() { 0.0 } else { l.clamp(-LLR_CLIP, LLR_CLIP) })
                        .collect();
                    let out = code.decode_sumproduct(&llrs, max_iters)?;
                    Ok(decide(out.codeword, out.converged))
                })
                .collect(),
            ChannelDecoder::Ecct(model) => {
                if model.code().h() != code.h() {
                    return Err(PipelineError::Spec(format!(
                        "ECCT model was trained for {}, not {}",
                        model.code().name,
                        code.name
                    )));
                }
                let ys: Vec<Vec<f64>> = frames.iter().map(|f| f.y.clone()).collect();
                Ok(model
                    .decode(&ys)?
                    .into_iter()
                    .map(|cw| {
                        let ok = code.is_codeword(&cw);
                        decide(cw, ok)
                    })
                    .collect())
            }
        }
    }
}

/// Message-bit error counts of one decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRun {
    pub decoder: String,
    pub bit_errors: usize,
    pub bits: usize,
    pub frame_errors: usize,
    pub frames: usize,
}

impl BerRun {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }
}

/// Sends `frames` random messages at `snr_db` and decodes the same received
/// words with every decoder in `decoders`.
///
/// Frame `i` draws its message and noise from `frame_rng(seed, i)`, so runs
/// with equal seeds see identical channel realizations.
pub fn measure_ber(
    code: &LinearCode,
    decoders: &[ChannelDecoder<'_>],
    channel: &ChannelModel,
    snr_db: f64,
    seed: u64,
    frames: usize,
) -> Result<Vec<BerRun>, PipelineError> {
    let sigma = sigma_from_snr(snr_db);
    let mut messages = Vec::with_capacity(frames);
    let mut received = Vec::with_capacity(frames);
    for i in 0..frames {
        let mut rng = frame_rng(seed, i as u64);
        let m: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        received.push(transmit(&code.encode(&m)?, channel, sigma, &mut rng));
        messages.push(m);
    }
    decoders
        .iter()
        .map(|d| {
            let decisions = d.decode(code, &received, sigma)?;
            let mut run = BerRun {
                decoder: d.name().to_string(),
                bit_errors: 0,
                bits: frames * code.k(),
                frame_errors: 0,
                frames,
            };
            for (dec, m) in decisions.iter().zip(&messages) {
                let e = dec.message.iter().zip(m).filter(|(a, b)| a != b).count();
                run.bit_errors += e;
                run.frame_errors += usize::from(e > 0);
            }
            Ok(run)
        })
        .collect()
}
