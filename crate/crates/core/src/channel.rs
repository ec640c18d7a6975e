//! BPSK over AWGN and Rayleigh channels, plus energy-fair SNR accounting.
//!
//! Every transmitted symbol has unit energy and `N0 = 2 sigma^2`, so an SNR
//! of `s` dB per channel bit gives `sigma = sqrt(0.5 * 10^(-s/10))`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Extra energy, in dB, charged to systems that send 16-bit floats instead
/// of bits: `10 log10(16)`.
pub fn float_penalty_db() -> f64 {
    10.0 * 16f64.log10()
}

/// `0 -> +1`, `1 -> -1`.
pub fn bin_to_sign(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b & 1 == 0 { 1.0 } else { -1.0 }).collect()
}

/// Negative values map to 1, everything else (including exact zero) to 0.
pub fn sign_to_bin(values: &[f64]) -> Vec<u8> {
    values.iter().map(|&v| u8::from(v < 0.0)).collect()
}

pub fn sigma_from_snr(snr_db: f64) -> f64 {
    (0.5 * 10f64.powf(-snr_db / 10.0)).sqrt()
}

/// Inverse of [`sigma_from_snr`].
pub fn snr_from_sigma(sigma: f64) -> f64 {
    -10.0 * (2.0 * sigma * sigma).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrConfig {
    pub snr_unified_db: f64,
    /// Bits sent by the reference transmission of the same text.
    pub num_unified: f64,
    /// Bits (or float symbols) this system actually sends.
    pub num: f64,
    pub float_based: bool,
}

/// Per-bit SNR a system may use when its total energy matches the reference
/// transmission at `snr_unified_db`.
pub fn effective_snr(cfg: &SnrConfig) -> f64 {
    let penalty = if cfg.float_based { float_penalty_db() } else { 0.0 };
    cfg.snr_unified_db + 10.0 * (cfg.num_unified / cfg.num).log10() + penalty
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

impl ChannelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
        }
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            _ => Err(format!("unknown channel {s:?} (expected awgn or rayleigh)")),
        }
    }
}

/// How often the Rayleigh coefficient is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fading {
    /// One coefficient per codeword.
    #[default]
    Block,
    PerSymbol,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    #[serde(default)]
    pub fading: Fading,
}

impl ChannelModel {
    pub fn awgn() -> Self {
        Self {
            kind: ChannelKind::Awgn,
            fading: Fading::Block,
        }
    }

    pub fn rayleigh() -> Self {
        Self {
            kind: ChannelKind::Rayleigh,
            fading: Fading::Block,
        }
    }
}

/// One codeword's trip through the channel: `y = h x_s + z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrame {
    pub x_s: Vec<f64>,
    /// Fading coefficient per symbol (all ones on AWGN).
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl ChannelFrame {
    /// Hard decisions `sign_to_bin(y)`.
    pub fn hard(&self) -> Vec<u8> {
        sign_to_bin(&self.y)
    }

    /// Multiplicative noise `h + x_s z`, so that `y = x_s * z_tilde`.
    pub fn z_tilde(&self) -> Vec<f64> {
        self.h.iter().zip(&self.x_s).zip(&self.z).map(|((h, x), z)| h + x * z).collect()
    }

    /// Channel LLRs `2 y / sigma^2`, scaled by `h` when the receiver is
    /// given the fading coefficients.
    pub fn llrs(&self, sigma: f64, genie_csi: bool) -> Vec<f64> {
        let s2 = sigma * sigma;
        self.y
            .iter()
            .zip(&self.h)
            .map(|(&y, &h)| 2.0 * y * if genie_csi { h } else { 1.0 } / s2)
            .collect()
    }
}

/// Rayleigh amplitude with `E[h^2] = 1`.
pub fn rayleigh_sample(rng: &mut impl Rng) -> f64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (a * a + b * b).sqrt() / std::f64::consts::SQRT_2
}

/// Sends `codeword` through `model` with noise deviation `sigma`.
pub fn transmit(codeword: &[u8], model: &ChannelModel, sigma: f64, rng: &mut impl Rng) -> ChannelFrame {
    let x_s = bin_to_sign(codeword);
    let n = x_s.len();
    let h = match (model.kind, model.fading) {
        (ChannelKind::Awgn, _) => vec![1.0; n],
        (ChannelKind::Rayleigh, Fading::Block) => vec![rayleigh_sample(rng); n],
        (ChannelKind::Rayleigh, Fading::PerSymbol) => (0..n).map(|_| rayleigh_sample(rng)).collect(),
    };
    let z: Vec<f64> = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    let y = h.iter().zip(&x_s).zip(&z).map(|((h, x), z)| h * x + z).collect();
    ChannelFrame { x_s, h, z, y }
}

/// Independent, reproducible RNG stream for frame `index` of run `seed`.
///
/// Decoders compared on the same `(seed, index)` see identical noise.
pub fn frame_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
