use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::run::{reference_num_bits, Experiment};
use super::PipelineError;
use crate::channel::{ChannelKind, ChannelModel, Fading};
use crate::codec::BlockCoder;
use crate::corpus::{builtin_corpus, join_records, load_corpus, BlockPlan};
use crate::ecct::{train, EcctArch, EcctModel, TrainConfig};
use crate::gf2::{LinearCode, DEFAULT_BITFLIP_ITERS, DEFAULT_BP_ITERS};
use crate::huffman::HuffmanTable;
use crate::nn::Checkpoint;
use crate::predictor::{train_ngram, AdaptiveNgram, Dictionary, Predictor, RemotePredictor, TinyLm, UniformPredictor};

/// Token alphabet of a built-in predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    /// All 256 byte values.
    #[default]
    Bytes,
    /// The characters occurring in the training and source texts.
    Text,
}

/// Source model behind the arithmetic coder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PredictorSpec {
    Uniform,
    /// Counts come from the block being coded; no training.
    Adaptive {
        order: usize,
        #[serde(default)]
        alphabet: Alphabet,
    },
    /// Frozen counts from `train_corpus`, or the built-in corpus.
    Ngram {
        order: usize,
        #[serde(default)]
        train_corpus: Option<PathBuf>,
        #[serde(default)]
        alphabet: Alphabet,
    },
    TinyLm { model: PathBuf },
    /// Address defaults to the `SSCC_PREDICTOR_ADDR` environment variable.
    Remote {
        #[serde(default)]
        addr: Option<String>,
    },
}

impl Default for PredictorSpec {
    fn default() -> Self {
        PredictorSpec::Ngram {
            order: 3,
            train_corpus: None,
            alphabet: Alphabet::Text,
        }
    }
}

impl PredictorSpec {
    /// Builds the predictor for coding `source`, which a text alphabet must
    /// cover.
    pub fn build(&self, source: &str) -> Result<Arc<dyn Predictor>, PipelineError> {
        Ok(match self {
            PredictorSpec::Uniform => Arc::new(UniformPredictor::new(Dictionary::Bytes)),
            PredictorSpec::Adaptive { order, alphabet } => {
                let dict = match alphabet {
                    Alphabet::Bytes => Dictionary::Bytes,
                    Alphabet::Text => Dictionary::chars_of(source),
                };
                Arc::new(AdaptiveNgram::new(dict, *order)?)
            }
            PredictorSpec::Ngram {
                order,
                train_corpus,
                alphabet,
            } => {
                let records = match train_corpus {
                    Some(p) => load_corpus(p, None)?,
                    None => builtin_corpus(None),
                };
                let dict = match alphabet {
                    Alphabet::Bytes => Dictionary::Bytes,
                    Alphabet::Text => Dictionary::chars_of(&format!("{}{source}", join_records(&records))),
                };
                Arc::new(train_ngram(&records, *order, dict)?)
            }
            PredictorSpec::TinyLm { model } => Arc::new(TinyLm::load(fs::File::open(model)?)?),
            PredictorSpec::Remote { addr } => Arc::new(match addr {
                Some(a) => RemotePredictor::connect(a.as_str())?,
                None => RemotePredictor::from_env()?,
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoderKind {
    #[default]
    Arithmetic,
    Huffman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Uncoded,
    Bitflip,
    #[default]
    Bp,
    Ecct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Ci,
    Full,
}

impl Profile {
    pub fn arch(self) -> EcctArch {
        match self {
            Profile::Ci => EcctArch::ci(),
            Profile::Full => EcctArch::full(),
        }
    }

    pub fn train_config(self, channel: ChannelModel) -> TrainConfig {
        match self {
            Profile::Ci => TrainConfig::ci(channel),
            Profile::Full => TrainConfig::full(channel),
        }
    }

    /// Trains a fresh ECCT for `code`; `steps` overrides the profile's count.
    pub fn train(
        self,
        code: &LinearCode,
        channel: ChannelModel,
        steps: Option<usize>,
        seed: u64,
        on_step: impl FnMut(usize, f64),
    ) -> Result<EcctModel, PipelineError> {
        let mut cfg = self.train_config(channel);
        if let Some(steps) = steps {
            cfg.steps = steps;
        }
        cfg.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = EcctModel::new(code.clone(), self.arch(), &mut rng);
        train(&mut model, &cfg, on_step)?;
        Ok(model)
    }
}

/// Where the ECCT decoder comes from: a checkpoint, or training before the
/// sweep.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcctSpec {
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub profile: Profile,
    /// Overrides the profile's step count when training.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_code() -> String {
    "ldpc_49_24".into()
}

fn default_block_size() -> usize {
    64
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_channel() -> ChannelKind {
    ChannelKind::Awgn
}

/// A TOML experiment description. Only `name` and `snr_unified_db` are
/// required.
///
/// ```toml
/// name = "bp-awgn"
/// code = "ldpc_49_24"          # built-in name or .alist path
/// decoder = "bp"               # uncoded | bitflip | bp | ecct
/// channel = "awgn"             # awgn | rayleigh
/// block_size = 64
/// snr_unified_db = [0.0, 2.0, 4.0]
/// seeds = [1, 2, 3]
/// output = "results/bp-awgn"   # CSV and SVG plots land here
///
/// [predictor]
/// kind = "ngram"               # uniform | adaptive | ngram | tiny-lm | remote
/// order = 3
/// alphabet = "text"            # bytes | text
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Newline-delimited source text; the built-in corpus when absent.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Number of records to use.
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default)]
    pub predictor: PredictorSpec,
    #[serde(default)]
    pub coder: CoderKind,
    #[serde(default = "default_code")]
    pub code: String,
    #[serde(default)]
    pub decoder: DecoderKind,
    #[serde(default)]
    pub ecct: EcctSpec,
    #[serde(default = "default_channel")]
    pub channel: ChannelKind,
    #[serde(default)]
    pub fading: Fading,
    /// Give the sum-product decoder the fading coefficients.
    #[serde(default)]
    pub genie_csi: bool,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    pub snr_unified_db: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Reference bit count; computed from the source text when absent.
    #[serde(default)]
    pub num_unified: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.snr_unified_db.is_empty() {
            return Err(PipelineError::Spec("snr_unified_db must list at least one point".into()));
        }
        if self.seeds.is_empty() {
            return Err(PipelineError::Spec("seeds must list at least one seed".into()));
        }
        if self.block_size == 0 || self.block_size > u16::MAX as usize {
            return Err(PipelineError::Spec(format!("block_size {} is out of range", self.block_size)));
        }
        if self.snr_unified_db.iter().any(|s| s.is_nan()) {
            return Err(PipelineError::Spec("snr_unified_db contains NaN".into()));
        }
        Ok(())
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            kind: self.channel,
            fading: self.fading,
        }
    }

    /// Loads every resource and, for an ECCT decoder without a checkpoint,
    /// trains one. `on_step` sees the training loss.
    pub fn prepare(&self, on_step: impl FnMut(usize, f64)) -> Result<Experiment, PipelineError> {
        self.validate()?;
        let records = match &self.corpus {
            Some(p) => load_corpus(p, self.limit)?,
            None => builtin_corpus(self.limit),
        };
        let text = join_records(&records);
        if text.is_empty() {
            return Err(PipelineError::Spec("the source text is empty".into()));
        }
        let predictor = self.predictor.build(&text)?;
        let coder = match self.coder {
            CoderKind::Arithmetic => BlockCoder::arithmetic(predictor.clone()),
            CoderKind::Huffman => BlockCoder::Huffman(HuffmanTable::from_text(&text).map_err(crate::codec::CodecError::from)?),
        };
        let code = LinearCode::resolve(&self.code)?;
        let num_unified = match self.num_unified {
            Some(n) => n,
            None => reference_num_bits(&text, predictor.as_ref())?,
        };
        let ecct = match self.decoder {
            DecoderKind::Ecct => Some(Arc::new(self.load_or_train_ecct(&code, on_step)?)),
            _ => None,
        };
        Ok(Experiment {
            name: self.name.clone(),
            text,
            coder,
            code,
            decoder: self.decoder,
            ecct,
            channel: self.channel_model(),
            genie_csi: self.genie_csi,
            plan: BlockPlan::new(self.block_size),
            num_unified,
            bitflip_iters: DEFAULT_BITFLIP_ITERS,
            bp_iters: DEFAULT_BP_ITERS,
        })
    }

    fn load_or_train_ecct(&self, code: &LinearCode, on_step: impl FnMut(usize, f64)) -> Result<EcctModel, PipelineError> {
        if let Some(path) = &self.ecct.checkpoint {
            let ckpt = Checkpoint::read(fs::File::open(path)?).map_err(crate::ecct::EcctError::from)?;
            return Ok(EcctModel::from_checkpoint(&ckpt, &code.name)?);
        }
        self.ecct
            .profile
            .train(code, self.channel_model(), self.ecct.steps, self.ecct.seed, on_step)
    }
}
