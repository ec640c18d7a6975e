//! `sscc`: command-line front end for the SSCC laboratory.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sscc::channel::{ChannelKind, ChannelModel, Fading};
use sscc::codec::{BlockCoder, ContainerCodec, SourceCodec};
use sscc::corpus::{builtin_corpus, join_records, load_corpus, BlockPlan};
use sscc::ecct::EcctModel;
use sscc::gf2::{LinearCode, DEFAULT_BITFLIP_ITERS, DEFAULT_BP_ITERS};
use sscc::nn::Checkpoint;
use sscc::pipeline::{
    fig7, sweep_code_rate, table3, write_csv, write_report, Alphabet, ChannelDecoder, CsvRow, ExperimentSpec,
    PredictorSpec, Profile, RunRow,
};
use sscc::predictor::Predictor;

#[derive(Parser)]
#[command(name = "sscc", version, about = "Semantic source and channel coding laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress text into the block container format.
    Compress(CodecArgs),
    /// Invert `compress`; needs the same predictor flags.
    Decompress(CodecArgs),
    /// Run an experiment described by a TOML spec.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Repeat a spec's sweep for several block sizes.
    Table3 {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
        block_sizes: Vec<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Bit error rate of several codes and decoders on shared noise.
    SweepRate(SweepArgs),
    /// Compression rate of Huffman, DEFLATE and arithmetic coding.
    Fig7 {
        /// Newline-delimited text; the built-in corpus when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// N-gram orders to compare, trained on the input itself.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        orders: Vec<usize>,
    },
    /// Train an ECCT decoder and write its checkpoint.
    TrainEcct {
        /// Built-in code name or .alist path.
        #[arg(long, default_value = "ldpc_49_24")]
        code: String,
        #[arg(long, value_enum, default_value_t = ChannelArg::Awgn)]
        channel: ChannelArg,
        /// Defaults to the profile's step count.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value_t = ProfileArg::Ci)]
        profile: ProfileArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct CodecArgs {
    /// uniform, adaptive:N, ngram:N, tiny-lm:PATH or remote[:HOST:PORT].
    /// Without an address, remote reads SSCC_PREDICTOR_ADDR.
    #[arg(long, default_value = "ngram:3")]
    predictor: String,
    /// Training text for ngram predictors; the built-in corpus by default.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    block_size: usize,
    /// Input file, stdin when absent.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Output file, stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "ldpc_49_24,ldpc_49_30,ldpc_49_36")]
    codes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "uncoded,bitflip,bp")]
    decoders: Vec<DecoderArg>,
    #[arg(long, value_enum, default_value_t = ChannelArg::Awgn)]
    channel: ChannelArg,
    /// Unified SNRs; each code's channel SNR adds its rate advantage over
    /// LDPC(49,24).
    #[arg(long, value_delimiter = ',', default_value = "4,6")]
    snr: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Message bits simulated per code and SNR.
    #[arg(long, default_value_t = 100_000)]
    min_bits: usize,
    /// ECCT checkpoint for a code, as CODE=PATH; codes without one are
    /// trained first.
    #[arg(long = "ecct")]
    checkpoints: Vec<String>,
    #[arg(long, value_enum, default_value_t = ProfileArg::Ci)]
    profile: ProfileArg,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Awgn,
    Rayleigh,
}

impl From<ChannelArg> for ChannelModel {
    fn from(c: ChannelArg) -> Self {
        ChannelModel {
            kind: match c {
                ChannelArg::Awgn => ChannelKind::Awgn,
                ChannelArg::Rayleigh => ChannelKind::Rayleigh,
            },
            fading: Fading::default(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Ci,
    Full,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Ci => Profile::Ci,
            ProfileArg::Full => Profile::Full,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecoderArg {
    Uncoded,
    Bitflip,
    Bp,
    Ecct,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Compress(a) => {
            let codec = container_codec(&a)?;
            let text = String::from_utf8(read_input(a.input.as_deref())?).context("input is not UTF-8")?;
            write_output(a.output.as_deref(), &codec.compress(&text)?)
        }
        Command::Decompress(a) => {
            let codec = container_codec(&a)?;
            let bytes = read_input(a.input.as_deref())?;
            write_output(a.output.as_deref(), codec.decompress(&bytes)?.as_bytes())
        }
        Command::Run { spec, output } => {
            let spec = ExperimentSpec::load(&spec).with_context(|| format!("loading {}", spec.display()))?;
            let exp = spec.prepare(progress)?;
            let rows = exp.run(&spec.snr_unified_db, &spec.seeds);
            report(&rows, output.or(spec.output))
        }
        Command::Table3 {
            spec,
            block_sizes,
            output,
        } => {
            let spec = ExperimentSpec::load(&spec).with_context(|| format!("loading {}", spec.display()))?;
            let exp = spec.prepare(progress)?;
            let rows = table3(&exp, &block_sizes, &spec.snr_unified_db, &spec.seeds);
            report(&rows, output.or(spec.output))
        }
        Command::SweepRate(a) => sweep(&a),
        Command::Fig7 { input, orders } => {
            let records = match input {
                Some(p) => load_corpus(p, None)?,
                None => builtin_corpus(None),
            };
            let text = join_records(&records);
            let mut predictors: Vec<Arc<dyn Predictor>> = Vec::new();
            for order in orders {
                predictors.push(
                    PredictorSpec::Adaptive {
                        order,
                        alphabet: Alphabet::Text,
                    }
                    .build(&text)?,
                );
                predictors.push(
                    PredictorSpec::Ngram {
                        order,
                        train_corpus: None,
                        alphabet: Alphabet::Text,
                    }
                    .build(&text)?,
                );
            }
            println!("codec,output_bits,rate");
            for r in fig7(&text, &predictors)? {
                println!("{},{},{:.4}", r.codec, r.output_bits, r.rate);
            }
            Ok(())
        }
        Command::TrainEcct {
            code,
            channel,
            steps,
            profile,
            seed,
            output,
        } => {
            let code = LinearCode::resolve(&code)?;
            let model = train_ecct(code, channel.into(), profile.into(), steps, seed)?;
            let mut file = fs::File::create(&output).with_context(|| format!("creating {}", output.display()))?;
            model.to_checkpoint().write(&mut file)?;
            eprintln!("wrote {}", output.display());
            Ok(())
        }
    }
}

fn progress(step: usize, loss: f64) {
    if step % 100 == 0 {
        eprintln!("step {step} loss {loss:.4}");
    }
}

fn parse_predictor(s: &str, train: Option<&Path>) -> Result<PredictorSpec> {
    let (kind, arg) = s.split_once(':').map_or((s, None), |(k, a)| (k, Some(a)));
    let order = || -> Result<usize> {
        arg.ok_or_else(|| anyhow!("{kind} needs an order, as in {kind}:3"))?
            .parse()
            .with_context(|| format!("bad order in {s:?}"))
    };
    Ok(match kind {
        "uniform" => PredictorSpec::Uniform,
        "adaptive" => PredictorSpec::Adaptive {
            order: order()?,
            alphabet: Alphabet::Bytes,
        },
        "ngram" => PredictorSpec::Ngram {
            order: order()?,
            train_corpus: train.map(Path::to_path_buf),
            alphabet: Alphabet::Bytes,
        },
        "tiny-lm" => PredictorSpec::TinyLm {
            model: arg.ok_or_else(|| anyhow!("tiny-lm needs a model path"))?.into(),
        },
        "remote" => PredictorSpec::Remote {
            addr: arg.map(str::to_string),
        },
        _ => bail!("unknown predictor {s:?}"),
    })
}

fn container_codec(a: &CodecArgs) -> Result<ContainerCodec> {
    if a.block_size == 0 || a.block_size > u16::MAX as usize {
        bail!("block size must be in 1..=65535");
    }
    let predictor = parse_predictor(&a.predictor, a.train.as_deref())?.build("")?;
    Ok(ContainerCodec {
        coder: BlockCoder::arithmetic(predictor),
        plan: BlockPlan::new(a.block_size),
    })
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>> {
    match path {
        Some(p) => fs::read(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn report(rows: &[RunRow], output: Option<PathBuf>) -> Result<()> {
    for r in rows {
        if let Some(e) = &r.error {
            eprintln!("snr {} seed {}: {e}", r.snr_unified_db, r.seed);
        }
    }
    match output {
        Some(dir) => {
            write_report(rows, &dir)?;
            eprintln!("wrote {}", dir.display());
        }
        None => {
            let csv: Vec<CsvRow> = rows.iter().map(CsvRow::from).collect();
            write_csv(&csv, io::stdout())?;
        }
    }
    Ok(())
}

fn train_ecct(code: LinearCode, channel: ChannelModel, profile: Profile, steps: Option<usize>, seed: u64) -> Result<EcctModel> {
    eprintln!("training ECCT on {}", code.name);
    Ok(profile.train(&code, channel, steps, seed, progress)?)
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let channel: ChannelModel = a.channel.into();
    let codes: Vec<LinearCode> = a.codes.iter().map(|c| LinearCode::resolve(c)).collect::<Result<_, _>>()?;
    let mut models = Vec::new();
    if a.decoders.contains(&DecoderArg::Ecct) {
        for code in &codes {
            let ckpt = a.checkpoints.iter().find_map(|c| {
                let (name, path) = c.split_once('=')?;
                (name == code.name).then_some(path)
            });
            models.push(match ckpt {
                Some(path) => {
                    let ckpt = Checkpoint::read(fs::File::open(path).with_context(|| format!("opening {path}"))?)?;
                    EcctModel::from_checkpoint(&ckpt, &code.name)?
                }
                None => train_ecct(code.clone(), channel, a.profile.into(), a.steps, a.seed)?,
            });
        }
    }
    let rows = sweep_code_rate(
        &codes,
        |code| {
            a.decoders
                .iter()
                .map(|d| match d {
                    DecoderArg::Uncoded => ChannelDecoder::Uncoded,
                    DecoderArg::Bitflip => ChannelDecoder::BitFlip {
                        max_iters: DEFAULT_BITFLIP_ITERS,
                    },
                    DecoderArg::Bp => ChannelDecoder::SumProduct {
                        max_iters: DEFAULT_BP_ITERS,
                        genie_csi: false,
                    },
                    DecoderArg::Ecct => {
                        let i = codes.iter().position(|c| c.name == code.name).expect("code is listed");
                        ChannelDecoder::Ecct(&models[i])
                    }
                })
                .collect()
        },
        &channel,
        &a.snr,
        a.seed,
        a.min_bits,
    )?;
    println!("code,rate,decoder,snr_unified_db,channel_snr_db,ber,bits");
    for r in rows {
        println!(
            "{},{:.4},{},{},{:.4},{:e},{}",
            r.code, r.rate, r.decoder, r.snr_unified_db, r.channel_snr_db, r.ber, r.bits
        );
    }
    Ok(())
}
