use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sscc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sscc")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = sscc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compress_then_decompress_restores_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    let packed = dir.path().join("in.sscc");
    let restored = dir.path().join("out.txt");
    let text = "Mr President, the committee has examined the proposal with great care.\nThe vote will take place tomorrow at noon.\n";
    fs::write(&input, text).unwrap();
    for predictor in ["uniform", "adaptive:2", "ngram:3"] {
        for block in ["16", "64"] {
            let args = ["--predictor", predictor, "--block-size", block];
            ok(&[&["compress", "-i", path(&input), "-o", path(&packed)][..], &args].concat());
            ok(&[&["decompress", "-i", path(&packed), "-o", path(&restored)][..], &args].concat());
            assert_eq!(fs::read_to_string(&restored).unwrap(), text, "{predictor} {block}");
        }
    }
    let ngram = fs::metadata(&packed).unwrap().len();
    ok(&["compress", "-i", path(&input), "-o", path(&packed), "--predictor", "uniform", "--block-size", "64"]);
    assert!(ngram < fs::metadata(&packed).unwrap().len());
}

#[test]
fn bad_arguments_fail_cleanly() {
    for args in [
        &["compress", "--predictor", "markov:2"][..],
        &["compress", "--predictor", "ngram"],
        &["compress", "--block-size", "0"],
        &["run", "--spec", "/no/such/spec.toml"],
        &["sweep-rate", "--codes", "no_such_code"],
    ] {
        let out = sscc(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn remote_predictor_address_comes_from_the_environment() {
    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sscc"))
        .args(["compress", "--predictor", "remote"])
        .env("SSCC_PREDICTOR_ADDR", closed.to_string())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("transport"));
    let out = Command::new(env!("CARGO_BIN_EXE_sscc"))
        .args(["compress", "--predictor", "remote"])
        .env_remove("SSCC_PREDICTOR_ADDR")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("SSCC_PREDICTOR_ADDR"));
}

#[test]
fn run_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.toml");
    let out = dir.path().join("report");
    fs::write(
        &spec,
        "name = \"smoke\"\nlimit = 4\nsnr_unified_db = [0.0, 300.0]\nseeds = [1, 2]\n",
    )
    .unwrap();
    ok(&["run", "--spec", path(&spec), "--output", path(&out)]);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("snr_unified_db,channel,coder,decoder,block_size,ber,"));
    assert_eq!(csv.lines().count(), 5);
    assert!(out.join("ber.svg").exists() && out.join("bleu4.svg").exists());

    let stdout = ok(&["table3", "--spec", path(&spec), "--block-sizes", "16,128"]);
    assert_eq!(stdout.lines().count(), 9);
}

#[test]
fn fig7_compares_codecs() {
    let stdout = ok(&["fig7", "--orders", "2"]);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "codec,output_bits,rate");
    assert!(lines.iter().any(|l| l.starts_with("huffman,")));
    assert!(lines.iter().any(|l| l.starts_with("deflate,")));
    assert_eq!(lines.len(), 5);
}

#[test]
fn trained_checkpoint_feeds_the_rate_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("rep3.ckpt");
    ok(&["train-ecct", "--code", "rep_3_1", "--steps", "5", "--output", path(&ckpt)]);
    assert!(fs::metadata(&ckpt).unwrap().len() > 0);
    let stdout = ok(&[
        "sweep-rate",
        "--codes",
        "rep_3_1,hamming_7_4",
        "--decoders",
        "uncoded,bp,ecct",
        "--snr",
        "3",
        "--min-bits",
        "2000",
        "--ecct",
        &format!("rep_3_1={}", path(&ckpt)),
        "--steps",
        "2",
    ]);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "code,rate,decoder,snr_unified_db,channel_snr_db,ber,bits");
    assert_eq!(lines.len(), 7);
    assert!(lines.iter().any(|l| l.starts_with("hamming_7_4,0.5714,ecct,3,")));
}
