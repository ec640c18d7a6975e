use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sscc::codec::{BlockCoder, ContainerCodec, DeflateCodec};
use sscc::container::{block_bytes, BLOCK_HEADER_BYTES};
use sscc::corpus::{builtin_corpus, join_records, parse_records, BlockPlan};
use sscc::huffman::HuffmanTable;
use sscc::metrics::{bleu, compression_rate};
use sscc::predictor::{train_ngram, AdaptiveNgram, Dictionary};

/// Clipped n-gram matches counted the slow way: every candidate n-gram is
/// compared against every reference position.
fn brute_precision(cand: &[&str], refw: &[&str], n: usize) -> (usize, usize) {
    if cand.len() < n {
        return (0, 0);
    }
    let mut used: HashMap<Vec<&str>, usize> = HashMap::new();
    let mut matches = 0;
    for i in 0..=cand.len() - n {
        let g = &cand[i..i + n];
        let in_ref = (0..refw.len().saturating_sub(n - 1)).filter(|&j| &refw[j..j + n] == g).count();
        let u = used.entry(g.to_vec()).or_insert(0);
        if *u < in_ref {
            *u += 1;
            matches += 1;
        }
    }
    (matches, cand.len() - n + 1)
}

fn brute_bleu(cand: &str, reference: &str) -> [f64; 4] {
    let c: Vec<&str> = cand.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    let bp = if c.is_empty() {
        0.0
    } else if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    let mut out = [0.0; 4];
    let mut logs = Vec::new();
    for n in 1..=4 {
        let (m, t) = brute_precision(&c, &r, n);
        logs.push(if m == 0 { f64::NEG_INFINITY } else { (m as f64 / t as f64).ln() });
        let mean = logs.iter().sum::<f64>() / n as f64;
        out[n - 1] = if mean.is_finite() { bp * mean.exp() } else { 0.0 };
    }
    out
}

#[test]
fn bleu_matches_brute_force_counter() {
    let vocab = ["the", "a", "house", "vote", "member", "of", "to", "we"];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sentence = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.random_range(1..14);
        (0..n).map(|_| vocab[rng.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" ")
    };
    for _ in 0..100 {
        let reference = sentence(&mut rng);
        // Mutate the reference so higher orders match some of the time.
        let cand = if rng.random_bool(0.5) {
            let mut w: Vec<&str> = reference.split(' ').collect();
            let i = rng.random_range(0..w.len());
            w[i] = vocab[rng.random_range(0..vocab.len())];
            w.join(" ")
        } else {
            sentence(&mut rng)
        };
        let got = bleu(&cand, &reference, 4, false).unwrap().bleu;
        let want = brute_bleu(&cand, &reference);
        for n in 0..4 {
            assert!((got[n] - want[n]).abs() < 1e-12, "{cand:?} vs {reference:?}: {got:?} {want:?}");
        }
    }
}

#[test]
fn bleu_is_one_for_identical_text() {
    for r in builtin_corpus(Some(30)) {
        assert_eq!(bleu(&r.text, &r.text, 4, false).unwrap().bleu, [1.0; 4]);
    }
}

#[test]
fn random_symbols_do_not_compress_under_huffman() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let text: String = (0..20_000).map(|_| char::from(rng.random::<u8>())).collect();
    let codec = ContainerCodec {
        coder: BlockCoder::Huffman(HuffmanTable::from_text(&text).unwrap()),
        plan: BlockPlan::whole(),
    };
    let r = compression_rate(&text, &codec).unwrap();
    assert!((r.rate - 1.0).abs() < 0.02, "{}", r.rate);
}

#[test]
fn constant_text_costs_almost_nothing() {
    let text = "a".repeat(1000);
    let p = AdaptiveNgram::new(Dictionary::chars_of(&text), 1).unwrap();
    let codec = ContainerCodec {
        coder: BlockCoder::arithmetic(Arc::new(p)),
        plan: BlockPlan::whole(),
    };
    let r = compression_rate(&text, &codec).unwrap();
    assert!(r.rate < 0.02, "{}", r.rate);
}

#[test]
fn trained_ngram_beats_huffman_on_the_corpus() {
    let records = builtin_corpus(None);
    let text = join_records(&records);
    assert!(text.len() >= 9_000);
    let huffman = ContainerCodec {
        coder: BlockCoder::Huffman(HuffmanTable::from_text(&text).unwrap()),
        plan: BlockPlan::whole(),
    };
    let ngram = train_ngram(&records, 3, Dictionary::chars_of(&text)).unwrap();
    let ac = ContainerCodec {
        coder: BlockCoder::arithmetic(Arc::new(ngram)),
        plan: BlockPlan::whole(),
    };
    let h = compression_rate(&text, &huffman).unwrap().rate;
    let a = compression_rate(&text, &ac).unwrap().rate;
    let d = compression_rate(&text, &DeflateCodec).unwrap().rate;
    assert!(a < h, "ac {a} huffman {h}");
    assert!(d < h, "deflate {d} huffman {h}");

    // Held out: train on the even records, code the odd ones.
    let (train, test): (Vec<_>, Vec<_>) = records.iter().cloned().enumerate().partition(|(i, _)| i % 2 == 0);
    let train: Vec<_> = train.into_iter().map(|(_, r)| r).collect();
    let test = join_records(&test.into_iter().map(|(_, r)| r).collect::<Vec<_>>());
    let dict = Dictionary::chars_of(&format!("{}{test}", join_records(&train)));
    let ac = ContainerCodec {
        coder: BlockCoder::arithmetic(Arc::new(train_ngram(&train, 3, dict).unwrap())),
        plan: BlockPlan::whole(),
    };
    let huffman = ContainerCodec {
        coder: BlockCoder::Huffman(HuffmanTable::from_text(&test).unwrap()),
        plan: BlockPlan::whole(),
    };
    let a = compression_rate(&test, &ac).unwrap().rate;
    let h = compression_rate(&test, &huffman).unwrap().rate;
    assert!(a < h, "held-out ac {a} huffman {h}");
}

#[test]
fn reported_bits_reconcile_with_blocks() {
    let text = join_records(&builtin_corpus(Some(12)));
    let p = Arc::new(AdaptiveNgram::new(Dictionary::Bytes, 2).unwrap());
    for size in [16, 64, 1000] {
        let plan = BlockPlan::new(size);
        let coder = BlockCoder::arithmetic(p.clone());
        let blocks = coder.encode_blocks(&text, &plan).unwrap();
        let expected: usize = blocks.iter().map(block_bytes).sum::<usize>() * 8;
        let payload: usize = blocks.iter().map(|b| b.payload.len()).sum();
        let r = compression_rate(&text, &ContainerCodec { coder, plan }).unwrap();
        assert_eq!(r.output_bits, expected);
        assert!(r.output_bits >= payload + blocks.len() * BLOCK_HEADER_BYTES * 8);
        assert!(r.output_bits < payload + blocks.len() * (BLOCK_HEADER_BYTES * 8 + 8));
        assert_eq!(r.input_chars, text.chars().count());
    }
}

#[test]
fn empty_input_is_rejected() {
    assert!(compression_rate("", &DeflateCodec).is_err());
    assert!(parse_records("\n\n", None).is_empty());
}
