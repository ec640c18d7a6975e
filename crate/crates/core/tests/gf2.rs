use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sscc::gf2::{builtin, girth, parse_alist, write_alist, BitMatrix, LinearCode, BUILTIN_CODES, DEFAULT_BITFLIP_ITERS, DEFAULT_BP_ITERS};

fn all_codes() -> Vec<LinearCode> {
    BUILTIN_CODES.iter().map(|n| builtin(n).unwrap()).collect()
}

/// Independent GF(2) product of `h` with a column vector.
fn brute_syndrome(h: &BitMatrix, x: &[u8]) -> Vec<u8> {
    (0..h.rows)
        .map(|r| ((0..h.cols).map(|c| u32::from(h.get(r, c)) * u32::from(x[c])).sum::<u32>() % 2) as u8)
        .collect()
}

fn all_words(n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0u32..1 << n).map(move |v| (0..n).map(|i| ((v >> i) & 1) as u8).collect())
}

#[test]
fn shipped_dimensions() {
    let dims: Vec<(usize, usize)> = all_codes().iter().map(|c| (c.n(), c.k())).collect();
    assert_eq!(dims, vec![(49, 24), (49, 30), (49, 36), (121, 110), (7, 4), (2, 1), (3, 1)]);
    let c = builtin("ldpc_49_24").unwrap();
    assert!((c.rate() - 0.49).abs() < 0.01);
    let rep = builtin("rep_2_1").unwrap();
    assert_eq!(rep.g().row(0), &[1, 1]);
}

#[test]
fn shipped_ldpc_structure() {
    for name in ["ldpc_49_24", "ldpc_49_30", "ldpc_49_36", "ldpc_121_110"] {
        let c = builtin(name).unwrap();
        let h = c.h();
        for j in 0..h.cols {
            assert_eq!(h.col_support(j).len(), 3, "{name} column {j}");
        }
        let cols: std::collections::BTreeSet<Vec<usize>> = (0..h.cols).map(|j| h.col_support(j)).collect();
        assert_eq!(cols.len(), h.cols, "{name} has repeated columns");
        assert_eq!(parse_alist(&write_alist(h)).unwrap(), *h);
    }
    assert!(girth(builtin("ldpc_49_24").unwrap().h()).unwrap() >= 6);
}

#[test]
fn generator_is_orthogonal_to_parity_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for c in all_codes() {
        assert!(c.g().mul(&c.h().transpose()).is_zero(), "{}", c.name);
        for _ in 0..1000 {
            let m: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
            let x = c.encode(&m).unwrap();
            assert!(brute_syndrome(c.h(), &x).iter().all(|&s| s == 0));
            assert_eq!(c.extract_message(&x), m);
            // m G computed directly agrees with the systematic encoder.
            let mg: Vec<u8> = (0..c.n())
                .map(|j| (0..c.k()).fold(0, |acc, i| acc ^ (m[i] & c.g().get(i, j))))
                .collect();
            assert_eq!(mg, x);
        }
    }
}

#[test]
fn hamming_codebook_matches_enumeration() {
    let c = builtin("hamming_7_4").unwrap();
    let codebook: Vec<Vec<u8>> = all_words(7).filter(|x| brute_syndrome(c.h(), x).iter().all(|&s| s == 0)).collect();
    assert_eq!(codebook.len(), 16);
    for m in all_words(4) {
        let x = c.encode(&m).unwrap();
        let agreeing: Vec<&Vec<u8>> = codebook
            .iter()
            .filter(|w| c.info_positions().iter().zip(&m).all(|(&p, &b)| w[p] == b))
            .collect();
        assert_eq!(agreeing, vec![&x]);
    }
    assert_eq!(c.encode(&[0; 4]).unwrap(), vec![0; 7]);
}

#[test]
fn syndrome_matches_brute_force() {
    let c = builtin("hamming_7_4").unwrap();
    for x in all_words(7) {
        assert_eq!(c.syndrome(&x).unwrap(), brute_syndrome(c.h(), &x));
    }
    let c = builtin("ldpc_49_24").unwrap();
    let x = c.encode(&[1; 24]).unwrap();
    for j in 0..49 {
        let mut y = x.clone();
        y[j] ^= 1;
        let col: Vec<u8> = (0..c.m()).map(|r| c.h().get(r, j)).collect();
        assert_eq!(c.syndrome(&y).unwrap(), col);
    }
}

#[test]
fn hamming_bitflip_corrects_every_single_error() {
    let c = builtin("hamming_7_4").unwrap();
    for m in all_words(4) {
        let x = c.encode(&m).unwrap();
        for j in 0..7 {
            let mut y = x.clone();
            y[j] ^= 1;
            let out = c.decode_bitflip(&y, DEFAULT_BITFLIP_ITERS).unwrap();
            assert!(out.converged);
            assert_eq!(out.codeword, x, "m={m:?} flip {j}");
            assert_eq!(out.message, m);
        }
    }
}

#[test]
fn heavy_errors_never_panic() {
    let c = builtin("hamming_7_4").unwrap();
    for y in all_words(7) {
        let out = c.decode_bitflip(&y, 10).unwrap();
        assert_eq!(out.converged, c.is_codeword(&out.codeword));
    }
}

#[test]
fn noiseless_decoding_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for c in all_codes() {
        let messages: Vec<Vec<u8>> = if c.k() <= 10 {
            all_words(c.k()).collect()
        } else {
            (0..200).map(|_| (0..c.k()).map(|_| rng.random_range(0..2)).collect()).collect()
        };
        for m in messages {
            let x = c.encode(&m).unwrap();
            let bf = c.decode_bitflip(&x, DEFAULT_BITFLIP_ITERS).unwrap();
            assert_eq!((bf.message, bf.iterations), (m.clone(), 0));
            let llr: Vec<f64> = x.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
            let bp = c.decode_sumproduct(&llr, DEFAULT_BP_ITERS).unwrap();
            assert!(bp.converged && bp.iterations <= 1);
            assert_eq!(bp.message, m);
        }
    }
}

#[test]
fn bp_sign_symmetry_on_codes_with_all_ones_word() {
    // Negating the LLRs maps the problem onto the complemented codeword,
    // which is only the same problem when the all-ones word is a codeword.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for name in ["hamming_7_4", "rep_2_1", "rep_3_1"] {
        let c = builtin(name).unwrap();
        assert!(c.is_codeword(&vec![1; c.n()]));
        for _ in 0..500 {
            let llr: Vec<f64> = (0..c.n()).map(|_| rng.random_range(-4.0..4.0)).collect();
            let neg: Vec<f64> = llr.iter().map(|l| -l).collect();
            let a = c.decode_sumproduct(&llr, DEFAULT_BP_ITERS).unwrap();
            let b = c.decode_sumproduct(&neg, DEFAULT_BP_ITERS).unwrap();
            let flipped: Vec<u8> = a.codeword.iter().map(|x| x ^ 1).collect();
            assert_eq!(b.codeword, flipped);
        }
    }
}

#[test]
fn resolve_paths_and_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mine.alist");
    std::fs::write(&path, sscc::gf2::builtin_alist("hamming_7_4").unwrap()).unwrap();
    let c = LinearCode::resolve(path.to_str().unwrap()).unwrap();
    assert_eq!((c.name.as_str(), c.k()), ("mine", 4));
    assert!(LinearCode::resolve("ldpc_49_24").is_ok());
    assert!(LinearCode::resolve("no_such_code").is_err());
}

proptest! {
    #[test]
    fn syndrome_is_linear(a in prop::collection::vec(0u8..2, 49), b in prop::collection::vec(0u8..2, 49)) {
        let c = builtin("ldpc_49_24").unwrap();
        let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let sa = c.syndrome(&a).unwrap();
        let sb = c.syndrome(&b).unwrap();
        let sum: Vec<u8> = sa.iter().zip(&sb).map(|(x, y)| x ^ y).collect();
        prop_assert_eq!(c.syndrome(&ab).unwrap(), sum);
    }
}
