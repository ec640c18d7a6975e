//! Regenerates the alist files under `codes/`.
//!
//! ```text
//! cargo run -p sscc --example gen_codes -- crates/core/codes
//! ```

use std::path::PathBuf;

use sscc::gf2::{girth, peg_parity_check, write_alist, BitMatrix};

/// Column pairs sharing at least two checks (each such pair closes a 4-cycle),
/// and whether any two columns are identical.
fn overlaps(h: &BitMatrix) -> (usize, bool) {
    let cols: Vec<Vec<usize>> = (0..h.cols).map(|j| h.col_support(j)).collect();
    let mut pairs = 0;
    let mut duplicate = false;
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            let shared = cols[a].iter().filter(|r| cols[b].contains(r)).count();
            pairs += usize::from(shared >= 2);
            duplicate |= cols[a] == cols[b];
        }
    }
    (pairs, duplicate)
}

/// Full-rank PEG matrix with the largest girth, then the fewest 4-cycle pairs.
fn best_peg(n: usize, m: usize) -> BitMatrix {
    let mut best: Option<((usize, usize), u64, BitMatrix)> = None;
    for seed in 0..256 {
        let h = peg_parity_check(n, m, 3, seed);
        let (pairs, duplicate) = overlaps(&h);
        if duplicate || h.rank() < m {
            continue;
        }
        let score = (girth(&h).unwrap_or(usize::MAX), usize::MAX - pairs);
        if best.as_ref().map_or(true, |(b, _, _)| score > *b) {
            best = Some((score, seed, h));
        }
    }
    let ((g, p), seed, h) = best.expect("no full-rank construction found");
    eprintln!("({n},{}) seed {seed} girth {g} overlapping pairs {}", n - m, usize::MAX - p);
    h
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/codes".into()));
    for (n, k) in [(49, 24), (49, 30), (49, 36), (121, 110)] {
        let h = best_peg(n, n - k);
        std::fs::write(dir.join(format!("ldpc_{n}_{k}.alist")), write_alist(&h)).unwrap();
    }
    let hamming = BitMatrix::from_rows(&[&[1, 1, 0, 1, 1, 0, 0], &[1, 0, 1, 1, 0, 1, 0], &[0, 1, 1, 1, 0, 0, 1]]);
    std::fs::write(dir.join("hamming_7_4.alist"), write_alist(&hamming)).unwrap();
    for n in [2, 3] {
        let mut h = BitMatrix::zeros(n - 1, n);
        for i in 0..n - 1 {
            h.set(i, i, 1);
            h.set(i, i + 1, 1);
        }
        std::fs::write(dir.join(format!("rep_{n}_1.alist")), write_alist(&h)).unwrap();
    }
}
