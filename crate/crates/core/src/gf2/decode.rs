//! Hard-decision bit flipping and soft-decision sum-product decoding.

use super::{CodeError, LinearCode};

pub const DEFAULT_BITFLIP_ITERS: usize = 50;
pub const DEFAULT_BP_ITERS: usize = 20;
/// Magnitude bound applied to every LLR and message.
pub const LLR_CLIP: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub codeword: Vec<u8>,
    pub message: Vec<u8>,
    /// The final estimate satisfies every check.
    pub converged: bool,
    pub iterations: usize,
}

impl LinearCode {
    fn outcome(&self, codeword: Vec<u8>, converged: bool, iterations: usize) -> DecodeOutcome {
        DecodeOutcome {
            message: self.extract_message(&codeword),
            codeword,
            converged,
            iterations,
        }
    }

    /// Greedy bit flipping: each iteration flips the bit in the most
    /// unsatisfied checks. Ties go to the bit in the fewest satisfied checks,
    /// then to the lowest index.
    pub fn decode_bitflip(&self, hard: &[u8], max_iters: usize) -> Result<DecodeOutcome, CodeError> {
        let mut x = hard.to_vec();
        let mut syn = self.syndrome(&x)?;
        for iter in 0..=max_iters {
            if syn.iter().all(|&s| s == 0) {
                return Ok(self.outcome(x, true, iter));
            }
            if iter == max_iters {
                break;
            }
            let mut best = (0usize, usize::MAX, 0usize);
            for (j, checks) in self.bit_neighbors().iter().enumerate() {
                let unsat = checks.iter().filter(|&&c| syn[c] == 1).count();
                let sat = checks.len() - unsat;
                if unsat > best.0 || (unsat == best.0 && unsat > 0 && sat < best.1) {
                    best = (unsat, sat, j);
                }
            }
            let j = best.2;
            x[j] ^= 1;
            for &c in &self.bit_neighbors()[j] {
                syn[c] ^= 1;
            }
        }
        Ok(self.outcome(x, false, max_iters))
    }

    /// Flooding sum-product decoding. `llrs[j] = ln P(x_j=0)/P(x_j=1)`.
    pub fn decode_sumproduct(&self, llrs: &[f64], max_iters: usize) -> Result<DecodeOutcome, CodeError> {
        if llrs.len() != self.n() {
            return Err(CodeError::Length {
                expected: self.n(),
                got: llrs.len(),
            });
        }
        if let Some(index) = llrs.iter().position(|l| !l.is_finite()) {
            return Err(CodeError::NonFiniteLlr { index });
        }
        let prior: Vec<f64> = llrs.iter().map(|l| l.clamp(-LLR_CLIP, LLR_CLIP)).collect();
        let hard_of = |post: &[f64]| post.iter().map(|&l| u8::from(l < 0.0)).collect::<Vec<u8>>();
        let mut x = hard_of(&prior);
        if self.is_codeword(&x) {
            return Ok(self.outcome(x, true, 0));
        }
        let checks = self.check_neighbors();
        // Edge messages, stored per check in the order of `checks[i]`.
        let mut v2c: Vec<Vec<f64>> = checks.iter().map(|bits| bits.iter().map(|&j| prior[j]).collect()).collect();
        let mut c2v: Vec<Vec<f64>> = checks.iter().map(|bits| vec![0.0; bits.len()]).collect();
        let mut post = prior.clone();
        let mut t = Vec::new();
        for iter in 1..=max_iters {
            for (i, bits) in checks.iter().enumerate() {
                t.clear();
                t.extend(v2c[i].iter().map(|&m| (m / 2.0).tanh()));
                for e in 0..bits.len() {
                    let prod: f64 = t.iter().enumerate().filter(|&(f, _)| f != e).map(|(_, v)| v).product();
                    let limit = (LLR_CLIP / 2.0).tanh();
                    c2v[i][e] = 2.0 * prod.clamp(-limit, limit).atanh();
                }
            }
            post.copy_from_slice(&prior);
            for (i, bits) in checks.iter().enumerate() {
                for (e, &j) in bits.iter().enumerate() {
                    post[j] += c2v[i][e];
                }
            }
            for (i, bits) in checks.iter().enumerate() {
                for (e, &j) in bits.iter().enumerate() {
                    v2c[i][e] = (post[j] - c2v[i][e]).clamp(-LLR_CLIP, LLR_CLIP);
                }
            }
            x = hard_of(&post);
            if self.is_codeword(&x) {
                return Ok(self.outcome(x, true, iter));
            }
        }
        Ok(self.outcome(x, false, max_iters))
    }
}
