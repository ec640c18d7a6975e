use super::PredictError;

/// Bits of the probability grid shared by every predictor.
pub const PROB_BITS: u32 = 16;

/// A quantized next-token distribution over `tau` tokens.
///
/// `cum` has `tau + 1` entries: `cum[0] == 0`, `cum[tau] == scale`, and each
/// token owns the half-open slice `cum[i]..cum[i + 1]` of at least one
/// quantum. Integer quanta make encoder and decoder agree bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulativeDistribution {
    cum: Vec<u32>,
    scale: u32,
}

impl CumulativeDistribution {
    /// Builds from raw cumulative counts, checking every invariant.
    pub fn from_cumulative(cum: Vec<u32>, scale: u32) -> Result<Self, PredictError> {
        if cum.len() < 3 {
            return Err(PredictError::Invalid("need at least two tokens".into()));
        }
        if cum[0] != 0 || *cum.last().unwrap() != scale {
            return Err(PredictError::Invalid(format!(
                "cumulative must run from 0 to {scale}"
            )));
        }
        if let Some(i) = cum.windows(2).position(|w| w[1] <= w[0]) {
            return Err(PredictError::Invalid(format!("token {i} has zero mass")));
        }
        Ok(Self { cum, scale })
    }

    /// Builds from per-token integer frequencies, each at least 1, summing to
    /// `scale`.
    pub fn from_frequencies(freqs: &[u32], scale: u32) -> Result<Self, PredictError> {
        let mut cum = Vec::with_capacity(freqs.len() + 1);
        let mut acc = 0u32;
        cum.push(0);
        for &f in freqs {
            acc = acc
                .checked_add(f)
                .ok_or_else(|| PredictError::Invalid("frequency overflow".into()))?;
            cum.push(acc);
        }
        Self::from_cumulative(cum, scale)
    }

    /// The uniform distribution over `tau` tokens on the standard grid.
    pub fn uniform(tau: usize) -> Self {
        quantize(&vec![1.0; tau], PROB_BITS).expect("uniform weights are valid")
    }

    pub fn tau(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn cumulative(&self) -> &[u32] {
        &self.cum
    }

    /// Lower and upper cumulative bound of `token`.
    pub fn bounds(&self, token: usize) -> (u32, u32) {
        (self.cum[token], self.cum[token + 1])
    }

    pub fn frequency(&self, token: usize) -> u32 {
        self.cum[token + 1] - self.cum[token]
    }

    pub fn probability(&self, token: usize) -> f64 {
        f64::from(self.frequency(token)) / f64::from(self.scale)
    }

    /// Token with the largest mass (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.tau() {
            if self.frequency(i) > self.frequency(best) {
                best = i;
            }
        }
        best
    }
}

/// Quantizes non-negative weights onto a grid of `2^bits` quanta.
///
/// Each token first receives `floor(p * scale)` quanta, raised to one if that
/// is zero. Any remaining deficit is handed out one quantum at a time in
/// order of decreasing fractional remainder; any surplus created by the
/// minimum-mass floor is taken back one quantum at a time from the tokens
/// with the smallest remainder that still hold more than one quantum. Ties
/// always go to the lower token index.
pub fn quantize(weights: &[f64], bits: u32) -> Result<CumulativeDistribution, PredictError> {
    let tau = weights.len();
    let scale: u32 = 1 << bits;
    if tau < 2 {
        return Err(PredictError::Invalid("need at least two tokens".into()));
    }
    if tau > scale as usize {
        return Err(PredictError::Invalid(format!(
            "{tau} tokens do not fit a grid of {scale} quanta"
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(PredictError::Invalid("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(PredictError::Invalid("weights sum to zero".into()));
    }

    let mut freqs = Vec::with_capacity(tau);
    let mut rems = Vec::with_capacity(tau);
    for &w in weights {
        let exact = w / total * f64::from(scale);
        let floor = exact.floor();
        freqs.push((floor as u32).max(1));
        rems.push(if floor >= 1.0 { exact - floor } else { 0.0 });
    }
    let assigned: i64 = freqs.iter().map(|&f| i64::from(f)).sum();
    let mut diff = i64::from(scale) - assigned;

    let mut order: Vec<usize> = (0..tau).collect();
    if diff > 0 {
        order.sort_by(|&a, &b| rems[b].total_cmp(&rems[a]).then(a.cmp(&b)));
        let mut k = 0;
        while diff > 0 {
            freqs[order[k % tau]] += 1;
            diff -= 1;
            k += 1;
        }
    } else if diff < 0 {
        order.sort_by(|&a, &b| rems[a].total_cmp(&rems[b]).then(a.cmp(&b)));
        while diff < 0 {
            let mut took = false;
            for &i in &order {
                if diff == 0 {
                    break;
                }
                if freqs[i] > 1 {
                    freqs[i] -= 1;
                    diff += 1;
                    took = true;
                }
            }
            debug_assert!(took, "tau <= scale guarantees progress");
        }
    }
    CumulativeDistribution::from_frequencies(&freqs, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_four() {
        let d = CumulativeDistribution::uniform(4);
        let s = 1u32 << PROB_BITS;
        assert_eq!(d.cumulative(), &[0, s / 4, s / 2, 3 * s / 4, s]);
    }

    #[test]
    fn zero_mass_gets_one_quantum() {
        let d = quantize(&[1.0, 0.0, 0.0], 16).unwrap();
        assert_eq!(d.frequency(1), 1);
        assert_eq!(d.frequency(2), 1);
        assert_eq!(d.frequency(0), 65534);
    }

    #[test]
    fn remainder_ties_go_to_lower_index() {
        // 1/3 each: floors 21845, deficit 1 goes to token 0.
        let d = quantize(&[1.0, 1.0, 1.0], 16).unwrap();
        assert_eq!(d.frequency(0), 21846);
        assert_eq!(d.frequency(1), 21845);
        assert_eq!(d.frequency(2), 21845);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(quantize(&[1.0], 16).is_err());
        assert!(quantize(&[0.0, 0.0], 16).is_err());
        assert!(quantize(&[1.0, f64::NAN], 16).is_err());
        assert!(quantize(&[1.0, -1.0], 16).is_err());
        assert!(CumulativeDistribution::from_cumulative(vec![0, 5, 5, 10], 10).is_err());
    }

    proptest! {
        #[test]
        fn quantized_distribution_is_valid(weights in prop::collection::vec(0.0f64..1.0, 2..300)) {
            prop_assume!(weights.iter().sum::<f64>() > 0.0);
            let d = quantize(&weights, PROB_BITS).unwrap();
            prop_assert_eq!(d.tau(), weights.len());
            prop_assert_eq!(d.cumulative()[0], 0);
            prop_assert_eq!(*d.cumulative().last().unwrap(), 1 << PROB_BITS);
            for i in 0..d.tau() {
                prop_assert!(d.frequency(i) >= 1);
            }
        }

        #[test]
        fn quantization_is_close(weights in prop::collection::vec(0.01f64..1.0, 2..50)) {
            let total: f64 = weights.iter().sum();
            let d = quantize(&weights, PROB_BITS).unwrap();
            for (i, w) in weights.iter().enumerate() {
                let exact = w / total * 65536.0;
                prop_assert!((f64::from(d.frequency(i)) - exact).abs() < 2.0);
            }
        }
    }
}
