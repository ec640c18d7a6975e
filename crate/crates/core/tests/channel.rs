use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sscc::channel::{
    bin_to_sign, effective_snr, float_penalty_db, frame_rng, rayleigh_sample, sigma_from_snr, sign_to_bin, transmit,
    ChannelKind, ChannelModel, Fading, SnrConfig,
};
use statrs::distribution::{ContinuousCDF, Normal};

/// Gaussian tail `Q(x)`.
fn q(x: f64) -> f64 {
    1.0 - Normal::standard().cdf(x)
}

#[test]
fn uncoded_ber_at_zero_db_is_q_sqrt2() {
    let sigma = sigma_from_snr(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1_000_000;
    let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let f = transmit(&bits, &ChannelModel::awgn(), sigma, &mut rng);
    let errors = f.hard().iter().zip(&bits).filter(|(a, b)| a != b).count();
    let ber = errors as f64 / n as f64;
    let oracle = q(2f64.sqrt());
    assert!((oracle - 0.0786).abs() < 5e-5);
    assert!((ber - oracle).abs() < 0.002, "BER {ber} vs {oracle}");
}

#[test]
fn noise_and_fading_moments() {
    let sigma = 0.6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let zeros = vec![0u8; 1_000_000];
    let f = transmit(&zeros, &ChannelModel::awgn(), sigma, &mut rng);
    let var = f.z.iter().map(|z| z * z).sum::<f64>() / f.z.len() as f64;
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.01, "{var}");
    let h2 = (0..1_000_000).map(|_| rayleigh_sample(&mut rng).powi(2)).sum::<f64>() / 1e6;
    assert!((h2 - 1.0).abs() < 0.01, "{h2}");
}

#[test]
fn multiplicative_decomposition_holds_exactly() {
    let models = [
        ChannelModel::awgn(),
        ChannelModel::rayleigh(),
        ChannelModel {
            kind: ChannelKind::Rayleigh,
            fading: Fading::PerSymbol,
        },
    ];
    for (i, m) in models.iter().enumerate() {
        for f in 0..200 {
            let mut rng = frame_rng(i as u64, f);
            let cw: Vec<u8> = (0..49).map(|_| rng.random_range(0..2)).collect();
            let frame = transmit(&cw, m, 0.8, &mut rng);
            for ((y, x), zt) in frame.y.iter().zip(&frame.x_s).zip(frame.z_tilde()) {
                // x_s is +-1, so x_s * (h + x_s z) = h x_s + z up to rounding.
                assert!((y - x * zt).abs() <= 1e-12 * (1.0 + y.abs()));
            }
            assert_eq!(frame.hard(), sign_to_bin(&frame.y));
            assert_eq!(sign_to_bin(&frame.x_s), cw);
            if m.fading == Fading::Block {
                assert!(frame.h.iter().all(|&h| h == frame.h[0]));
            }
        }
    }
}

#[test]
fn seeds_are_deterministic_and_streams_differ() {
    let cw = vec![0u8; 49];
    let a = transmit(&cw, &ChannelModel::rayleigh(), 0.5, &mut frame_rng(3, 4));
    let b = transmit(&cw, &ChannelModel::rayleigh(), 0.5, &mut frame_rng(3, 4));
    let c = transmit(&cw, &ChannelModel::rayleigh(), 0.5, &mut frame_rng(3, 5));
    assert_eq!(a, b);
    assert_ne!(a.y, c.y);
}

#[test]
fn snr_accounting() {
    assert!((float_penalty_db() - 12.0412).abs() < 1e-3);
    let base = SnrConfig {
        snr_unified_db: 4.0,
        num_unified: 1000.0,
        num: 1000.0,
        float_based: false,
    };
    assert_eq!(effective_snr(&base), 4.0);
    let doubled = SnrConfig { num: 2000.0, ..base };
    assert!((effective_snr(&base) - effective_snr(&doubled) - 3.0103).abs() < 1e-3);
    let float = SnrConfig { float_based: true, ..base };
    assert!((effective_snr(&float) - 4.0 - 12.0412).abs() < 1e-3);
    assert!((sigma_from_snr(0.0) - 0.70711).abs() < 1e-5);
    assert!((sigma_from_snr(6.021) - 0.35355).abs() < 5e-5);
    assert!(sigma_from_snr(300.0) < 1e-14);
}

#[test]
fn noiseless_limit_recovers_codeword() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cw: Vec<u8> = (0..500).map(|_| rng.random_range(0..2)).collect();
    for m in [ChannelModel::awgn(), ChannelModel::rayleigh()] {
        let f = transmit(&cw, &m, 1e-6, &mut rng);
        assert_eq!(f.hard(), cw);
    }
    assert_eq!(bin_to_sign(&[0, 1, 0]), vec![1.0, -1.0, 1.0]);
    assert_eq!(sign_to_bin(&[0.7, -0.3, 0.0]), vec![0, 1, 0]);
}

proptest::proptest! {
    #[test]
    fn effective_snr_is_additive_and_monotone(s in -10.0f64..20.0, d in 0.0f64..5.0, a in 1.0f64..1e6, b in 1.0f64..1e6) {
        let cfg = |snr: f64, nu: f64| SnrConfig { snr_unified_db: snr, num_unified: nu, num: b, float_based: false };
        let e = effective_snr(&cfg(s, a));
        proptest::prop_assert!((effective_snr(&cfg(s + d, a)) - e - d).abs() < 1e-9);
        proptest::prop_assert!(effective_snr(&cfg(s, a * 1.5)) > e);
    }

    #[test]
    fn sign_roundtrip(bits in proptest::collection::vec(0u8..2, 0..100)) {
        proptest::prop_assert_eq!(sign_to_bin(&bin_to_sign(&bits)), bits);
    }
}
