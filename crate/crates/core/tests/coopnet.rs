use hetnet_lab::coopnet::{
    best_relay_outage, destination_decode, ml_decode, network_encode, outage_probability,
    simulate_round, transmit, Constellation, CoopConfig, DecodeOutcome, Equation, Fidelity,
    LinkMeans, PrimeField, RankSet,
};
use hetnet_lab::rng::derive_rng;
use hetnet_lab::C64;
use num_bigint::BigUint;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

mod common;
use common::exhaustive_rank;

fn q_function(x: f64) -> f64 {
    1.0 - Normal::new(0.0, 1.0).unwrap().cdf(x)
}

#[test]
fn bpsk_symbol_error_rate_matches_q_function() {
    let c = Constellation::psk(2);
    let n = 400_000;
    for snr_db in [0.0f64, 4.0, 7.0] {
        let snr = 10f64.powf(snr_db / 10.0);
        let mut rng = derive_rng(1, "bpsk", snr_db as u64);
        let bits: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let y = transmit(&c.modulate(&bits), C64::new(1.0, 0.0), snr, 1.0, &mut rng);
        let decoded = ml_decode(&y, C64::new(1.0, 0.0), snr, &c);
        let errors = bits.iter().zip(&decoded).filter(|(a, b)| a != b).count();
        let ser = errors as f64 / n as f64;
        let oracle = q_function((2.0 * snr).sqrt());
        let sd = (oracle * (1.0 - oracle) / n as f64).sqrt();
        assert!(
            (ser - oracle).abs() <= 5.0 * sd,
            "{snr_db} dB: {ser} vs {oracle}"
        );
    }
}

#[test]
fn vanishing_snr_is_a_coin_flip() {
    let c = Constellation::psk(2);
    let n = 200_000;
    let mut rng = derive_rng(2, "coin", 0);
    let bits: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let y = transmit(&c.modulate(&bits), C64::new(1.0, 0.0), 1e-8, 1.0, &mut rng);
    let decoded = ml_decode(&y, C64::new(1.0, 0.0), 1e-8, &c);
    let ser = bits.iter().zip(&decoded).filter(|(a, b)| a != b).count() as f64 / n as f64;
    assert!((ser - 0.5).abs() < 0.01, "{ser}");
}

#[test]
fn noiseless_links_decode_exactly() {
    for q in [2u32, 3, 5, 7] {
        let c = Constellation::psk(q);
        let mut rng = derive_rng(3, "clean", q.into());
        let frame: Vec<u32> = (0..64).map(|_| rng.random_range(0..q)).collect();
        let h = C64::new(0.3, -0.8);
        let y = transmit(&c.modulate(&frame), h, 2.0, 0.0, &mut rng);
        assert_eq!(ml_decode(&y, h, 2.0, &c), frame);
    }
}

#[test]
fn network_coding_matches_big_integer_arithmetic() {
    for q in [2u32, 5, 7, 257, 65_521] {
        let field = PrimeField::new(q).unwrap();
        let mut rng = derive_rng(4, "nc", q.into());
        for _ in 0..200 {
            let k = rng.random_range(1..6);
            let len = rng.random_range(1..20);
            let frames: Vec<Vec<u32>> = (0..k)
                .map(|_| (0..len).map(|_| rng.random_range(0..q)).collect())
                .collect();
            let alpha: Vec<u32> = (0..k).map(|_| rng.random_range(1..q)).collect();
            let coded = network_encode(&frames, &alpha, &field).unwrap();
            for i in 0..len {
                let sum: BigUint = frames
                    .iter()
                    .zip(&alpha)
                    .map(|(f, &a)| BigUint::from(a) * BigUint::from(f[i]))
                    .sum();
                assert_eq!(BigUint::from(coded[i]), sum % BigUint::from(q));
            }
        }
    }
    let f = PrimeField::new(5).unwrap();
    assert!(network_encode(&[vec![1, 2]], &[1, 2], &f).is_err());
}

#[test]
fn exhaustive_rank_oracle_sanity() {
    assert_eq!(exhaustive_rank(&[vec![1, 1], vec![1, 1]], 2, 2), 1);
    assert_eq!(exhaustive_rank(&[vec![1, 2], vec![2, 4]], 2, 5), 1);
    assert_eq!(exhaustive_rank(&[vec![1, 0], vec![0, 3]], 2, 7), 2);
    assert_eq!(exhaustive_rank(&[], 3, 5), 0);
}

#[test]
fn recovery_agrees_with_rank_oracle_under_erasures() {
    let mut rank_deficient = 0;
    for q in [2u32, 5, 7] {
        let field = PrimeField::new(q).unwrap();
        for round in 0..300u64 {
            let mut rng = derive_rng(6, "erasure-recovery", u64::from(q) * 1000 + round);
            let k = rng.random_range(1..=4);
            let l = rng.random_range(1..=4);
            let cfg = CoopConfig {
                num_sources: k + 1,
                source_ranks: RankSet::top(k),
                num_relays: l,
                relay_ranks: RankSet::top(l),
                noise_variance: 0.0,
                field_order: field,
                frame_length: 8,
                ..CoopConfig::default()
            };
            let r = simulate_round(&cfg, &mut rng).unwrap();
            assert!(!r.is_outage());
            let mut eqs = Vec::new();
            for (i, f) in r.frames.iter().enumerate() {
                if rng.random_bool(0.4) {
                    eqs.push(Equation::direct(i, k, f.clone()));
                }
            }
            for (a, c) in r.alpha.iter().zip(&r.coded_frames) {
                if rng.random_bool(0.6) {
                    eqs.push(Equation::coded(a.clone(), c.clone()));
                }
            }
            let coeffs: Vec<Vec<u32>> = eqs.iter().map(|e| e.coefficients.clone()).collect();
            let rank = exhaustive_rank(&coeffs, k, q);
            match destination_decode(&eqs, k, &field) {
                DecodeOutcome::Recovered(frames) => {
                    assert_eq!(rank, k);
                    assert_eq!(frames, r.frames);
                }
                DecodeOutcome::Outage { rank: reported } => {
                    assert_eq!(reported, rank);
                    assert!(rank < k);
                    rank_deficient += 1;
                }
            }
        }
    }
    assert!(
        rank_deficient > 50,
        "erasure pattern too mild: {rank_deficient}"
    );
}

#[test]
fn outage_estimates_are_reproducible_and_in_range() {
    let cfg = CoopConfig {
        tx_snr: 3.0,
        ..CoopConfig::default()
    };
    let a = outage_probability(&cfg, 3000, 8).unwrap();
    let b = outage_probability(&cfg, 3000, 8).unwrap();
    assert_eq!(a, b);
    assert!(a.ci_low <= a.probability && a.probability <= a.ci_high);
    let better = CoopConfig {
        tx_snr: 30.0,
        ..cfg.clone()
    };
    assert!(outage_probability(&better, 3000, 8).unwrap().probability < a.probability);
}

#[test]
fn best_relay_with_one_source_has_closed_form() {
    // One source, M relays: g_(1) = max_r min(Exp, Exp), each min ~ Exp(mean theta/2).
    let theta = 2.0;
    let cfg = CoopConfig {
        num_sources: 1,
        source_ranks: RankSet::top(1),
        num_relays: 4,
        relay_ranks: RankSet::top(1),
        tx_snr: 1.0,
        noise_variance: 1.0,
        mean_gain: LinkMeans {
            source_destination: theta,
            source_relay: theta,
            relay_destination: theta,
        },
        fidelity: Fidelity::Erasure,
        ..CoopConfig::default()
    };
    let x = 1.0;
    let est = best_relay_outage(&cfg, x, 200_000, 3).unwrap();
    let oracle = (1.0 - (-2.0 * x / theta).exp()).powi(4);
    assert!(
        (est.probability - oracle).abs() < 0.005,
        "{} vs {oracle}",
        est.probability
    );
}
