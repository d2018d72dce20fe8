//! End-to-end transceiver and channel checks against closed-form oracles.

use std::f64::consts::PI;

use afdm_pim::channel::{apply_channel_time, sample_channel, ChannelRealization, Path, PathGeometry};
use afdm_pim::detection::ml_detect;
use afdm_pim::mapping::{all_patterns, bits_to_frame, enumerate_codewords, frame_to_bits};
use afdm_pim::transceiver::{add_cpp, demodulate, modulate, remove_cpp};
use afdm_pim::{Complex64, PreChirpAlphabet, RandomSource, SystemConfig, DEFAULT_CAP_BITS};
use proptest::prelude::*;
use rand::Rng;

fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * t)
}

/// Chirp subcarrier sum evaluated directly at any (possibly negative) index.
fn closed_form(x: &[Complex64], c2: &[f64], c1: f64, n: i64) -> Complex64 {
    let big = x.len() as f64;
    let nf = n as f64;
    x.iter()
        .enumerate()
        .map(|(m, xm)| {
            let mf = m as f64;
            xm * cis(c1 * nf * nf + c2[m] * mf * mf + nf * mf / big)
        })
        .sum::<Complex64>()
        / big.sqrt()
}

#[test]
fn single_chirp_is_classic_afdm() {
    let cfg = SystemConfig::psk(8, 1, 1, 4, 2, 2).validate().unwrap();
    let c2 = std::f64::consts::SQRT_2 / 10.0;
    let a = PreChirpAlphabet::new(vec![c2]).unwrap();
    assert_eq!(cfg.b2, 0);
    let pats = all_patterns(&cfg).unwrap();
    assert_eq!(pats.len(), 1);
    let mut rng = RandomSource::new(3, 0).rng();
    for _ in 0..20 {
        let x: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let s = modulate(&x, &cfg, &a, &pats[0]).unwrap();
        for (n, got) in s.samples.iter().enumerate() {
            let want = closed_form(&x, &[c2; 8], cfg.c1, n as i64);
            assert!((got - want).norm() < 1e-12);
        }
    }
}

#[test]
fn f32_tracks_f64() {
    let cfg = SystemConfig::psk(8, 2, 4, 2, 1, 1).validate().unwrap();
    let a = PreChirpAlphabet::new(vec![0.01, 0.2, 0.41, 0.8]).unwrap();
    let pats = all_patterns(&cfg).unwrap();
    let x: Vec<Complex64> = (0..8).map(|k| Complex64::new((k as f64).cos(), 0.3 * k as f64)).collect();
    let x32: Vec<_> = x.iter().map(|z| num_complex::Complex32::new(z.re as f32, z.im as f32)).collect();
    for p in pats.iter().step_by(97) {
        let s64 = modulate(&x, &cfg, &a, p).unwrap();
        let s32 = modulate(&x32, &cfg, &a, p).unwrap();
        for (u, v) in s64.samples.iter().zip(&s32.samples) {
            assert!((u.re - v.re as f64).abs() < 1e-5 && (u.im - v.im as f64).abs() < 1e-5);
        }
    }
}

#[test]
fn noiseless_links_recover_every_payload() {
    let cfg = SystemConfig::psk(4, 2, 2, 2, 1, 1).validate().unwrap();
    let a = PreChirpAlphabet::new(vec![0.2, 0.6]).unwrap();
    let mut rng = RandomSource::new(5, 0).rng();
    for _ in 0..4 {
        let ch = sample_channel(&cfg, 2, &mut rng);
        for frame in enumerate_codewords(&cfg, &a, DEFAULT_CAP_BITS).unwrap() {
            let bits = frame.payload_bits.clone();
            let tx = add_cpp(&modulate(&frame.symbols, &cfg, &a, &frame.pcpg).unwrap(), &cfg).unwrap();
            let rx = remove_cpp(&apply_channel_time(&tx, &ch, &cfg, &mut rng, 0.0).unwrap(), &cfg).unwrap();
            let det = ml_detect(&rx.samples, &ch, &cfg, &a, DEFAULT_CAP_BITS).unwrap();
            assert_eq!(det.payload_bits, bits);
            assert_eq!(frame_to_bits(&frame, &cfg, &a).unwrap(), bits);
        }
    }
}

proptest! {
    #[test]
    fn transform_round_trip(seed in any::<u64>(), pattern in 0usize..256) {
        let cfg = SystemConfig::psk(8, 2, 4, 2, 1, 1).validate().unwrap();
        let a = PreChirpAlphabet::new(vec![0.01, 0.2, 0.41, 0.8]).unwrap();
        let p = &all_patterns(&cfg).unwrap()[pattern];
        let mut rng = RandomSource::new(seed, 0).rng();
        let x: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let s = modulate(&x, &cfg, &a, p).unwrap();
        let energy_x: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let energy_s: f64 = s.samples.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((energy_x - energy_s).abs() < 1e-10);
        let y = demodulate(&s.samples, &cfg, &a, p).unwrap();
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn prefix_is_the_chirp_periodic_extension(seed in any::<u64>(), pattern in 0usize..16) {
        let cfg = SystemConfig::psk(6, 2, 3, 2, 2, 1).validate().unwrap();
        let a = PreChirpAlphabet::new(vec![0.29, 0.62, 0.93]).unwrap();
        let p = &all_patterns(&cfg).unwrap()[pattern];
        let mut rng = RandomSource::new(seed, 1).rng();
        let x: Vec<Complex64> = (0..6).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let tx = add_cpp(&modulate(&x, &cfg, &a, p).unwrap(), &cfg).unwrap();
        let c2 = p.c2_values(&a);
        let l = cfg.cpp_length as i64;
        for (i, got) in tx.samples.iter().enumerate() {
            let want = closed_form(&x, &c2, cfg.c1, i as i64 - l);
            prop_assert!((got - want).norm() < 1e-11);
        }
    }

    #[test]
    fn channel_matches_path_sum(seed in any::<u64>(), d in 0usize..3, alpha in -2i64..=2, re in -1.0..1.0f64, im in -1.0..1.0f64) {
        let cfg = SystemConfig::psk(8, 2, 4, 2, 2, 2).validate().unwrap();
        let a = PreChirpAlphabet::new(vec![0.01, 0.2, 0.41, 0.8]).unwrap();
        let p = &all_patterns(&cfg).unwrap()[(seed % 256) as usize];
        let mut rng = RandomSource::new(seed, 2).rng();
        let x: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let h = Complex64::new(re, im);
        let ch = ChannelRealization::new(vec![
            Path { gain: h, geometry: PathGeometry::new(d, alpha) },
            Path { gain: Complex64::new(0.5, 0.0), geometry: PathGeometry::new(0, 0) },
        ]);
        let tx = add_cpp(&modulate(&x, &cfg, &a, p).unwrap(), &cfg).unwrap();
        let rx = remove_cpp(&apply_channel_time(&tx, &ch, &cfg, &mut rng, 0.0).unwrap(), &cfg).unwrap();
        let c2 = p.c2_values(&a);
        for n in 0..8i64 {
            let want = h * closed_form(&x, &c2, cfg.c1, n - d as i64) * cis(-(alpha as f64) * n as f64 / 8.0)
                + 0.5 * closed_form(&x, &c2, cfg.c1, n);
            prop_assert!((rx.samples[n as usize] - want).norm() < 1e-11);
        }
    }

    #[test]
    fn payload_survives_mapping(bits in proptest::collection::vec(0u8..2, 6)) {
        let cfg = SystemConfig::psk(4, 2, 2, 2, 0, 1).validate().unwrap();
        let a = PreChirpAlphabet::new(vec![0.2, 0.6]).unwrap();
        let f = bits_to_frame(&bits, &cfg, &a).unwrap();
        prop_assert_eq!(frame_to_bits(&f, &cfg, &a).unwrap(), bits);
    }
}
