use blockcs::channel::{acquire, listeners_for, sample_channels, ChannelConfig, ChannelModel, DuplexMode, NoiseParams};
use blockcs::model::{generate_pattern, generate_pattern_reserving};
use blockcs::signature::{MatrixParams, StructuredMatrix};
use blockcs::{Cplx, ModelParams, SizePolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pre_correction_makes_bs_observation_channel_free() {
    let p = ModelParams::new(20, 10, 5, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for model in [ChannelModel::Rayleigh, ChannelModel::UnitModulus] {
        for mode in [DuplexMode::FullDuplex, DuplexMode::HalfDuplex] {
            for _ in 0..200 {
                let reserved = (mode == DuplexMode::HalfDuplex).then_some(0);
                let x = generate_pattern_reserving(&p, 5, 4, SizePolicy::Uniform, reserved, &mut rng).unwrap();
                let m = StructuredMatrix::sample(MatrixParams::new(8, 6, 20, 10, 1.0).unwrap(), &mut rng).unwrap();
                let cfg = ChannelConfig {
                    model,
                    floor: 0.05,
                    ..ChannelConfig::default()
                };
                let ch = sample_channels(&p, 6, &listeners_for(&x, mode), &cfg, &mut rng).unwrap();
                let out = acquire(&m, &x, &ch, &NoiseParams::noiseless(), mode, &mut rng).unwrap();
                assert_eq!(out.y_bs, m.measure(&x).unwrap());
            }
        }
    }
}

#[test]
fn listener_noise_is_independent_across_listeners() {
    let p = ModelParams::new(4, 50, 1, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = blockcs::ActivationPattern::from_devices(4, 50, &[3, 7]).unwrap();
    let m = StructuredMatrix::sample(MatrixParams::new(4, 10, 4, 50, 1.0).unwrap(), &mut rng).unwrap();
    let ch = sample_channels(&p, 10, &[3, 7], &ChannelConfig::default(), &mut rng).unwrap();
    let clean = acquire(&m, &x, &ch, &NoiseParams::noiseless(), DuplexMode::FullDuplex, &mut rng).unwrap();
    let noise = NoiseParams::with_sigma(1.0).unwrap();
    let (mut cross, mut power_a, mut power_b) = (Cplx::new(0.0, 0.0), 0.0, 0.0);
    let reps = 5_000;
    for _ in 0..reps {
        let out = acquire(&m, &x, &ch, &noise, DuplexMode::FullDuplex, &mut rng).unwrap();
        for t in 0..10 {
            let a = out.y_dev[0].1[t] - clean.y_dev[0].1[t];
            let b = out.y_dev[1].1[t] - clean.y_dev[1].1[t];
            cross += a.conj() * b;
            power_a += a.norm_sqr();
            power_b += b.norm_sqr();
        }
    }
    let n = (reps * 10) as f64;
    assert!((power_a / n - 1.0).abs() < 0.05 && (power_b / n - 1.0).abs() < 0.05);
    assert!(cross.norm() / n < 0.03, "cross-correlation {}", cross.norm() / n);
}

#[test]
fn half_duplex_patterns_never_activate_heads() {
    let p = ModelParams::new(50, 8, 10, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = StructuredMatrix::sample(MatrixParams::new(16, 4, 50, 8, 1.0).unwrap(), &mut rng).unwrap();
    for _ in 0..2_000 {
        let x = generate_pattern_reserving(&p, 10, 7, SizePolicy::Fixed, Some(0), &mut rng).unwrap();
        let ch = sample_channels(&p, 4, &listeners_for(&x, DuplexMode::HalfDuplex), &ChannelConfig::default(), &mut rng)
            .unwrap();
        assert!(acquire(&m, &x, &ch, &NoiseParams::noiseless(), DuplexMode::HalfDuplex, &mut rng).is_ok());
    }
    // Without the reservation a head sooner or later transmits.
    let failures = (0..200)
        .filter(|_| {
            let x = generate_pattern(&p, 10, 7, SizePolicy::Fixed, &mut rng).unwrap();
            let ch = sample_channels(&p, 4, &listeners_for(&x, DuplexMode::HalfDuplex), &ChannelConfig::default(), &mut rng)
                .unwrap();
            acquire(&m, &x, &ch, &NoiseParams::noiseless(), DuplexMode::HalfDuplex, &mut rng).is_err()
        })
        .count();
    assert!(failures > 0);
}
