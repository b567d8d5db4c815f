use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spe_core::noise::*;
use spe_core::spectral::{canonical_modes, ModeIndex, ModeSelector};

fn k(a: i32, b: i32, d: i32) -> ModeIndex {
    ModeIndex::new(a, b, d).unwrap()
}

fn close(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15
}

#[test]
fn coefficient_examples() {
    let spec = NoiseSpec::new(1.0, 2.0, CkRule::Perpendicular).unwrap();
    assert!(close(noise_coefficient(&spec, &k(1, 0, 0)), [0.0, 1.0]));
    assert!(close(noise_coefficient(&spec, &k(0, 2, 0)), [-0.25, 0.0]));
    let fixed = NoiseSpec::new(3.0, 2.0, CkRule::FixedUnit([1.0, 0.0])).unwrap();
    assert!(close(noise_coefficient(&fixed, &k(0, 0, 1)), [3.0, 0.0]));
}

#[test]
fn invalid_specs_rejected() {
    assert!(NoiseSpec::new(-1.0, 2.0, CkRule::Perpendicular).is_err());
    assert!(NoiseSpec::new(1.0, f64::NAN, CkRule::Perpendicular).is_err());
    assert!(NoiseSpec::new(1.0, 1.0, CkRule::Perpendicular).is_err());
    assert!(NoiseSpec::new(1.0, 2.0, CkRule::FixedUnit([1.0, 1.0])).is_err());
}

#[test]
fn ck_rule_round_trips_through_text() {
    for rule in [CkRule::Perpendicular, CkRule::FixedUnit([0.6, -0.8])] {
        let back: CkRule = rule.to_string().parse().unwrap();
        assert_eq!(back, rule);
    }
    assert!("sideways".parse::<CkRule>().is_err());
}

#[test]
fn barotropic_directions_are_divergence_free() {
    for rule in [CkRule::Perpendicular, CkRule::FixedUnit([1.0, 0.0])] {
        let spec = NoiseSpec::new(1.0, 2.0, rule).unwrap();
        for m in canonical_modes(6, ModeSelector::Barotropic) {
            let c = spec.direction(&m);
            let h = m.horizontal();
            assert!((c[0] * h[0] + c[1] * h[1]).abs() < 1e-14, "{m}");
            assert!(((c[0] * c[0] + c[1] * c[1]) - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn increments_have_unit_rate() {
    let dt = 0.01;
    let draws = 100_000;
    for m in [k(0, 0, 1), k(1, 2, 0), k(1, -1, 3)] {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mean: f64 = (0..draws)
            .map(|_| brownian_increment(&m, dt, &mut rng).norm_sqr() / dt)
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 1.0).abs() < 0.02, "{m}: {mean}");
    }
}

#[test]
fn increment_variance_scales_with_dt() {
    let modes = canonical_modes(2, ModeSelector::All);
    let second_moment = |dt: f64| {
        let mut total = 0.0;
        let reps = 4000;
        for r in 0..reps {
            let mut s = NoiseStreams::new(9, r, &modes);
            total += sample_increments(&modes, dt, &mut s)
                .unwrap()
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>();
        }
        total / (reps as f64 * modes.len() as f64)
    };
    let a = second_moment(1e-2);
    let b = second_moment(1e-4);
    assert!((a / 1e-2 - 1.0).abs() < 0.05, "{a}");
    assert!((b / 1e-4 - 1.0).abs() < 0.05, "{b}");
}

#[test]
fn streams_are_deterministic_and_truncation_free() {
    let small = canonical_modes(2, ModeSelector::All);
    let large = canonical_modes(4, ModeSelector::All);
    let mut s1 = NoiseStreams::new(42, 3, &small);
    let mut s2 = NoiseStreams::new(42, 3, &small);
    let a = sample_increments(&small, 0.1, &mut s1).unwrap();
    assert_eq!(a, sample_increments(&small, 0.1, &mut s2).unwrap());

    let mut s3 = NoiseStreams::new(42, 3, &large);
    let b = sample_increments(&large, 0.1, &mut s3).unwrap();
    for (i, m) in small.iter().enumerate() {
        let j = large.iter().position(|x| x == m).unwrap();
        assert_eq!(a[i], b[j]);
    }

    let mut other = NoiseStreams::new(42, 4, &small);
    assert_ne!(a, sample_increments(&small, 0.1, &mut other).unwrap());
}

#[test]
fn sample_increments_checks_inputs() {
    let modes = canonical_modes(1, ModeSelector::All);
    let mut s = NoiseStreams::new(1, 0, &modes);
    assert!(sample_increments(&modes, 0.0, &mut s).is_err());
    let mut short = NoiseStreams::new(1, 0, &modes[..1]);
    assert!(sample_increments(&modes, 0.1, &mut short).is_err());
}

#[test]
fn self_paired_increments_are_real() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        assert_eq!(brownian_increment(&k(0, 0, 2), 0.5, &mut rng).im, 0.0);
    }
}
