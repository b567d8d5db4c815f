use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spe_core::estimators::*;
use spe_core::solver::{simulate_path, Scheme, SolverConfig, Trajectory};
use spe_core::spectral::{ModeIndex, ModeSelector, Resonance, SpectralField};
use spe_core::{ModelParams, SpeError};

fn params(nonlinear: bool, sigma0: f64) -> ModelParams {
    let mut p = ModelParams::default();
    p.noise.gamma = 4.5;
    p.noise.sigma0 = sigma0;
    p.t_final = 0.05;
    p.nonlinear = nonlinear;
    p
}

fn smooth(n: u32, seed: u64) -> SpectralField {
    SpectralField::random_smooth(n, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn explicit_path(p: &ModelParams, n: u32, seed: u64) -> Trajectory {
    let cfg = SolverConfig::new(n, 1e-3).with_scheme(Scheme::EulerMaruyama);
    simulate_path(p, &smooth(n, seed), &cfg, seed, 0).unwrap()
}

/// Trajectory holding the same field at two times.
fn frozen(f: &SpectralField, t: f64, nonlinear: bool) -> Trajectory {
    Trajectory {
        times: vec![0.0, t],
        states: vec![f.clone(), f.clone()],
        params: params(nonlinear, 1.0),
        solver: None,
        seed: 0,
        replication: 0,
        noise_log: None,
    }
}

fn cfg(variant: Variant, n_obs: u32) -> EstimatorConfig {
    EstimatorConfig::new(4.0, Resonance::one(), variant, n_obs)
}

#[test]
fn noiseless_paths_recover_viscosities_exactly() {
    for nonlinear in [false, true] {
        let p = params(nonlinear, 0.0);
        let traj = explicit_path(&p, 5, 3);
        for variant in [Variant::V1, Variant::V2] {
            let c = cfg(variant, 5);
            let h = estimate_nu_h(&traj, &c).unwrap();
            let z = estimate_nu_z(&traj, &c).unwrap();
            let zh = estimate_nu_z_hat(&traj, &c).unwrap();
            assert!((h.value - p.nu_h).abs() < 1e-9, "{variant}: {}", h.value);
            assert!((z.value - p.nu_z).abs() < 1e-9, "{variant}: {}", z.value);
            assert!((zh.value - p.nu_z).abs() < 1e-9, "{variant}: {}", zh.value);
        }
    }
}

#[test]
fn variants_agree_at_full_resolution() {
    let p = params(true, 1.0);
    let traj = explicit_path(&p, 4, 9);
    let a = estimate_nu_z(&traj, &cfg(Variant::V1, 4)).unwrap();
    let b = estimate_nu_z(&traj, &cfg(Variant::V2, 4)).unwrap();
    assert!((a.value - b.value).abs() < 1e-12 * a.value.abs().max(1.0));
    assert!(a.parts.nonlinear != 0.0);
    let c = estimate_nu_z(&traj, &cfg(Variant::V3, 4)).unwrap();
    assert_eq!(c.parts.nonlinear, 0.0);
    // below full resolution V1 sees the unobserved modes
    let d = estimate_nu_h(&traj, &cfg(Variant::V1, 3)).unwrap();
    let e = estimate_nu_h(&traj, &cfg(Variant::V2, 3)).unwrap();
    assert!(d.parts.nonlinear != e.parts.nonlinear);
}

#[test]
fn observed_truncation_is_checked() {
    let traj = explicit_path(&params(false, 1.0), 3, 1);
    assert!(estimate_nu_h(&traj, &cfg(Variant::V1, 4)).is_err());
    assert!(estimate_nu_h(&traj, &cfg(Variant::V1, 0)).is_err());
}

#[test]
fn empty_resonant_set_is_reported() {
    let traj = explicit_path(&params(false, 1.0), 3, 1);
    match estimate_nu_z_hat(&traj, &cfg(Variant::V3, 1)) {
        Err(SpeError::EmptySelection(msg)) => assert!(msg.contains("smallest truncation with resonant modes is 2"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn zero_denominator_is_an_error() {
    let traj = frozen(&SpectralField::zeros(2).unwrap(), 1.0, false);
    assert!(matches!(
        estimate_nu_h(&traj, &cfg(Variant::V3, 2)),
        Err(SpeError::DegenerateDenominator { .. })
    ));
}

#[test]
fn cross_term_equals_q_times_denominator_on_resonant_modes() {
    let p = params(false, 1.0);
    let traj = explicit_path(&p, 6, 4);
    for q in [Resonance::one(), Resonance::new(2, 1).unwrap(), Resonance::new(1, 2).unwrap()] {
        let c = EstimatorConfig::new(4.0, q, Variant::V3, 6);
        let stats = PathStatistics::from_trajectory(&traj, &c).unwrap();
        let sel = ModeSelector::Resonant(q);
        let cross = stats.cross(4.0, sel, 6).unwrap();
        let den = stats.quadratic((0.0, 1.0, 2.0), sel, 6).unwrap();
        assert!((cross - q.as_f64() * den).abs() < 1e-12 * den, "q={q}");
    }
}

#[test]
fn integral_examples() {
    let mut f = SpectralField::zeros(2).unwrap();
    let m = ModeIndex::new(1, 0, 1).unwrap();
    let c = [Complex64::new(0.3, -0.4), Complex64::new(0.0, 0.0)];
    f.set(&m, c).unwrap();
    let t = 2.0;
    let traj = frozen(&f, t, false);
    let all = ModeSelector::All;
    assert_eq!(ito_integral(&traj, (1.0, 0.0, 0.0), all, 2).unwrap(), 0.0);
    // the stored mode also stands for its conjugate partner: multiplicity 2
    let mu = 2.0f64.powf(1.5);
    let q = quadratic_integral(&traj, (0.0, 0.0, 1.5), all, 2).unwrap();
    assert!((q - 2.0 * mu * mu * 0.25 * t).abs() < 1e-12);
    let alpha = 3.0;
    let x = cross_integral(&traj, alpha, ModeSelector::Baroclinic, 2).unwrap();
    assert!((x - 2.0 * 2f64.powf(alpha) * 0.25 * t).abs() < 1e-12);
    assert!(cross_integral(&traj, alpha, ModeSelector::Barotropic, 2).unwrap() == 0.0);
    let zero = frozen(&SpectralField::zeros(2).unwrap(), t, true);
    assert_eq!(quadratic_integral(&zero, (1.0, 0.0, 0.0), all, 2).unwrap(), 0.0);
    assert_eq!(nonlinear_integral(&zero, (1.0, 0.0, 0.0), all, Variant::V2, 2).unwrap(), 0.0);
}

#[test]
fn single_barotropic_mode_has_no_nonlinear_contribution() {
    let mut f = SpectralField::zeros(3).unwrap();
    f.set(&ModeIndex::new(1, 2, 0).unwrap(), [Complex64::new(-2.0, 0.5), Complex64::new(1.0, -0.25)])
        .unwrap();
    let traj = frozen(&f, 1.0, true);
    let v = nonlinear_integral(&traj, (1.0, 0.0, 0.0), ModeSelector::Barotropic, Variant::V2, 3).unwrap();
    assert!(v.abs() < 1e-14);
}

#[test]
fn ito_sum_of_deterministic_decay_converges() {
    let f0 = smooth(2, 5);
    let t: f64 = 1.0;
    let target = 0.5 * f0.norm_sq() * ((-2.0 * t).exp() - 1.0);
    let mut errors = Vec::new();
    for steps in [100usize, 200, 400] {
        let dt = t / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        let states = times.iter().map(|s| &f0 * (-s).exp()).collect();
        let traj = Trajectory {
            times,
            states,
            ..frozen(&f0, t, false)
        };
        let v = ito_integral(&traj, (0.0, 0.0, 0.0), ModeSelector::All, 2).unwrap();
        errors.push((v - target).abs());
    }
    assert!(errors[2] < 1e-2 * target.abs());
    assert!((errors[0] / errors[1] - 2.0).abs() < 0.1 && (errors[1] / errors[2] - 2.0).abs() < 0.1);
}

#[test]
fn midpoint_rule_is_biased() {
    // Itô (left-point) sums are unbiased; a symmetric rule adds half the
    // quadratic variation and pushes the estimate well away from the truth
    let mut p = params(false, 1.0);
    p.noise.gamma = 2.0;
    p.t_final = 0.2;
    let n = 6;
    let c = cfg(Variant::V3, n);
    let (mut ito_err, mut mid_err) = (0.0, 0.0);
    let reps = 20;
    for r in 0..reps {
        let cfg_s = SolverConfig::new(n, 2e-3).with_scheme(Scheme::EulerMaruyama);
        let traj = simulate_path(&p, &SpectralField::zeros(n).unwrap(), &cfg_s, 77, r).unwrap();
        let est = estimate_nu_h(&traj, &c).unwrap();
        let qv: f64 = traj
            .states
            .windows(2)
            .map(|s| {
                let d = &s[1] - &s[0];
                quadratic_integral(
                    &frozen(&d, 1.0, false),
                    (2.5, 0.0, 0.0),
                    ModeSelector::Barotropic,
                    n,
                )
                .unwrap()
            })
            .sum();
        let mid = -(est.parts.ito + 0.5 * qv) / est.denominator;
        ito_err += (est.value - p.nu_h) / reps as f64;
        mid_err += (mid - p.nu_h) / reps as f64;
    }
    assert!(ito_err.abs() < 0.05 * p.nu_h, "Itô bias {ito_err}");
    assert!(mid_err.abs() > 10.0 * ito_err.abs(), "midpoint bias {mid_err}");
}

#[test]
fn time_rescaling_rescales_estimates() {
    let p = params(false, 1.0);
    let traj = explicit_path(&p, 4, 6);
    let s = 3.0;
    let mut scaled = traj.clone();
    scaled.times.iter_mut().for_each(|t| *t *= s);
    scaled.params.nu_h /= s;
    scaled.params.nu_z /= s;
    scaled.params.t_final *= s;
    scaled.params.noise.sigma0 /= s.sqrt();
    for variant in Variant::ALL {
        let c = cfg(variant, 4);
        for (a, b) in [
            (estimate_nu_h(&traj, &c), estimate_nu_h(&scaled, &c)),
            (estimate_nu_z(&traj, &c), estimate_nu_z(&scaled, &c)),
            (estimate_nu_z_hat(&traj, &c), estimate_nu_z_hat(&scaled, &c)),
        ] {
            let (a, b) = (a.unwrap().value, b.unwrap().value);
            assert!((a - s * b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn martingale_representation_is_exact_for_explicit_paths() {
    let p = params(true, 1.0);
    let n = 4;
    let cfg_s = SolverConfig::new(n, 1e-3)
        .with_scheme(Scheme::EulerMaruyama)
        .with_noise_log(true);
    let traj = simulate_path(&p, &smooth(n, 2), &cfg_s, 5, 0).unwrap();
    let c = cfg(Variant::V1, n);
    let stats = PathStatistics::from_trajectory(&traj, &c).unwrap();
    for family in Family::ALL {
        let direct = estimate(&stats, family, &c).unwrap().value;
        let rep = martingale_representation(&stats, family, &c, &p).unwrap();
        assert!((direct - rep).abs() < 1e-10, "{family}: {direct} vs {rep}");
    }
}

#[test]
fn covariance_example_values() {
    let p = params(false, 1.0);
    let s = theoretical_covariance(&p, 4.0, Resonance::one(), 1.0).unwrap();
    let pi = std::f64::consts::PI;
    assert!((s[0][0] - 4.5 / pi).abs() < 1e-12);
    assert!((s[0][1] + 4.5 / pi).abs() < 1e-12 && s[0][1] == s[1][0]);
    assert!((s[1][1] - 11.25 / pi).abs() < 1e-12);
    assert!((s[0][0] - 1.43239).abs() < 1e-5 && (s[1][1] - 3.58099).abs() < 1e-5);
    for q in [Resonance::new(1, 2).unwrap(), Resonance::new(3, 1).unwrap()] {
        let t = theoretical_covariance(&p, 4.0, q, 1.0).unwrap();
        assert_eq!(t[0][0], s[0][0]);
        assert!(t[1][1] > 0.0 && t[0][0] * t[1][1] - t[0][1] * t[1][0] >= 0.0);
    }
    assert!(theoretical_covariance(&p, 3.0, Resonance::one(), 1.0).is_err());
}

#[test]
fn confidence_interval_examples() {
    let (lo, hi) = confidence_interval(1.0, 0.0, 8, 0.95).unwrap();
    assert_eq!((lo, hi), (1.0, 1.0));
    let (lo, hi) = confidence_interval(0.0, 1.0, 1, 0.95).unwrap();
    assert!((hi - 1.959964).abs() < 1e-6 && (lo + hi).abs() < 1e-15);
    let (lo, hi) = confidence_interval(2.0, 4.0, 4, 0.95).unwrap();
    assert!((hi - lo - 2.0 * 1.959964 * 2.0 / 16.0).abs() < 1e-6);
    assert!(confidence_interval(1.0, 1.0, 4, 1.0).is_err());
    assert!(confidence_interval(1.0, -1.0, 4, 0.9).is_err());
}

#[test]
fn regime_warnings() {
    let c = cfg(Variant::V3, 4);
    assert!(c.regime_warnings(4.5).is_empty());
    assert_eq!(c.regime_warnings(5.5).len(), 1);
    assert_eq!(c.regime_warnings(7.0).len(), 2);
}
