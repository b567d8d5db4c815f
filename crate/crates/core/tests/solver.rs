use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spe_core::io::{trajectory_from_str, trajectory_to_string};
use spe_core::linear::{ExactStepper, OUMode};
use spe_core::noise::{brownian_increment, mode_rng, NoiseStreams};
use spe_core::solver::*;
use spe_core::spectral::{inner_product, perp, project, ModeSelector, SpectralField};
use spe_core::{ModelParams, SpeError};

fn params(nonlinear: bool) -> ModelParams {
    let mut p = ModelParams::default();
    p.noise.gamma = 2.0;
    p.t_final = 0.1;
    p.nonlinear = nonlinear;
    p
}

fn smooth(n: u32, seed: u64) -> SpectralField {
    SpectralField::random_smooth(n, 2.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn linear_exponential_euler_is_exact() {
    let p = params(false);
    let cfg = SolverConfig::new(3, 0.01);
    let v0 = smooth(3, 1);
    let traj = simulate_path(&p, &v0, &cfg, 7, 2).unwrap();
    let last = traj.states.last().unwrap();
    for (k, got) in last.iter() {
        let mode = OUMode::new(k, &p);
        let stepper = ExactStepper::new(&mode, cfg.dt).unwrap();
        let mut rng = mode_rng(7, 2, &k);
        let mut x = v0.get(&k);
        for _ in 0..10 {
            x = stepper.step(&x, &mut rng);
        }
        assert!((x[0] - got[0]).norm() < 1e-14 && (x[1] - got[1]).norm() < 1e-14, "{k}");
    }
}

#[test]
fn noiseless_zero_start_stays_zero() {
    let mut p = params(true);
    p.noise.sigma0 = 0.0;
    for scheme in [Scheme::ExponentialEuler, Scheme::SemiImplicitEuler, Scheme::EulerMaruyama] {
        let cfg = SolverConfig::new(3, 0.01).with_scheme(scheme);
        let traj = simulate_path(&p, &SpectralField::zeros(3).unwrap(), &cfg, 1, 0).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.states.iter().all(|s| s.norm_sq() == 0.0), "{scheme}");
    }
}

#[test]
fn fixed_seed_is_bit_identical() {
    let p = params(true);
    let cfg = SolverConfig::new(3, 0.01).with_store_every(2).with_noise_log(true);
    let v0 = smooth(3, 4);
    let a = simulate_path(&p, &v0, &cfg, 99, 5).unwrap();
    let b = simulate_path(&p, &v0, &cfg, 99, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(trajectory_to_string(&a), trajectory_to_string(&b));
    let c = simulate_path(&p, &v0, &cfg, 99, 6).unwrap();
    assert_ne!(a.states.last(), c.states.last());
}

#[test]
fn trajectory_text_round_trip() {
    let p = params(true);
    let cfg = SolverConfig::new(2, 0.02)
        .with_scheme(Scheme::SemiImplicitEuler)
        .with_noise_log(true);
    let traj = simulate_path(&p, &smooth(2, 8), &cfg, 3, 1).unwrap();
    let text = trajectory_to_string(&traj);
    let back = trajectory_from_str(&text).unwrap();
    assert_eq!(back, traj);
    assert_eq!(trajectory_to_string(&back), text);
}

#[test]
fn store_every_must_divide_steps() {
    let p = params(false);
    let cfg = SolverConfig::new(2, 0.01).with_store_every(3);
    let err = simulate_path(&p, &SpectralField::zeros(2).unwrap(), &cfg, 0, 0);
    assert!(matches!(err, Err(SpeError::InvalidParameter(_))));
}

#[test]
fn explicit_scheme_checks_stability() {
    let p = params(false);
    let cfg = SolverConfig::new(8, 0.05).with_scheme(Scheme::EulerMaruyama);
    assert!(matches!(cfg.validate(&p), Err(SpeError::Unstable(_))));
    assert!(SolverConfig::new(8, 0.05).validate(&p).is_ok());
}

#[test]
fn scheme_names_round_trip() {
    for s in [Scheme::ExponentialEuler, Scheme::SemiImplicitEuler, Scheme::EulerMaruyama] {
        assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
    }
    for c in [ConvolutionMethod::Auto, ConvolutionMethod::Direct, ConvolutionMethod::PseudoSpectral] {
        assert_eq!(c.to_string().parse::<ConvolutionMethod>().unwrap(), c);
    }
}

#[test]
fn blow_up_is_reported_with_step() {
    let mut p = params(true);
    p.t_final = 5.0;
    p.nu_h = 1e-3;
    p.nu_z = 1e-3;
    let cfg = SolverConfig::new(3, 0.05).with_scheme(Scheme::EulerMaruyama);
    let v0 = &smooth(3, 2) * 1e3;
    match simulate_path(&p, &v0, &cfg, 0, 0) {
        Err(SpeError::BlowUp { step }) => assert!(step >= 1),
        other => panic!("expected blow-up, got {:?}", other.map(|t| t.len())),
    }
}

#[test]
fn rotation_does_no_work() {
    let f = smooth(4, 3);
    let clin = project(&f, ModeSelector::Baroclinic);
    assert!(inner_product(&clin, &perp(&clin)).unwrap().abs() < 1e-14);
}

/// Energy change of one deterministic step with inviscid dynamics.
fn one_step_energy_change(scheme: Scheme, dt: f64, v0: &SpectralField) -> f64 {
    let mut p = params(true);
    p.nu_h = 0.0;
    p.nu_z = 0.0;
    p.noise.sigma0 = 0.0;
    let cfg = SolverConfig::new(v0.truncation(), dt).with_scheme(scheme);
    let mut stepper = Stepper::new(&p, &cfg).unwrap();
    let zero = vec![[Complex64::new(0.0, 0.0); 2]; stepper.mode_set().len()];
    let next = stepper.step(v0, &zero).unwrap();
    (next.norm_sq() - v0.norm_sq()).abs()
}

#[test]
fn inviscid_energy_error_is_second_order() {
    let v0 = smooth(3, 12);
    for scheme in [Scheme::EulerMaruyama, Scheme::ExponentialEuler] {
        let e1 = one_step_energy_change(scheme, 1e-2, &v0);
        let e2 = one_step_energy_change(scheme, 5e-3, &v0);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.3, "{scheme}: order {order}");
        assert!(e1 < 1e-2 * v0.norm_sq(), "{scheme}: {e1}");
    }
}

/// Final state on a coarse grid driven by fine Brownian increments summed.
fn path_with_increments(p: &ModelParams, v0: &SpectralField, scheme: Scheme, fine: &[Vec<Complex64>], factor: usize, h: f64) -> SpectralField {
    let cfg = SolverConfig::new(v0.truncation(), h * factor as f64).with_scheme(scheme);
    let mut stepper = Stepper::new(p, &cfg).unwrap();
    let mut state = v0.clone();
    for chunk in fine.chunks(factor) {
        let mut dw = vec![Complex64::new(0.0, 0.0); chunk[0].len()];
        for row in chunk {
            for (a, b) in dw.iter_mut().zip(row) {
                *a += b;
            }
        }
        let forcing = stepper.forcing_from_increments(&dw).unwrap();
        state = stepper.step(&state, &forcing).unwrap();
    }
    state
}

#[test]
fn strong_convergence_with_additive_noise() {
    let p = params(true);
    let n = 3;
    let h = 1e-4;
    let steps = (p.t_final / h).round() as usize;
    let v0 = smooth(n, 21);
    let modes = SpectralField::zeros(n).unwrap().modes().to_vec();
    let factors = [8usize, 16, 32, 64];
    for scheme in [Scheme::SemiImplicitEuler, Scheme::EulerMaruyama] {
        let mut errs = vec![0.0; factors.len()];
        let paths = 8;
        for r in 0..paths {
            let mut streams = NoiseStreams::new(31, r, &modes);
            let fine: Vec<Vec<Complex64>> = (0..steps)
                .map(|_| {
                    modes
                        .iter()
                        .enumerate()
                        .map(|(i, k)| brownian_increment(k, h, streams.stream(i)))
                        .collect()
                })
                .collect();
            let reference = path_with_increments(&p, &v0, scheme, &fine, 1, h);
            for (e, &f) in errs.iter_mut().zip(&factors) {
                let coarse = path_with_increments(&p, &v0, scheme, &fine, f, h);
                *e += (&coarse - &reference).norm_sq() / paths as f64;
            }
        }
        let rms: Vec<f64> = errs.iter().map(|e| e.sqrt()).collect();
        let slope = (rms[3] / rms[0]).log2() / 3.0;
        assert!(slope > 0.8, "{scheme}: observed order {slope} from {rms:?}");
    }
}
