use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spe_core::spectral::*;
use spe_core::SpeError;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn k(a: i32, b: i32, d: i32) -> ModeIndex {
    ModeIndex::new(a, b, d).unwrap()
}

fn single(n: u32, m: ModeIndex, v: Vec2c) -> SpectralField {
    let mut f = SpectralField::zeros(n).unwrap();
    f.set(&m, v).unwrap();
    f
}

#[test]
fn enumerate_counts() {
    let all = enumerate_modes(1, ModeSelector::All).unwrap();
    assert_eq!(all.len(), 6);
    let res = enumerate_modes(2, ModeSelector::Resonant(Resonance::one())).unwrap();
    assert_eq!(res.len(), 8);
    for m in &res {
        assert_eq!(m.horizontal_norm_sq(), m.vertical_sq());
        assert_eq!(m.k3.abs(), 1);
    }
    assert_eq!(enumerate_modes(10, ModeSelector::Barotropic).unwrap().len(), 316);
}

#[test]
fn enumerate_rejects_zero_truncation() {
    assert!(enumerate_modes(0, ModeSelector::All).is_err());
    assert!(ModeIndex::new(0, 0, 0).is_err());
}

#[test]
fn empty_resonant_set_is_not_an_error() {
    let res = enumerate_modes(1, ModeSelector::Resonant(Resonance::one())).unwrap();
    assert!(res.is_empty());
    assert_eq!(smallest_resonant_truncation(Resonance::one(), 10), Some(2));
}

#[test]
fn eigenvalue_examples() {
    assert_eq!(operator_eigenvalue(&k(1, 2, 2), 1.0, 0.0, 0.0).unwrap(), 5.0);
    assert_eq!(operator_eigenvalue(&k(1, 2, 2), 0.0, 1.0, 1.0).unwrap(), 36.0);
    let v = operator_eigenvalue(&k(3, 4, 5), 0.5, 0.5, 0.0).unwrap();
    assert!((v - 25.0).abs() < 1e-12);
}

#[test]
fn negative_power_of_zero_factor_is_domain_error() {
    let err = operator_eigenvalue(&k(1, 0, 0), 0.0, -1.0, 0.0).unwrap_err();
    assert!(matches!(err, SpeError::OperatorDomain { .. }));
    // zero exponent on a zero factor is fine
    assert_eq!(operator_eigenvalue(&k(1, 0, 0), 0.0, 0.0, 1.0).unwrap(), 1.0);
}

#[test]
fn apply_operator_examples() {
    let f = single(2, k(0, 0, 1), [c(1.0), c(0.0)]);
    let g = apply_operator(&f, 0.0, 1.0, 0.0).unwrap();
    assert_eq!(g.get(&k(0, 0, 1)), [c(1.0), c(0.0)]);

    let z = SpectralField::zeros(3).unwrap();
    assert_eq!(apply_operator(&z, 1.0, 2.0, 0.5).unwrap().norm_sq(), 0.0);

    let mut f = SpectralField::zeros(2).unwrap();
    f.set(&k(1, 0, 0), [c(0.0), c(1.0)]).unwrap();
    f.set(&k(0, 0, 2), [c(1.0), c(0.0)]).unwrap();
    let g = apply_operator(&f, 0.0, 0.0, 1.0).unwrap();
    assert_eq!(g.get(&k(1, 0, 0)), [c(0.0), c(1.0)]);
    assert_eq!(g.get(&k(0, 0, 2)), [c(4.0), c(0.0)]);
}

#[test]
fn project_examples() {
    let bar = single(2, k(1, 1, 0), [c(1.0), c(-1.0)]);
    assert_eq!(project(&bar, ModeSelector::Baroclinic).norm_sq(), 0.0);

    let mut f = SpectralField::zeros(2).unwrap();
    f.set(&k(1, 0, 1), [c(0.0), c(1.0)]).unwrap();
    f.set(&k(1, 0, 0), [c(0.0), c(1.0)]).unwrap();
    let p = project(&f, ModeSelector::Resonant(Resonance::one()));
    assert_eq!(p.get(&k(1, 0, 1)), [c(0.0), c(1.0)]);
    assert_eq!(p.get(&k(1, 0, 0)), ZERO2);
}

#[test]
fn leray_examples() {
    let f = single(2, k(1, 0, 0), [c(1.0), c(0.0)]);
    assert_eq!(leray_h(&f).unwrap().get(&k(1, 0, 0)), ZERO2);

    let f = single(2, k(1, 0, 0), [c(0.0), c(1.0)]);
    assert_eq!(leray_h(&f).unwrap().get(&k(1, 0, 0)), [c(0.0), c(1.0)]);

    let f = single(2, k(1, 1, 0), [c(1.0), c(0.0)]);
    let v = leray_h(&f).unwrap().get(&k(1, 1, 0));
    assert!((v[0] - c(0.5)).norm() < 1e-15 && (v[1] - c(-0.5)).norm() < 1e-15);
}

#[test]
fn leray_h_rejects_baroclinic_support() {
    let f = single(2, k(1, 0, 1), [c(1.0), c(0.0)]);
    assert!(matches!(leray_h(&f), Err(SpeError::InvalidField { .. })));
}

#[test]
fn inner_product_examples() {
    // (0,0,1) is self-paired, so it is counted once
    let f = single(1, k(0, 0, 1), [c(1.0), c(0.0)]);
    assert_eq!(inner_product(&f, &f).unwrap(), 1.0);

    let f = single(2, k(1, 0, 1), [c(1.0), c(2.0)]);
    let g = single(2, k(1, 0, 1), [c(3.0), c(-1.0)]);
    // one stored mode stands for itself and its conjugate partner
    assert_eq!(inner_product(&f, &g).unwrap(), 2.0 * 1.0);

    let bar = single(2, k(1, 0, 0), [c(0.0), c(1.0)]);
    let clin = single(2, k(1, 0, 1), [c(0.0), c(1.0)]);
    assert_eq!(inner_product(&bar, &clin).unwrap(), 0.0);

    let other = SpectralField::zeros(3).unwrap();
    assert!(matches!(
        inner_product(&f, &other),
        Err(SpeError::TruncationMismatch { .. })
    ));
}

#[test]
fn set_through_partner_conjugates() {
    let mut f = SpectralField::zeros(2).unwrap();
    let v = [Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)];
    f.set(&k(1, 0, 1), v).unwrap();
    assert_eq!(f.get(&k(1, 0, 1)), v);
    assert_eq!(f.get(&k(-1, 0, 1)), [v[0].conj(), v[1].conj()]);
    assert_eq!(f.get(&k(1, 0, -1)), v);
    f.set(&k(-1, 0, 1), v).unwrap();
    assert_eq!(f.get(&k(1, 0, 1)), [v[0].conj(), v[1].conj()]);
}

#[test]
fn self_paired_modes_must_be_real() {
    let mut f = SpectralField::zeros(1).unwrap();
    let err = f.set(&k(0, 0, 1), [Complex64::new(0.0, 1.0), c(0.0)]);
    assert!(matches!(err, Err(SpeError::InvalidField { .. })));
}

#[test]
fn retruncate_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = SpectralField::random_smooth(3, 2.0, &mut rng).unwrap();
    let up = f.retruncate(5).unwrap();
    assert_eq!(up.norm_sq(), f.norm_sq());
    assert_eq!(up.retruncate(3).unwrap(), f);
    let down = f.retruncate(2).unwrap();
    assert!(down.norm_sq() <= f.norm_sq());
}

#[test]
fn random_smooth_is_in_h() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = SpectralField::random_smooth(4, 1.5, &mut rng).unwrap();
    f.validate(1e-12).unwrap();
    let again = hydrostatic_leray(&f);
    assert!(again.max_abs_diff(&f).unwrap() < 1e-14);
}

fn arb_field(n: u32) -> impl Strategy<Value = SpectralField> {
    any::<u64>().prop_map(move |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralField::random_smooth(n, 0.5, &mut rng).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(f in arb_field(3)) {
        let ip = inner_product(&f, &f).unwrap();
        prop_assert!((ip - f.norm_sq()).abs() <= 1e-12 * f.norm_sq().max(1.0));
    }

    #[test]
    fn barotropic_baroclinic_orthogonal(f in arb_field(3), g in arb_field(3)) {
        let a = project(&f, ModeSelector::Barotropic);
        let b = project(&g, ModeSelector::Baroclinic);
        prop_assert_eq!(inner_product(&a, &b).unwrap(), 0.0);
        let sum = &a + &project(&f, ModeSelector::Baroclinic);
        prop_assert!(sum.max_abs_diff(&f).unwrap() == 0.0);
    }

    #[test]
    fn projections_idempotent(f in arb_field(3)) {
        for sel in [ModeSelector::Barotropic, ModeSelector::Baroclinic, ModeSelector::Resonant(Resonance::one())] {
            let p = project(&f, sel);
            prop_assert_eq!(project(&p, sel), p.clone());
        }
        let l = hydrostatic_leray(&f);
        prop_assert!(hydrostatic_leray(&l).max_abs_diff(&l).unwrap() < 1e-14);
    }

    #[test]
    fn operator_powers_compose(
        a in -1.0f64..2.0, b in 0.0f64..2.0, c0 in -1.0f64..2.0,
        k1 in -4i32..=4, k2 in -4i32..=4, k3 in 1i32..=4,
    ) {
        let m = k(k1, k2, k3);
        prop_assume!(m.horizontal_norm_sq() > 0);
        let lhs = operator_eigenvalue(&m, a, b, c0).unwrap();
        let rhs = operator_eigenvalue(&m, a, 0.0, 0.0).unwrap()
            * operator_eigenvalue(&m, 0.0, b, 0.0).unwrap()
            * operator_eigenvalue(&m, 0.0, 0.0, c0).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs());
        let twice = operator_eigenvalue(&m, 2.0 * a, 2.0 * b, 2.0 * c0).unwrap();
        prop_assert!((twice - lhs * lhs).abs() <= 1e-10 * twice.abs());
    }

    #[test]
    fn resonant_modes_satisfy_identity(num in 1i64..4, den in 1i64..4, n in 2u32..10) {
        let q = Resonance::new(num, den).unwrap();
        for m in enumerate_modes(n, ModeSelector::Resonant(q)).unwrap() {
            prop_assert_eq!(m.horizontal_norm_sq() * q.denom(), m.vertical_sq() * q.numer());
            let kh = operator_eigenvalue(&m, 1.0, 0.0, 0.0).unwrap();
            let kz = operator_eigenvalue(&m, 0.0, 1.0, 0.0).unwrap();
            prop_assert!((kh - q.as_f64() * kz).abs() < 1e-9 * kh);
        }
    }
}
