use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spe_core::solver::{nonlinear_b, vertical_velocity, ConvolutionMethod};
use spe_core::spectral::{hydrostatic_leray, inner_product, ModeIndex, SpectralField};

fn rel_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    let d = a - b;
    (d.norm_sq() / a.norm_sq().max(b.norm_sq())).sqrt()
}

#[test]
fn direct_and_pseudospectral_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let f = SpectralField::random_smooth(4, 0.5, &mut rng).unwrap();
        let g = SpectralField::random_smooth(4, 0.5, &mut rng).unwrap();
        let a = nonlinear_b(&f, &g, ConvolutionMethod::Direct, None).unwrap();
        let b = nonlinear_b(&f, &g, ConvolutionMethod::PseudoSpectral, None).unwrap();
        let r = rel_diff(&a, &b);
        assert!(r < 1e-12, "relative difference {r}");
    }
}

#[test]
fn advection_is_energy_neutral() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for method in [ConvolutionMethod::Direct, ConvolutionMethod::PseudoSpectral] {
        let f = SpectralField::random_smooth(4, 0.0, &mut rng).unwrap();
        let b = nonlinear_b(&f, &f, method, None).unwrap();
        let e = inner_product(&b, &f).unwrap();
        let scale = b.norm_sq().sqrt() * f.norm_sq().sqrt();
        assert!(e.abs() <= 1e-12 * scale, "{method:?}: {e} vs {scale}");
        let pb = hydrostatic_leray(&b);
        assert!(inner_product(&pb, &f).unwrap().abs() <= 1e-12 * scale);
    }
}

#[test]
fn zero_argument_gives_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = SpectralField::random_smooth(3, 0.0, &mut rng).unwrap();
    let z = SpectralField::zeros(3).unwrap();
    let b = nonlinear_b(&z, &g, ConvolutionMethod::Direct, None).unwrap();
    assert_eq!(b.norm_sq(), 0.0);
}

#[test]
fn barotropic_field_has_no_vertical_velocity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = SpectralField::random_smooth(4, 0.0, &mut rng).unwrap();
    let bar = spe_core::spectral::project(&f, spe_core::spectral::ModeSelector::Barotropic);
    assert!(vertical_velocity(&bar).coeffs().iter().all(|c| c.norm() == 0.0));
    // horizontal coefficients orthogonal to k' everywhere
    let perp = f.map_modes(|k, _| {
        let [a, b] = k.horizontal();
        [Complex64::new(-b, 0.3 * b), Complex64::new(a, -0.3 * a)]
    });
    let w = vertical_velocity(&perp);
    assert!(w.coeffs().iter().all(|c| c.norm() < 1e-15));
}

#[test]
fn single_barotropic_mode_self_advection_vanishes_on_itself() {
    let mut f = SpectralField::zeros(3).unwrap();
    let k = ModeIndex::new(1, 2, 0).unwrap();
    f.set(&k, [Complex64::new(-2.0, 0.5), Complex64::new(1.0, -0.25)]).unwrap();
    let b = hydrostatic_leray(&nonlinear_b(&f, &f, ConvolutionMethod::Direct, None).unwrap());
    assert!(b.norm_sq() < 1e-28);
}
