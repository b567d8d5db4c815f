//! Exact solution, exact sampling and closed-form moments of the linear
//! (Stokes plus rotation) system, one Ornstein–Uhlenbeck process per mode.
//!
//! Each mode solves `dU + M U dt = amp c dW` with `M = λ I + f J`,
//! `J = [[0, -1], [1, 0]]`. Barotropic modes have `f = 0` because the
//! rotation term is a pure gradient there and is removed by the projection.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SpeError};
use crate::model::ModelParams;
use crate::spectral::{enumerate_modes, ModeIndex, ModeSelector, Vec2c};

pub type Mat2 = [[f64; 2]; 2];

/// `(1 - e^{-x}) / x`, equal to 1 at 0.
pub(crate) fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x / 2.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Complex `(1 - e^{-w}) / w`.
pub(crate) fn phi1c(w: Complex64) -> Complex64 {
    if w.norm() < 1e-3 {
        Complex64::new(1.0, 0.0) - w / 2.0 + w * w / 6.0 - w * w * w / 24.0 + w * w * w * w / 120.0
    } else {
        (Complex64::new(1.0, 0.0) - (-w).exp()) / w
    }
}

/// `(e^{x} - 1) / x` for complex `x`.
fn expm1_ratio(x: Complex64) -> Complex64 {
    if x.norm() < 1e-3 {
        Complex64::new(1.0, 0.0) + x / 2.0 + x * x / 6.0 + x * x * x / 24.0 + x * x * x * x / 120.0
    } else {
        (x.exp() - 1.0) / x
    }
}

/// `(x - 1 + e^{-x}) / x^2`, equal to 1/2 at 0.
fn psi(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

/// Lower-triangular factor of a symmetric positive semidefinite 2×2 matrix.
pub(crate) fn cholesky2(c: &Mat2) -> Mat2 {
    let l11 = c[0][0].max(0.0).sqrt();
    if l11 > 1e-300 {
        let l21 = c[1][0] / l11;
        let l22 = (c[1][1] - l21 * l21).max(0.0).sqrt();
        [[l11, 0.0], [l21, l22]]
    } else {
        [[0.0, 0.0], [0.0, c[1][1].max(0.0).sqrt()]]
    }
}

pub(crate) fn mat_vec_c(m: &Mat2, v: &Vec2c) -> Vec2c {
    [
        v[0] * m[0][0] + v[1] * m[0][1],
        v[0] * m[1][0] + v[1] * m[1][1],
    ]
}

/// One mode of the linear system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OUMode {
    pub k: ModeIndex,
    /// Decay rate `ν_h |k'|^2 + ν_z k3^2`.
    pub lambda: f64,
    /// Rotation rate; zero on barotropic modes.
    pub rotation: f64,
    /// Noise amplitude `σ0 |k|^{-γ}`.
    pub amp: f64,
    /// Unit noise direction.
    pub direction: [f64; 2],
}

impl OUMode {
    pub fn new(k: ModeIndex, params: &ModelParams) -> Self {
        let lambda =
            params.nu_h * k.horizontal_norm_sq() as f64 + params.nu_z * k.vertical_sq() as f64;
        Self {
            k,
            lambda,
            rotation: if k.is_barotropic() { 0.0 } else { params.f0 },
            amp: params.noise.amplitude(&k),
            direction: params.noise.direction(&k),
        }
    }

    /// Coefficient is real (self-paired mode).
    pub fn is_real(&self) -> bool {
        self.k.is_self_paired()
    }

    /// `e^{-M dt}`.
    pub fn transition(&self, dt: f64) -> Mat2 {
        let d = (-self.lambda * dt).exp();
        let (s, c) = (self.rotation * dt).sin_cos();
        [[d * c, d * s], [-d * s, d * c]]
    }

    /// `M^{-1}(I - e^{-M dt})`, the exact integral of `e^{-M s}` over `[0, dt]`.
    pub fn phi(&self, dt: f64) -> Mat2 {
        let w = Complex64::new(self.lambda, self.rotation) * dt;
        // e^{-M s} acts as multiplication by e^{-(λ + i f) s} on u + i v
        let p = phi1c(w) * dt;
        [[p.re, -p.im], [p.im, p.re]]
    }

    /// Covariance of the stochastic convolution over `dt` driven by a unit
    /// real Brownian motion. Complex modes split it evenly between real and
    /// imaginary parts.
    pub fn step_covariance(&self, dt: f64) -> Mat2 {
        let a = dt * phi1(2.0 * self.lambda * dt);
        let z = Complex64::new(2.0 * self.lambda, 2.0 * self.rotation);
        let angle = self.direction[1].atan2(self.direction[0]);
        let b = Complex64::from_polar(1.0, 2.0 * angle) * phi1c(z * dt) * dt;
        let s = self.amp * self.amp / 2.0;
        [[s * (a + b.re), s * b.im], [s * b.im, s * (a - b.re)]]
    }

    /// Mean of `∫_0^T |U|^2 dt` given `|U(0)|^2`.
    pub fn time_energy_mean(&self, t: f64, initial_energy: f64) -> f64 {
        let x = 2.0 * self.lambda * t;
        self.amp * self.amp * t * t * psi(x) + initial_energy * t * phi1(x)
    }
}

/// Exact one-step sampler with precomputed transition and noise factor.
#[derive(Clone, Copy, Debug)]
pub struct ExactStepper {
    pub transition: Mat2,
    chol: Mat2,
    real: bool,
}

impl ExactStepper {
    pub fn new(mode: &OUMode, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(SpeError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            transition: mode.transition(dt),
            chol: cholesky2(&mode.step_covariance(dt)),
            real: mode.is_real(),
        })
    }

    /// Stochastic convolution over one step.
    pub fn forcing<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2c {
        let l = &self.chol;
        let mut part = || -> [f64; 2] {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            [l[0][0] * z1, l[1][0] * z1 + l[1][1] * z2]
        };
        if self.real {
            let x = part();
            [Complex64::new(x[0], 0.0), Complex64::new(x[1], 0.0)]
        } else {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let x = part();
            let y = part();
            [Complex64::new(x[0] * s, y[0] * s), Complex64::new(x[1] * s, y[1] * s)]
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &Vec2c, rng: &mut R) -> Vec2c {
        let m = mat_vec_c(&self.transition, state);
        let f = self.forcing(rng);
        [m[0] + f[0], m[1] + f[1]]
    }
}

/// Draws `U(t + dt)` given `U(t)`, exact in distribution.
pub fn ou_exact_step<R: Rng + ?Sized>(
    mode: &OUMode,
    state: &Vec2c,
    dt: f64,
    rng: &mut R,
) -> Result<Vec2c> {
    Ok(ExactStepper::new(mode, dt)?.step(state, rng))
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(SpeError::InvalidParameter(format!("horizon must be positive, got {t}")));
    }
    Ok(())
}

/// `E ∫_0^T |U|^2 dt` for a mode started at zero.
pub fn expected_time_energy(mode: &OUMode, t: f64) -> Result<f64> {
    check_horizon(t)?;
    Ok(mode.time_energy_mean(t, 0.0))
}

/// `Var ∫_0^T |U|^2 dt` for a mode started at zero.
///
/// Equals `2 amp^4 ∫_0^T h(s) g(T - s) ds` for a real mode, half that for a
/// complex one, with `h = a^2 + |b|^2` built from the step covariance and
/// `g(r) = (1 - e^{-2λr}) / (2λ)`.
pub fn variance_time_energy(mode: &OUMode, t: f64) -> Result<f64> {
    check_horizon(t)?;
    let lam = mode.lambda;
    let integral = if lam * t >= 0.05 {
        closed_form_hg(lam, mode.rotation, t)
    } else {
        quadrature_hg(lam, mode.rotation, t)
    };
    let real_var = 2.0 * mode.amp.powi(4) * integral;
    Ok(if mode.is_real() { real_var } else { real_var / 2.0 })
}

fn closed_form_hg(lam: f64, rot: f64, t: f64) -> f64 {
    let z = Complex64::new(2.0 * lam, 2.0 * rot);
    let ca = 1.0 / (4.0 * lam * lam);
    let cb = 1.0 / z.norm_sqr();
    let two_lam = Complex64::new(2.0 * lam, 0.0);
    // ∫_0^T e^{-p s} g(T - s) ds
    let kernel = |p: Complex64| -> Complex64 {
        let direct = expm1_ratio(-p * t) * t;
        let w = two_lam - p;
        let damped = if (w * t).norm() < 1e-3 {
            expm1_ratio(w * t) * t * (-2.0 * lam * t).exp()
        } else {
            ((-p * t).exp() - (-2.0 * lam * t).exp()) / w
        };
        (direct - damped) / (2.0 * lam)
    };
    let re = |c: f64, p: Complex64| (kernel(p) * c).re;
    re(ca + cb, Complex64::new(0.0, 0.0)) + re(-2.0 * ca, Complex64::new(2.0 * lam, 0.0))
        + re(ca + cb, Complex64::new(4.0 * lam, 0.0))
        - 2.0 * (kernel(z) * cb).re
}

fn quadrature_hg(lam: f64, rot: f64, t: f64) -> f64 {
    let z = Complex64::new(2.0 * lam, 2.0 * rot);
    let integrand = |s: f64| {
        let a = s * phi1(2.0 * lam * s);
        let b = (phi1c(z * s) * s).norm_sqr();
        let r = t - s;
        (a * a + b) * r * phi1(2.0 * lam * r)
    };
    gauss_legendre_composite(integrand, 0.0, t, 64)
}

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite 8-point Gauss–Legendre rule.
pub(crate) fn gauss_legendre_composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = h / 2.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            total += w * half * (f(mid - half * x) + f(mid + half * x));
        }
    }
    total
}

fn check_order_exponent(beta: f64, gamma: f64) -> Result<()> {
    if !(beta > gamma / 2.0) {
        return Err(SpeError::InvalidParameter(format!(
            "beta must exceed gamma/2 = {}, got {beta}",
            gamma / 2.0
        )));
    }
    Ok(())
}

/// `∫_{S^2} dΩ / (ν_h sin^2 θ + ν_z cos^2 θ)`.
fn anisotropic_solid_angle(nu_h: f64, nu_z: f64) -> f64 {
    let d = nu_z - nu_h;
    let line = if d.abs() < 1e-14 * nu_h {
        2.0 / nu_h
    } else if d > 0.0 {
        2.0 * (d / nu_h).sqrt().atan() / (nu_h * d).sqrt()
    } else {
        let e = -d;
        2.0 * (e / nu_h).sqrt().atanh() / (nu_h * e).sqrt()
    };
    2.0 * PI * line
}

/// Leading-order growth of `E ∫_0^T ||A^β P_N U||^2 dt` over the modes picked
/// by `sel`.
///
/// Barotropic: `σ0^2 T/(2ν_h) π/(2β-γ) N^{4β-2γ}`. Baroclinic: a continuum
/// integral over the ball with anisotropic decay, growing like
/// `N^{4β-2γ+1}`. Resonant: `σ0^2 T/(ν_h + ν_z/q) π/(2β-γ) N^{4β-2γ}`, which
/// treats the resonant set as a two-dimensional family; the exact lattice sum
/// is much smaller because the resonant set is sparse.
pub fn expected_norm_order(beta: f64, sel: ModeSelector, params: &ModelParams, n: u32) -> Result<f64> {
    params.validate()?;
    let gamma = params.noise.gamma;
    check_order_exponent(beta, gamma)?;
    let s2t = params.noise.sigma0.powi(2) * params.t_final;
    let nn = n as f64;
    let p = 4.0 * beta - 2.0 * gamma;
    let barotropic = s2t / (2.0 * params.nu_h) * PI / (2.0 * beta - gamma) * nn.powf(p);
    let baroclinic =
        s2t / 2.0 * anisotropic_solid_angle(params.nu_h, params.nu_z) / (p + 1.0) * nn.powf(p + 1.0);
    Ok(match sel {
        ModeSelector::Barotropic => barotropic,
        ModeSelector::Baroclinic => baroclinic,
        ModeSelector::All => barotropic + baroclinic,
        ModeSelector::Resonant(q) => {
            s2t / (params.nu_h + params.nu_z / q.as_f64()) * PI / (2.0 * beta - gamma) * nn.powf(p)
        }
    })
}

/// Exact `Σ |k|^{4β} E ∫_0^T |U_k|^2 dt` over the full lattice `1 <= |k| <= N`
/// matching `sel`, both signs of every component counted.
pub fn lattice_energy_sum(beta: f64, sel: ModeSelector, params: &ModelParams, n: u32) -> Result<f64> {
    params.validate()?;
    let mut total = 0.0;
    for k in enumerate_modes(n, sel)? {
        let mode = OUMode::new(k, params);
        total += (k.norm_sq() as f64).powf(2.0 * beta) * expected_time_energy(&mode, params.t_final)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(lambda: f64, rotation: f64, amp: f64) -> OUMode {
        OUMode {
            k: ModeIndex::new(1, 0, 0).unwrap(),
            lambda,
            rotation,
            amp,
            direction: [0.0, 1.0],
        }
    }

    #[test]
    fn closed_form_matches_quadrature_branch() {
        for &(lam, rot, t) in &[(0.3, 0.0, 1.0), (1.0, 2.0, 1.0), (4.0, 0.5, 0.7), (0.06, 3.0, 1.0)] {
            let c = closed_form_hg(lam, rot, t);
            let q = quadrature_hg(lam, rot, t);
            assert!((c - q).abs() <= 1e-10 * q, "{lam} {rot}: {c} vs {q}");
        }
    }

    #[test]
    fn huge_decay_rate_does_not_overflow() {
        let v = variance_time_energy(&mode(1e6, 1.0, 1.0), 1.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
        let e = expected_time_energy(&mode(1e6, 0.0, 1.0), 1.0).unwrap();
        assert!((e * 2e6 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn zero_decay_limits() {
        let m = mode(0.0, 0.0, 2.0);
        assert!((expected_time_energy(&m, 3.0).unwrap() - 4.0 * 9.0 / 2.0).abs() < 1e-12);
        let c = m.step_covariance(0.5);
        assert!((c[0][0] + c[1][1] - 4.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn horizon_must_be_positive() {
        assert!(expected_time_energy(&mode(1.0, 0.0, 1.0), 0.0).is_err());
        assert!(variance_time_energy(&mode(1.0, 0.0, 1.0), -1.0).is_err());
    }

    #[test]
    fn solid_angle_isotropic_limit() {
        let iso = anisotropic_solid_angle(2.0, 2.0);
        assert!((iso - 4.0 * PI / 2.0).abs() < 1e-12);
        let near = anisotropic_solid_angle(2.0, 2.0 + 1e-9);
        assert!((near - iso).abs() < 1e-6);
        let below = anisotropic_solid_angle(2.0, 2.0 - 1e-6);
        assert!((below - iso).abs() < 1e-5);
    }

    #[test]
    fn phi_matches_series_sum() {
        let m = mode(1.3, 0.7, 1.0);
        let dt = 0.2;
        let p = m.phi(dt);
        // midpoint quadrature of e^{-M s}
        let n = 20000;
        let mut acc = [[0.0; 2]; 2];
        for i in 0..n {
            let s = (i as f64 + 0.5) * dt / n as f64;
            let e = m.transition(s);
            for r in 0..2 {
                for c in 0..2 {
                    acc[r][c] += e[r][c] * dt / n as f64;
                }
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                assert!((acc[r][c] - p[r][c]).abs() < 1e-9);
            }
        }
    }
}
