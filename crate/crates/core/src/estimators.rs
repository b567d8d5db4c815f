//! Viscosity estimators from finitely many observed Fourier modes.
//!
//! Every path functional is a weighted sum over modes of three per-mode
//! sums: the Itô sum `Σ Re⟨f_i, f_{i+1} - f_i⟩`, the quadratic sum
//! `Σ |f_i|^2 Δt`, and the advection pairing `Σ Re⟨f_i, (P B)_i⟩ Δt`. The
//! weights are eigenvalues of `A_h^a A_z^b A^c`, so per-mode sums are
//! accumulated once and reduced per estimator.

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SpeError};
use crate::model::ModelParams;
use crate::solver::{Advection, ConvolutionMethod, Trajectory};
use crate::spectral::{
    hydrostatic_leray, operator_eigenvalue, pair_dot, smallest_resonant_truncation, ModeIndex,
    ModeSelector, Resonance, Vec2c,
};

/// Denominators below this are rejected.
pub const DENOMINATOR_FLOOR: f64 = 1e-30;

/// Search bound for the smallest usable truncation of an empty resonant set.
const RESONANT_SEARCH_BOUND: u32 = 64;

/// Operator exponents `(a, b, c)` of `A_h^a A_z^b A^c`.
pub type Weights = (f64, f64, f64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Advection from the full simulated state, projected to observed modes.
    V1,
    /// Advection of the observed modes only.
    V2,
    /// Advection dropped.
    V3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::V1, Variant::V2, Variant::V3];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v1" | "1" => Ok(Variant::V1),
            "v2" | "2" => Ok(Variant::V2),
            "v3" | "3" => Ok(Variant::V3),
            other => Err(SpeError::InvalidParameter(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Horizontal viscosity from barotropic modes.
    NuH,
    /// Vertical viscosity from all baroclinic modes.
    NuZ,
    /// Vertical viscosity from resonant modes.
    NuZHat,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::NuH, Family::NuZ, Family::NuZHat];

    pub fn selector(&self, q: Resonance) -> ModeSelector {
        match self {
            Family::NuH => ModeSelector::Barotropic,
            Family::NuZ => ModeSelector::Baroclinic,
            Family::NuZHat => ModeSelector::Resonant(q),
        }
    }

    pub fn true_value(&self, params: &ModelParams) -> f64 {
        match self {
            Family::NuH => params.nu_h,
            _ => params.nu_z,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::NuH => "nu_h",
            Family::NuZ => "nu_z",
            Family::NuZHat => "nu_z_hat",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nu_h" => Ok(Family::NuH),
            "nu_z" => Ok(Family::NuZ),
            "nu_z_hat" => Ok(Family::NuZHat),
            other => Err(SpeError::InvalidParameter(format!("unknown estimator family '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub q: Resonance,
    pub variant: Variant,
    pub n_obs: u32,
    pub convolution: ConvolutionMethod,
    /// Use every `subsample`-th stored sample.
    pub subsample: usize,
}

impl EstimatorConfig {
    pub fn new(alpha: f64, q: Resonance, variant: Variant, n_obs: u32) -> Self {
        Self {
            alpha,
            q,
            variant,
            n_obs,
            convolution: ConvolutionMethod::Auto,
            subsample: 1,
        }
    }

    /// Regime warnings for the consistency (`α > γ - 2`) and normality
    /// (`α > γ - 1`) conditions.
    pub fn regime_warnings(&self, gamma: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha > gamma - 2.0) {
            out.push(format!(
                "alpha={} outside the consistency regime alpha > gamma-2 = {}",
                self.alpha,
                gamma - 2.0
            ));
        }
        if !(self.alpha > gamma - 1.0) {
            out.push(format!(
                "alpha={} outside the normality regime alpha > gamma-1 = {}",
                self.alpha,
                gamma - 1.0
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EstimateParts {
    pub ito: f64,
    pub nonlinear: f64,
    /// Cross term `∫⟨A_h A^α f, A_z f⟩`, vertical families only.
    pub cross: Option<f64>,
    /// Same-variant horizontal estimate used with the cross term.
    pub inner_nu_h: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateResult {
    pub family: Family,
    pub variant: Variant,
    pub n_obs: u32,
    pub value: f64,
    pub denominator: f64,
    pub parts: EstimateParts,
}

/// Per-mode sufficient statistics of an observed path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathStatistics {
    modes: Vec<ModeIndex>,
    ito: Vec<f64>,
    quad: Vec<f64>,
    nonlinear: Vec<f64>,
    martingale: Option<Vec<f64>>,
}

impl PathStatistics {
    /// Zeroed statistics over an arbitrary mode list (canonical modes).
    pub fn with_modes(modes: Vec<ModeIndex>, track_martingale: bool) -> Self {
        let n = modes.len();
        Self {
            modes,
            ito: vec![0.0; n],
            quad: vec![0.0; n],
            nonlinear: vec![0.0; n],
            martingale: track_martingale.then(|| vec![0.0; n]),
        }
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    /// Adds one left-endpoint interval for mode `i`.
    #[inline]
    pub fn accumulate(&mut self, i: usize, prev: &Vec2c, next: &Vec2c, dt: f64) {
        let inc = [next[0] - prev[0], next[1] - prev[1]];
        self.ito[i] += pair_dot(prev, &inc);
        self.quad[i] += pair_dot(prev, prev) * dt;
    }

    /// Adds a precomputed Itô integral contribution for mode `i`.
    pub fn add_ito(&mut self, i: usize, value: f64) {
        self.ito[i] += value;
    }

    /// Adds `|f|^2 dt` for mode `i` without touching the Itô sum.
    #[inline]
    pub fn accumulate_quadratic(&mut self, i: usize, prev: &Vec2c, dt: f64) {
        self.quad[i] += pair_dot(prev, prev) * dt;
    }

    /// Adds `Re⟨f_i, ξ_i⟩` for a logged forcing increment.
    #[inline]
    pub fn accumulate_martingale(&mut self, i: usize, prev: &Vec2c, forcing: &Vec2c) {
        if let Some(m) = self.martingale.as_mut() {
            m[i] += pair_dot(prev, forcing);
        }
    }

    #[inline]
    pub fn accumulate_nonlinear(&mut self, i: usize, prev: &Vec2c, advection: &Vec2c, dt: f64) {
        self.nonlinear[i] += pair_dot(prev, advection) * dt;
    }

    /// Statistics of the modes `|k| <= n_obs` of a stored trajectory. The
    /// advection pairing follows `variant`; it is zero when the trajectory
    /// was simulated without advection.
    pub fn from_trajectory(traj: &Trajectory, cfg: &EstimatorConfig) -> Result<Self> {
        traj.validate()?;
        let n_sim = traj.truncation();
        if cfg.n_obs == 0 || cfg.n_obs > n_sim {
            return Err(SpeError::InvalidParameter(format!(
                "observed truncation {} must lie in 1..={n_sim}",
                cfg.n_obs
            )));
        }
        if cfg.subsample == 0 {
            return Err(SpeError::InvalidParameter("subsample must be >= 1".into()));
        }
        let observed: Vec<_> = traj
            .states
            .iter()
            .step_by(cfg.subsample)
            .map(|s| s.retruncate(cfg.n_obs))
            .collect::<Result<_>>()?;
        let times: Vec<f64> = traj.times.iter().step_by(cfg.subsample).copied().collect();
        let log = if cfg.subsample == 1 { traj.noise_log.as_ref() } else { None };
        let modes = observed[0].modes().to_vec();
        let mut stats = Self::with_modes(modes, log.is_some());

        // the log is aligned with the simulated modes
        let sim_modes = traj.states[0].mode_set();
        let log_positions: Vec<usize> = stats
            .modes
            .iter()
            .map(|k| sim_modes.position(k).expect("observed mode inside simulated set"))
            .collect();

        let advect = traj.params.nonlinear && cfg.variant != Variant::V3;
        let mut full_adv = Advection::new(n_sim, cfg.convolution);
        let mut obs_adv = Advection::new(cfg.n_obs, cfg.convolution);

        for i in 0..observed.len() - 1 {
            let dt = times[i + 1] - times[i];
            let (prev, next) = (&observed[i], &observed[i + 1]);
            for (j, (a, b)) in prev.coeffs().iter().zip(next.coeffs()).enumerate() {
                stats.accumulate(j, a, b, dt);
            }
            if let Some(log) = log {
                let forcing = &log[i];
                for (j, &pos) in log_positions.iter().enumerate() {
                    stats.accumulate_martingale(j, &prev.coeffs()[j], &forcing[pos]);
                }
            }
            if advect {
                let b = match cfg.variant {
                    Variant::V1 => {
                        let s = &traj.states[i * cfg.subsample];
                        full_adv.evaluate(s, s, cfg.n_obs)?
                    }
                    _ => obs_adv.evaluate(prev, prev, cfg.n_obs)?,
                };
                let pb = hydrostatic_leray(&b);
                for (j, (a, c)) in prev.coeffs().iter().zip(pb.coeffs()).enumerate() {
                    stats.accumulate_nonlinear(j, a, c, dt);
                }
            }
        }
        Ok(stats)
    }

    fn reduce(&self, sel: ModeSelector, n_obs: u32, term: impl Fn(usize, &ModeIndex) -> Result<f64>) -> Result<(f64, usize)> {
        let r2 = (n_obs as i64) * (n_obs as i64);
        let mut total = 0.0;
        let mut count = 0;
        for (i, k) in self.modes.iter().enumerate() {
            if k.norm_sq() <= r2 && sel.contains(k) {
                total += k.multiplicity() * term(i, k)?;
                count += 1;
            }
        }
        Ok((total, count))
    }

    fn nonempty(&self, sel: ModeSelector, n_obs: u32, term: impl Fn(usize, &ModeIndex) -> Result<f64>) -> Result<f64> {
        let (v, count) = self.reduce(sel, n_obs, term)?;
        if count == 0 {
            return Err(empty_selection(sel, n_obs));
        }
        Ok(v)
    }

    /// `Σ ⟨W f_i, f_{i+1} - f_i⟩` with `W = A_h^a A_z^b A^c`.
    pub fn ito(&self, w: Weights, sel: ModeSelector, n_obs: u32) -> Result<f64> {
        self.nonempty(sel, n_obs, |i, k| Ok(operator_eigenvalue(k, w.0, w.1, w.2)? * self.ito[i]))
    }

    /// `Σ ||W f_i||^2 Δt`.
    pub fn quadratic(&self, w: Weights, sel: ModeSelector, n_obs: u32) -> Result<f64> {
        self.nonempty(sel, n_obs, |i, k| {
            Ok(operator_eigenvalue(k, w.0, w.1, w.2)?.powi(2) * self.quad[i])
        })
    }

    /// `Σ ⟨A_h A^α f_i, A_z f_i⟩ Δt`.
    pub fn cross(&self, alpha: f64, sel: ModeSelector, n_obs: u32) -> Result<f64> {
        self.nonempty(sel, n_obs, |i, k| Ok(operator_eigenvalue(k, 1.0, 1.0, alpha)? * self.quad[i]))
    }

    /// `Σ ⟨W f_i, (P B)_i⟩ Δt`.
    pub fn nonlinear(&self, w: Weights, sel: ModeSelector, n_obs: u32) -> Result<f64> {
        self.nonempty(sel, n_obs, |i, k| {
            Ok(operator_eigenvalue(k, w.0, w.1, w.2)? * self.nonlinear[i])
        })
    }

    /// `Σ ⟨W f_i, ξ_i⟩` over the logged forcing.
    pub fn martingale(&self, w: Weights, sel: ModeSelector, n_obs: u32) -> Result<f64> {
        let m = self
            .martingale
            .as_ref()
            .ok_or_else(|| SpeError::InvalidParameter("trajectory carries no noise log".into()))?;
        self.nonempty(sel, n_obs, |i, k| Ok(operator_eigenvalue(k, w.0, w.1, w.2)? * m[i]))
    }
}

fn empty_selection(sel: ModeSelector, n_obs: u32) -> SpeError {
    match sel {
        ModeSelector::Resonant(q) => {
            let hint = match smallest_resonant_truncation(q, RESONANT_SEARCH_BOUND) {
                Some(n) => format!("smallest truncation with resonant modes is {n}"),
                None => format!("no resonant modes up to truncation {RESONANT_SEARCH_BOUND}"),
            };
            SpeError::EmptySelection(format!("no observed modes for q={q} at N={n_obs}; {hint}"))
        }
        other => SpeError::EmptySelection(format!("no observed {other} modes at N={n_obs}")),
    }
}

fn checked_denominator(value: f64) -> Result<f64> {
    if !(value >= DENOMINATOR_FLOOR) {
        return Err(SpeError::DegenerateDenominator { value });
    }
    Ok(value)
}

fn horizontal_weights(alpha: f64) -> (Weights, Weights) {
    ((1.0 + alpha, 0.0, 0.0), (1.0 + alpha / 2.0, 0.0, 0.0))
}

fn vertical_weights(alpha: f64) -> (Weights, Weights) {
    ((0.0, 1.0, alpha), (0.0, 1.0, alpha / 2.0))
}

/// Evaluates one estimator family from precomputed statistics. The variant
/// tag is recorded; the advection pairing is whatever `stats` carries.
pub fn estimate(stats: &PathStatistics, family: Family, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    let n = cfg.n_obs;
    let use_nl = cfg.variant != Variant::V3;
    let (wi, wd) = horizontal_weights(cfg.alpha);
    let bar = ModeSelector::Barotropic;
    let nu_h = |_: ()| -> Result<(f64, f64, f64)> {
        let ito = stats.ito(wi, bar, n)?;
        let nl = if use_nl { stats.nonlinear(wi, bar, n)? } else { 0.0 };
        let den = checked_denominator(stats.quadratic(wd, bar, n)?)?;
        Ok((-(ito + nl) / den, ito, nl))
    };
    match family {
        Family::NuH => {
            let (value, ito, nl) = nu_h(())?;
            let den = stats.quadratic(wd, bar, n)?;
            Ok(EstimateResult {
                family,
                variant: cfg.variant,
                n_obs: n,
                value,
                denominator: den,
                parts: EstimateParts {
                    ito,
                    nonlinear: nl,
                    cross: None,
                    inner_nu_h: None,
                },
            })
        }
        Family::NuZ | Family::NuZHat => {
            let sel = family.selector(cfg.q);
            let (vi, vd) = vertical_weights(cfg.alpha);
            let ito = stats.ito(vi, sel, n)?;
            let nl = if use_nl { stats.nonlinear(vi, sel, n)? } else { 0.0 };
            let cross = stats.cross(cfg.alpha, sel, n)?;
            let den = checked_denominator(stats.quadratic(vd, sel, n)?)?;
            let (inner, _, _) = nu_h(())?;
            Ok(EstimateResult {
                family,
                variant: cfg.variant,
                n_obs: n,
                value: -(ito + nl + inner * cross) / den,
                denominator: den,
                parts: EstimateParts {
                    ito,
                    nonlinear: nl,
                    cross: Some(cross),
                    inner_nu_h: Some(inner),
                },
            })
        }
    }
}

/// Value reconstructed from the logged forcing: the true viscosity minus the
/// martingale ratio (plus, for vertical families, the horizontal error carried
/// by the cross term). Agrees with [`estimate`] when the path was produced by
/// the explicit scheme on the same grid.
pub fn martingale_representation(
    stats: &PathStatistics,
    family: Family,
    cfg: &EstimatorConfig,
    params: &ModelParams,
) -> Result<f64> {
    let n = cfg.n_obs;
    let (wi, wd) = horizontal_weights(cfg.alpha);
    let bar = ModeSelector::Barotropic;
    let h_err = stats.martingale(wi, bar, n)? / checked_denominator(stats.quadratic(wd, bar, n)?)?;
    match family {
        Family::NuH => Ok(params.nu_h - h_err),
        Family::NuZ | Family::NuZHat => {
            let sel = family.selector(cfg.q);
            let (vi, vd) = vertical_weights(cfg.alpha);
            let den = checked_denominator(stats.quadratic(vd, sel, n)?)?;
            let cross = stats.cross(cfg.alpha, sel, n)?;
            Ok(params.nu_z - stats.martingale(vi, sel, n)? / den + h_err * cross / den)
        }
    }
}

pub fn estimate_nu_h(traj: &Trajectory, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    estimate(&PathStatistics::from_trajectory(traj, cfg)?, Family::NuH, cfg)
}

pub fn estimate_nu_z(traj: &Trajectory, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    estimate(&PathStatistics::from_trajectory(traj, cfg)?, Family::NuZ, cfg)
}

pub fn estimate_nu_z_hat(traj: &Trajectory, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    estimate(&PathStatistics::from_trajectory(traj, cfg)?, Family::NuZHat, cfg)
}

fn observed_config(n_obs: u32) -> EstimatorConfig {
    EstimatorConfig::new(0.0, Resonance::one(), Variant::V3, n_obs)
}

/// Left-endpoint `Σ ⟨W f_i, f_{i+1} - f_i⟩` over `sel`, `|k| <= n_obs`.
pub fn ito_integral(traj: &Trajectory, w: Weights, sel: ModeSelector, n_obs: u32) -> Result<f64> {
    PathStatistics::from_trajectory(traj, &observed_config(n_obs))?.ito(w, sel, n_obs)
}

/// Left-endpoint `Σ ||W f_i||^2 Δt`.
pub fn quadratic_integral(traj: &Trajectory, w: Weights, sel: ModeSelector, n_obs: u32) -> Result<f64> {
    PathStatistics::from_trajectory(traj, &observed_config(n_obs))?.quadratic(w, sel, n_obs)
}

/// Left-endpoint `Σ ⟨A_h A^α f_i, A_z f_i⟩ Δt`.
pub fn cross_integral(traj: &Trajectory, alpha: f64, sel: ModeSelector, n_obs: u32) -> Result<f64> {
    PathStatistics::from_trajectory(traj, &observed_config(n_obs))?.cross(alpha, sel, n_obs)
}

/// Left-endpoint `Σ ⟨W f_i, P B_i⟩ Δt` with `B` chosen by `variant`.
pub fn nonlinear_integral(
    traj: &Trajectory,
    w: Weights,
    sel: ModeSelector,
    variant: Variant,
    n_obs: u32,
) -> Result<f64> {
    if variant == Variant::V3 {
        return Ok(0.0);
    }
    let cfg = EstimatorConfig {
        variant,
        ..observed_config(n_obs)
    };
    PathStatistics::from_trajectory(traj, &cfg)?.nonlinear(w, sel, n_obs)
}

/// Limiting covariance of `N^2 (ν̂_h - ν_h, ν̂_z^hat - ν_z)` in the
/// independent-mode approximation.
pub fn theoretical_covariance(params: &ModelParams, alpha: f64, q: Resonance, t_final: f64) -> Result<[[f64; 2]; 2]> {
    let gamma = params.noise.gamma;
    if !(alpha > gamma - 1.0) || !(2.0 + 2.0 * alpha - 2.0 * gamma > 0.0) {
        return Err(SpeError::InvalidParameter(format!(
            "alpha={alpha} outside the regime alpha > gamma-1 = {}",
            gamma - 1.0
        )));
    }
    if !(t_final > 0.0) {
        return Err(SpeError::InvalidParameter("horizon must be positive".into()));
    }
    let shape = (2.0 + alpha - gamma).powi(2) / (2.0 + 2.0 * alpha - 2.0 * gamma);
    let pt = std::f64::consts::PI * t_final;
    let qf = q.as_f64();
    let s11 = 2.0 * params.nu_h / pt * shape;
    let s22 = ((2.0 * qf * qf + qf + 1.0) * params.nu_h + (1.0 + 1.0 / qf) * params.nu_z) / pt * shape;
    Ok([[s11, -qf * s11], [-qf * s11, s22]])
}

/// `estimate ± z √σ / N^2` with `z` the upper `(1 - level)/2` normal quantile.
pub fn confidence_interval(estimate: f64, sigma: f64, n: u32, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(SpeError::InvalidParameter(format!("level must lie in (0,1), got {level}")));
    }
    if !(sigma >= 0.0) {
        return Err(SpeError::InvalidParameter(format!("sigma must be nonnegative, got {sigma}")));
    }
    let z = normal_quantile(0.5 + level / 2.0);
    let half = z * sigma.sqrt() / (n as f64).powi(2);
    Ok((estimate - half, estimate + half))
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}
