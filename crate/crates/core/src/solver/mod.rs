//! Galerkin time stepping of the truncated stochastic system.

mod nonlinear;

use num_complex::Complex64;

pub use nonlinear::{nonlinear_b, vertical_velocity, Advection, ConvolutionMethod, SineField};

use crate::error::{Result, SpeError};
use crate::linear::{mat_vec_c, ExactStepper, Mat2, OUMode};
use crate::model::ModelParams;
use crate::noise::{brownian_increment, NoiseStreams};
use crate::spectral::{hydrostatic_leray, SpectralField, Vec2c, ZERO2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Exact linear flow, `φ1`-weighted explicit advection, exact noise convolution.
    #[default]
    ExponentialEuler,
    /// Implicit linear part, explicit advection.
    SemiImplicitEuler,
    /// Fully explicit; the discrete counterpart of the estimator sums.
    EulerMaruyama,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::ExponentialEuler => "exponential_euler",
            Scheme::SemiImplicitEuler => "semi_implicit",
            Scheme::EulerMaruyama => "euler_maruyama",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential_euler" | "exponential" => Ok(Scheme::ExponentialEuler),
            "semi_implicit" | "semi_implicit_euler" => Ok(Scheme::SemiImplicitEuler),
            "euler_maruyama" | "explicit" => Ok(Scheme::EulerMaruyama),
            other => Err(SpeError::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Galerkin cutoff `|k| <= n`.
    pub n: u32,
    pub dt: f64,
    pub scheme: Scheme,
    pub convolution: ConvolutionMethod,
    pub store_every: usize,
    /// Record the additive forcing applied over each stored interval.
    pub log_noise: bool,
}

impl SolverConfig {
    pub fn new(n: u32, dt: f64) -> Self {
        Self {
            n,
            dt,
            scheme: Scheme::default(),
            convolution: ConvolutionMethod::default(),
            store_every: 1,
            log_noise: false,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_convolution(mut self, convolution: ConvolutionMethod) -> Self {
        self.convolution = convolution;
        self
    }

    pub fn with_store_every(mut self, store_every: usize) -> Self {
        self.store_every = store_every;
        self
    }

    pub fn with_noise_log(mut self, log_noise: bool) -> Self {
        self.log_noise = log_noise;
        self
    }

    /// Checks basic ranges and, for the explicit scheme, `dt ν_max N^2 < 2`.
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.n == 0 {
            return Err(SpeError::InvalidParameter("truncation must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SpeError::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.store_every == 0 {
            return Err(SpeError::InvalidParameter("store_every must be >= 1".into()));
        }
        if self.scheme == Scheme::EulerMaruyama {
            let nu_max = params.nu_h.max(params.nu_z);
            let lam = nu_max * (self.n as f64).powi(2);
            if self.dt * lam >= 2.0 {
                return Err(SpeError::Unstable(format!(
                    "explicit step dt={} exceeds the bound for nu_max*N^2={lam}",
                    self.dt
                )));
            }
        }
        Ok(())
    }
}

struct ModeStep {
    transition: Mat2,
    phi: Mat2,
    /// `(I + dt M)^{-1}`
    implicit: Mat2,
    /// `λ` and rotation rate.
    rates: (f64, f64),
    exact: ExactStepper,
    noise: [f64; 2],
}

/// Precomputed per-mode propagators for one `(params, cfg)` pair.
pub struct Stepper {
    params: ModelParams,
    cfg: SolverConfig,
    modes: std::sync::Arc<crate::spectral::ModeSet>,
    per_mode: Vec<ModeStep>,
    advection: Advection,
}

impl Stepper {
    /// Accepts zero viscosities; [`simulate_path`] requires positive ones.
    pub fn new(params: &ModelParams, cfg: &SolverConfig) -> Result<Self> {
        if !(params.nu_h >= 0.0 && params.nu_z >= 0.0) {
            return Err(SpeError::InvalidParameter("viscosities must be nonnegative".into()));
        }
        params.noise.validate()?;
        cfg.validate(params)?;
        let modes = crate::spectral::ModeSet::new(cfg.n)?;
        let dt = cfg.dt;
        let per_mode = modes
            .modes()
            .iter()
            .map(|k| {
                let ou = OUMode::new(*k, params);
                let a = 1.0 + dt * ou.lambda;
                let b = dt * ou.rotation;
                let det = a * a + b * b;
                Ok(ModeStep {
                    transition: ou.transition(dt),
                    phi: ou.phi(dt),
                    implicit: [[a / det, b / det], [-b / det, a / det]],
                    rates: (ou.lambda, ou.rotation),
                    exact: ExactStepper::new(&ou, dt)?,
                    noise: [ou.amp * ou.direction[0], ou.amp * ou.direction[1]],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *params,
            cfg: *cfg,
            advection: Advection::new(cfg.n, cfg.convolution),
            modes,
            per_mode,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn mode_set(&self) -> &std::sync::Arc<crate::spectral::ModeSet> {
        &self.modes
    }

    /// Additive forcing for one step drawn from per-mode streams.
    pub fn sample_forcing(&self, streams: &mut NoiseStreams) -> Vec<Vec2c> {
        self.modes
            .modes()
            .iter()
            .zip(&self.per_mode)
            .enumerate()
            .map(|(i, (k, m))| match self.cfg.scheme {
                Scheme::ExponentialEuler => m.exact.forcing(streams.stream(i)),
                _ => {
                    let dw = brownian_increment(k, self.cfg.dt, streams.stream(i));
                    [dw * m.noise[0], dw * m.noise[1]]
                }
            })
            .collect()
    }

    /// `σ_k ΔW_k` for given Brownian increments.
    pub fn forcing_from_increments(&self, increments: &[Complex64]) -> Result<Vec<Vec2c>> {
        if increments.len() != self.per_mode.len() {
            return Err(SpeError::InvalidParameter(format!(
                "{} increments for {} modes",
                increments.len(),
                self.per_mode.len()
            )));
        }
        Ok(increments
            .iter()
            .zip(&self.per_mode)
            .map(|(dw, m)| [dw * m.noise[0], dw * m.noise[1]])
            .collect())
    }

    /// `P B_N(V, V)`, or zero when advection is disabled.
    pub fn advection_term(&mut self, state: &SpectralField) -> Result<SpectralField> {
        if !self.params.nonlinear {
            return Ok(SpectralField::zeros_on(self.modes.clone()));
        }
        let n = self.cfg.n;
        Ok(hydrostatic_leray(&self.advection.evaluate(state, state, n)?))
    }

    /// One step with a given additive forcing.
    pub fn step(&mut self, state: &SpectralField, forcing: &[Vec2c]) -> Result<SpectralField> {
        if state.truncation() != self.cfg.n {
            return Err(SpeError::TruncationMismatch {
                left: state.truncation(),
                right: self.cfg.n,
            });
        }
        if forcing.len() != self.per_mode.len() {
            return Err(SpeError::InvalidParameter("forcing length mismatch".into()));
        }
        let adv = self.advection_term(state)?;
        let dt = self.cfg.dt;
        let mut next = state.clone();
        for (((out, v), b), (m, xi)) in next
            .coeffs_mut()
            .iter_mut()
            .zip(state.coeffs())
            .zip(adv.coeffs())
            .zip(self.per_mode.iter().zip(forcing))
        {
            *out = match self.cfg.scheme {
                Scheme::ExponentialEuler => {
                    let e = mat_vec_c(&m.transition, v);
                    let p = mat_vec_c(&m.phi, b);
                    [e[0] - p[0] + xi[0], e[1] - p[1] + xi[1]]
                }
                Scheme::SemiImplicitEuler => {
                    let rhs = [v[0] - b[0] * dt + xi[0], v[1] - b[1] * dt + xi[1]];
                    mat_vec_c(&m.implicit, &rhs)
                }
                Scheme::EulerMaruyama => {
                    let (lam, rot) = m.rates;
                    // M v = λ v + f J v, J (u, v) = (-v, u)
                    let mv = [v[0] * lam - v[1] * rot, v[1] * lam + v[0] * rot];
                    [
                        v[0] - (mv[0] + b[0]) * dt + xi[0],
                        v[1] - (mv[1] + b[1]) * dt + xi[1],
                    ]
                }
            };
        }
        next.enforce_reality();
        Ok(next)
    }
}

/// A sampled solution path.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub params: ModelParams,
    pub solver: Option<SolverConfig>,
    pub seed: u64,
    pub replication: u64,
    /// Forcing summed over each stored interval, aligned with the state's modes.
    pub noise_log: Option<Vec<Vec<Vec2c>>>,
}

impl Trajectory {
    pub fn truncation(&self) -> u32 {
        self.states.first().map(|s| s.truncation()).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.states.len() || self.states.is_empty() {
            return Err(SpeError::InvalidParameter("times and states must align and be nonempty".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpeError::InvalidParameter("times must be strictly increasing".into()));
        }
        let n = self.truncation();
        if let Some(s) = self.states.iter().find(|s| s.truncation() != n) {
            return Err(SpeError::TruncationMismatch {
                left: n,
                right: s.truncation(),
            });
        }
        if let Some(log) = &self.noise_log {
            if log.len() + 1 != self.states.len() {
                return Err(SpeError::InvalidParameter("noise log must have one entry per interval".into()));
            }
        }
        Ok(())
    }
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    let steps = (t_final / dt).round();
    if steps < 1.0 || (steps * dt - t_final).abs() > 1e-9 * t_final {
        return Err(SpeError::InvalidParameter(format!(
            "final time {t_final} is not a whole number of steps of {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Integrates from `v0` over `[0, T]`; one noise stream per mode keyed by
/// `(seed, replication, mode)`.
pub fn simulate_path(
    params: &ModelParams,
    v0: &SpectralField,
    cfg: &SolverConfig,
    seed: u64,
    replication: u64,
) -> Result<Trajectory> {
    params.validate()?;
    v0.validate(1e-10)?;
    let v0 = v0.retruncate(cfg.n)?;
    let mut stepper = Stepper::new(params, cfg)?;
    let steps = step_count(params.t_final, cfg.dt)?;
    if steps % cfg.store_every != 0 {
        return Err(SpeError::InvalidParameter(format!(
            "store_every={} does not divide {steps} steps",
            cfg.store_every
        )));
    }
    let mut streams = NoiseStreams::new(seed, replication, stepper.mode_set().modes());
    let mut times = vec![0.0];
    let mut states = vec![v0.clone()];
    let mut log = cfg.log_noise.then(Vec::new);
    let mut pending = vec![ZERO2; stepper.mode_set().len()];
    let mut state = v0;
    for step in 1..=steps {
        let forcing = stepper.sample_forcing(&mut streams);
        state = stepper.step(&state, &forcing)?;
        if !state.is_finite() {
            return Err(SpeError::BlowUp { step });
        }
        debug_assert!(state.validate(1e-8).is_ok());
        if log.is_some() {
            for (p, f) in pending.iter_mut().zip(&forcing) {
                p[0] += f[0];
                p[1] += f[1];
            }
        }
        if step % cfg.store_every == 0 {
            times.push(step as f64 * cfg.dt);
            states.push(state.clone());
            if let Some(l) = log.as_mut() {
                let fresh = vec![ZERO2; pending.len()];
                l.push(std::mem::replace(&mut pending, fresh));
            }
        }
    }
    Ok(Trajectory {
        times,
        states,
        params: *params,
        solver: Some(*cfg),
        seed,
        replication,
        noise_log: log,
    })
}
