use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Result, SpeError};
use crate::estimators::{EstimatorConfig, Family, Variant};
use crate::model::ModelParams;
use crate::noise::NoiseSpec;
use crate::solver::SolverConfig;
use crate::spectral::Resonance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RunMode {
    /// Per-mode exact OU sampling; no solver involved.
    #[default]
    LinearExact,
    /// The Galerkin solver with advection switched off.
    LinearViaSolver,
    FullNonlinear,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::LinearExact => "linear_exact",
            RunMode::LinearViaSolver => "linear_via_solver",
            RunMode::FullNonlinear => "full_nonlinear",
        })
    }
}

impl FromStr for RunMode {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "linear_exact" | "linearexact" => Ok(RunMode::LinearExact),
            "linear_via_solver" | "linearviasolver" => Ok(RunMode::LinearViaSolver),
            "full_nonlinear" | "fullnonlinear" => Ok(RunMode::FullNonlinear),
            other => Err(SpeError::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// How the exact sampler evaluates `∫⟨W U, dU⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ItoRule {
    /// `linear_exact` uses the Itô formula, solver modes use left sums.
    #[default]
    Auto,
    /// Left-endpoint sum over the sampling grid.
    LeftSum,
    /// `(|U_T|^2 - |U_0|^2 - amp^2 T) / 2`, the continuous-observation value.
    ItoFormula,
}

impl fmt::Display for ItoRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItoRule::Auto => "auto",
            ItoRule::LeftSum => "left_sum",
            ItoRule::ItoFormula => "ito_formula",
        })
    }
}

impl FromStr for ItoRule {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(ItoRule::Auto),
            "left_sum" => Ok(ItoRule::LeftSum),
            "ito_formula" => Ok(ItoRule::ItoFormula),
            other => Err(SpeError::InvalidParameter(format!("unknown ito_rule '{other}'"))),
        }
    }
}

/// Initial condition for every replication.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum InitialCondition {
    #[default]
    Zero,
    /// Random smooth field with spectral decay `|k|^{-s}`, drawn per replication.
    Smooth(f64),
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Zero => f.write_str("zero"),
            InitialCondition::Smooth(s) => write!(f, "smooth:{s:e}"),
        }
    }
}

impl FromStr for InitialCondition {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(InitialCondition::Zero);
        }
        s.strip_prefix("smooth:")
            .and_then(|d| d.trim().parse().ok())
            .map(InitialCondition::Smooth)
            .ok_or_else(|| SpeError::InvalidParameter(format!("unknown init '{s}'")))
    }
}

/// Gate thresholds. Defaults are calibrated for about 10^3 replications.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateSettings {
    /// Required `RMSE(first N) / RMSE(last N)` in consistency runs.
    pub consistency_ratio: f64,
    /// Relative tolerance on each covariance entry in normality runs.
    pub covariance_tolerance: f64,
    /// Standard errors allowed for means and correlations.
    pub z_limit: f64,
    /// Significance level for normality tests.
    pub normality_level: f64,
    /// Required share of modes within `z_limit` in linear validation.
    pub mode_fraction: f64,
}

impl Default for GateSettings {
    fn default() -> Self {
        Self {
            consistency_ratio: 3.0,
            covariance_tolerance: 0.25,
            z_limit: 3.0,
            normality_level: 0.01,
            mode_fraction: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    /// `n` is the simulation truncation; zero means `max(n_sweep)`.
    pub solver: SolverConfig,
    /// `n_obs` is overwritten per sweep entry.
    pub estimator: EstimatorConfig,
    pub variants: Vec<Variant>,
    pub families: Vec<Family>,
    pub replications: usize,
    pub n_sweep: Vec<u32>,
    pub seed: u64,
    pub mode: RunMode,
    pub output_dir: PathBuf,
    pub init: InitialCondition,
    pub ito_rule: ItoRule,
    /// Modes checked against the closed-form variance in linear validation.
    pub variance_modes: usize,
    pub nt_max: u64,
    pub lattice_n: u32,
    pub gates: GateSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let params = ModelParams {
            nonlinear: false,
            ..ModelParams::default()
        };
        Self {
            params,
            solver: SolverConfig::new(0, 1e-3),
            estimator: EstimatorConfig::new(4.0, Resonance::one(), Variant::V1, 0),
            variants: vec![Variant::V1],
            families: Family::ALL.to_vec(),
            replications: 200,
            n_sweep: vec![4, 8, 12],
            seed: 20240501,
            mode: RunMode::LinearExact,
            output_dir: PathBuf::from("out"),
            init: InitialCondition::Zero,
            ito_rule: ItoRule::Auto,
            variance_modes: 10,
            nt_max: 10_000,
            lattice_n: 50,
            gates: GateSettings::default(),
        }
    }
}

fn list<T: FromStr<Err = SpeError>>(v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect()
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| SpeError::InvalidParameter(format!("invalid value '{v}' for '{key}'")))
}

impl ExperimentConfig {
    /// Parses flat `key=value` text. `#` starts a comment; unknown keys are
    /// rejected. Unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SpeError::Parse {
                line: i + 1,
                message: format!("expected key=value, found '{line}'"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| SpeError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        cfg.finalize()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "nu_h" => self.params.nu_h = num(key, v)?,
            "nu_z" => self.params.nu_z = num(key, v)?,
            "f0" => self.params.f0 = num(key, v)?,
            "sigma0" => self.params.noise.sigma0 = num(key, v)?,
            "gamma" => self.params.noise.gamma = num(key, v)?,
            "ck_rule" => self.params.noise.ck_rule = v.parse()?,
            "t_final" => self.params.t_final = num(key, v)?,
            "n_sim" => self.solver.n = num(key, v)?,
            "dt" => self.solver.dt = num(key, v)?,
            "scheme" => self.solver.scheme = v.parse()?,
            "convolution" => {
                self.solver.convolution = v.parse()?;
                self.estimator.convolution = self.solver.convolution;
            }
            "store_every" => self.solver.store_every = num(key, v)?,
            "alpha" => self.estimator.alpha = num(key, v)?,
            "q" => self.estimator.q = v.parse()?,
            "subsample" => self.estimator.subsample = num(key, v)?,
            "variants" => self.variants = list(v)?,
            "families" => self.families = list(v)?,
            "ito_rule" => self.ito_rule = v.parse()?,
            "replications" => self.replications = num(key, v)?,
            "n_sweep" => {
                self.n_sweep = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = num(key, v)?,
            "mode" => self.mode = v.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "init" => self.init = v.parse()?,
            "variance_modes" => self.variance_modes = num(key, v)?,
            "nt_max" => self.nt_max = num(key, v)?,
            "lattice_n" => self.lattice_n = num(key, v)?,
            "gate.consistency_ratio" => self.gates.consistency_ratio = num(key, v)?,
            "gate.covariance_tolerance" => self.gates.covariance_tolerance = num(key, v)?,
            "gate.z_limit" => self.gates.z_limit = num(key, v)?,
            "gate.normality_level" => self.gates.normality_level = num(key, v)?,
            "gate.mode_fraction" => self.gates.mode_fraction = num(key, v)?,
            other => return Err(SpeError::InvalidParameter(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Derives dependent fields and checks invariants.
    pub fn finalize(&mut self) -> Result<()> {
        self.params.nonlinear = self.mode == RunMode::FullNonlinear;
        if self.replications == 0 {
            return Err(SpeError::InvalidParameter("replications must be >= 1".into()));
        }
        if self.n_sweep.is_empty() || self.n_sweep.windows(2).any(|w| w[1] <= w[0]) || self.n_sweep[0] == 0 {
            return Err(SpeError::InvalidParameter("n_sweep must be nonempty, positive and ascending".into()));
        }
        if self.variants.is_empty() || self.families.is_empty() {
            return Err(SpeError::InvalidParameter("variants and families must be nonempty".into()));
        }
        let top = self.max_n();
        if self.solver.n == 0 {
            self.solver.n = top;
        }
        if self.solver.n < top {
            return Err(SpeError::InvalidParameter(format!(
                "n_sim={} is below the largest observed truncation {top}",
                self.solver.n
            )));
        }
        if self.ito_rule == ItoRule::ItoFormula && self.mode != RunMode::LinearExact {
            return Err(SpeError::InvalidParameter("ito_rule=ito_formula requires mode=linear_exact".into()));
        }
        self.params.validate()?;
        self.solver.validate(&self.params)
    }

    pub fn max_n(&self) -> u32 {
        self.n_sweep.last().copied().unwrap_or(0)
    }

    pub fn effective_ito_rule(&self) -> ItoRule {
        match (self.ito_rule, self.mode) {
            (ItoRule::Auto, RunMode::LinearExact) => ItoRule::ItoFormula,
            (ItoRule::Auto, _) => ItoRule::LeftSum,
            (r, _) => r,
        }
    }

    pub fn estimator_for(&self, variant: Variant, n_obs: u32) -> EstimatorConfig {
        EstimatorConfig {
            variant,
            n_obs,
            ..self.estimator
        }
    }

    /// Canonical `key=value` listing; parsing it reproduces the config.
    pub fn to_key_values(&self) -> String {
        let p = &self.params;
        let NoiseSpec { sigma0, gamma, ck_rule } = p.noise;
        let s = &self.solver;
        let e = &self.estimator;
        let g = &self.gates;
        let sweep: Vec<String> = self.n_sweep.iter().map(|n| n.to_string()).collect();
        [
            format!("nu_h={:e}", p.nu_h),
            format!("nu_z={:e}", p.nu_z),
            format!("f0={:e}", p.f0),
            format!("sigma0={sigma0:e}"),
            format!("gamma={gamma:e}"),
            format!("ck_rule={ck_rule}"),
            format!("t_final={:e}", p.t_final),
            format!("n_sim={}", s.n),
            format!("dt={:e}", s.dt),
            format!("scheme={}", s.scheme),
            format!("convolution={}", s.convolution),
            format!("store_every={}", s.store_every),
            format!("alpha={:e}", e.alpha),
            format!("q={}", e.q),
            format!("subsample={}", e.subsample),
            format!("variants={}", join(&self.variants)),
            format!("families={}", join(&self.families)),
            format!("ito_rule={}", self.ito_rule),
            format!("replications={}", self.replications),
            format!("n_sweep={}", sweep.join(",")),
            format!("seed={}", self.seed),
            format!("mode={}", self.mode),
            format!("output_dir={}", self.output_dir.display()),
            format!("init={}", self.init),
            format!("variance_modes={}", self.variance_modes),
            format!("nt_max={}", self.nt_max),
            format!("lattice_n={}", self.lattice_n),
            format!("gate.consistency_ratio={:e}", g.consistency_ratio),
            format!("gate.covariance_tolerance={:e}", g.covariance_tolerance),
            format!("gate.z_limit={:e}", g.z_limit),
            format!("gate.normality_level={:e}", g.normality_level),
            format!("gate.mode_fraction={:e}", g.mode_fraction),
        ]
        .join("\n")
            + "\n"
    }

    /// SHA-256 of the canonical listing, hex encoded. `output_dir` is
    /// excluded so moving the output does not change the hash.
    pub fn hash(&self) -> String {
        let body: String = self
            .to_key_values()
            .lines()
            .filter(|l| !l.starts_with("output_dir="))
            .map(|l| format!("{l}\n"))
            .collect();
        Sha256::digest(body.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
