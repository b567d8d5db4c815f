//! Python module `spe`: fields, simulation, estimators and harness runs.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spe_core::estimators::{self as est, EstimatorConfig, Family, PathStatistics};
use spe_core::harness::{self, ExperimentConfig, Report};
use spe_core::noise::{CkRule, NoiseSpec};
use spe_core::solver::{self, Scheme, SolverConfig};
use spe_core::spectral::{self as sp, ModeIndex, ModeSelector, Resonance};
use spe_core::{io, linear, SpeError};

fn err(e: SpeError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mode(k: (i32, i32, i32)) -> PyResult<ModeIndex> {
    ModeIndex::new(k.0, k.1, k.2).map_err(err)
}

fn parse<T: std::str::FromStr<Err = SpeError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// `all`, `barotropic`, `baroclinic` or `resonant:<q>`.
fn selector(s: &str) -> PyResult<ModeSelector> {
    match s.trim() {
        "all" => Ok(ModeSelector::All),
        "barotropic" => Ok(ModeSelector::Barotropic),
        "baroclinic" => Ok(ModeSelector::Baroclinic),
        other => match other.strip_prefix("resonant:") {
            Some(q) => Ok(ModeSelector::Resonant(parse(q)?)),
            None => Err(PyValueError::new_err(format!("unknown selector '{other}'"))),
        },
    }
}

#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: spe_core::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (nu_h=1.0, nu_z=0.5, f0=1.0, sigma0=1.0, gamma=4.5, t_final=1.0, nonlinear=true, ck_rule="perpendicular"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        nu_h: f64,
        nu_z: f64,
        f0: f64,
        sigma0: f64,
        gamma: f64,
        t_final: f64,
        nonlinear: bool,
        ck_rule: &str,
    ) -> PyResult<Self> {
        let noise = NoiseSpec::new(sigma0, gamma, parse::<CkRule>(ck_rule)?).map_err(err)?;
        let inner = spe_core::ModelParams {
            nu_h,
            nu_z,
            f0,
            noise,
            t_final,
            nonlinear,
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn nu_h(&self) -> f64 {
        self.inner.nu_h
    }
    #[getter]
    fn nu_z(&self) -> f64 {
        self.inner.nu_z
    }
    #[getter]
    fn f0(&self) -> f64 {
        self.inner.f0
    }
    #[getter]
    fn sigma0(&self) -> f64 {
        self.inner.noise.sigma0
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.noise.gamma
    }
    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }
    #[getter]
    fn nonlinear(&self) -> bool {
        self.inner.nonlinear
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(nu_h={}, nu_z={}, f0={}, sigma0={}, gamma={}, t_final={}, nonlinear={})",
            p.nu_h, p.nu_z, p.f0, p.noise.sigma0, p.noise.gamma, p.t_final, p.nonlinear
        )
    }
}

#[pyclass(name = "SpectralField", from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: sp::SpectralField,
}

#[pymethods]
impl PyField {
    #[staticmethod]
    fn zeros(n: u32) -> PyResult<Self> {
        Ok(Self {
            inner: sp::SpectralField::zeros(n).map_err(err)?,
        })
    }

    /// Divergence-free random field with coefficient scale `|k|^{-decay}`.
    #[staticmethod]
    #[pyo3(signature = (n, decay, seed=0))]
    fn random_smooth(n: u32, decay: f64, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            inner: sp::SpectralField::random_smooth(n, decay, &mut rng).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::field_from_str(text).map_err(err)?,
        })
    }

    fn to_text(&self) -> String {
        io::field_to_string(&self.inner)
    }

    #[getter]
    fn truncation(&self) -> u32 {
        self.inner.truncation()
    }

    /// Stored (canonical) modes.
    fn modes(&self) -> Vec<(i32, i32, i32)> {
        self.inner.modes().iter().map(|k| (k.k1, k.k2, k.k3)).collect()
    }

    fn get(&self, k: (i32, i32, i32)) -> PyResult<(Complex64, Complex64)> {
        let v = self.inner.get(&mode(k)?);
        Ok((v[0], v[1]))
    }

    fn set(&mut self, k: (i32, i32, i32), u: Complex64, v: Complex64) -> PyResult<()> {
        self.inner.set(&mode(k)?, [u, v]).map_err(err)
    }

    fn norm_sq(&self) -> f64 {
        self.inner.norm_sq()
    }

    fn inner_product(&self, other: &PyField) -> PyResult<f64> {
        sp::inner_product(&self.inner, &other.inner).map_err(err)
    }

    fn project(&self, selector_name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sp::project(&self.inner, selector(selector_name)?),
        })
    }

    fn apply_operator(&self, a: f64, b: f64, c: f64) -> PyResult<Self> {
        Ok(Self {
            inner: sp::apply_operator(&self.inner, a, b, c).map_err(err)?,
        })
    }

    fn hydrostatic_leray(&self) -> Self {
        Self {
            inner: sp::hydrostatic_leray(&self.inner),
        }
    }

    fn retruncate(&self, n: u32) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.retruncate(n).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.modes().len()
    }
}

#[pyclass(name = "Trajectory", from_py_object)]
#[derive(Clone)]
struct PyTrajectory {
    inner: solver::Trajectory,
}

fn estimator_config(alpha: f64, q: &str, variant: &str, n_obs: u32) -> PyResult<EstimatorConfig> {
    Ok(EstimatorConfig::new(alpha, parse(q)?, parse(variant)?, n_obs))
}

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::trajectory_from_str(text).map_err(err)?,
        })
    }

    fn to_text(&self) -> String {
        io::trajectory_to_string(&self.inner)
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn truncation(&self) -> u32 {
        self.inner.truncation()
    }

    #[getter]
    fn has_noise_log(&self) -> bool {
        self.inner.noise_log.is_some()
    }

    fn state(&self, i: usize) -> PyResult<PyField> {
        self.inner
            .states
            .get(i)
            .map(|s| PyField { inner: s.clone() })
            .ok_or_else(|| PyValueError::new_err(format!("state index {i} out of range")))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Estimate of one family (`nu_h`, `nu_z`, `nu_z_hat`) as a dict with
    /// `value`, `denominator`, `ito`, `nonlinear` and, when the path carries
    /// a noise log, `martingale_value`.
    #[pyo3(signature = (family, n_obs, variant="v1", alpha=4.0, q="1"))]
    fn estimate(&self, family: &str, n_obs: u32, variant: &str, alpha: f64, q: &str) -> PyResult<BTreeMap<String, f64>> {
        let family: Family = parse(family)?;
        let cfg = estimator_config(alpha, q, variant, n_obs)?;
        let stats = PathStatistics::from_trajectory(&self.inner, &cfg).map_err(err)?;
        let r = est::estimate(&stats, family, &cfg).map_err(err)?;
        let mut out = BTreeMap::from([
            ("value".to_string(), r.value),
            ("denominator".to_string(), r.denominator),
            ("ito".to_string(), r.parts.ito),
            ("nonlinear".to_string(), r.parts.nonlinear),
        ]);
        if let Some(c) = r.parts.cross {
            out.insert("cross".into(), c);
        }
        if self.inner.noise_log.is_some() {
            let m = est::martingale_representation(&stats, family, &cfg, &self.inner.params).map_err(err)?;
            out.insert("martingale_value".into(), m);
        }
        Ok(out)
    }
}

/// Simulates one path of the Galerkin system at truncation `n`.
#[pyfunction]
#[pyo3(signature = (params, n, dt, seed=0, replication=0, scheme="exponential_euler", v0=None, store_every=1, log_noise=false))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    params: &PyModelParams,
    n: u32,
    dt: f64,
    seed: u64,
    replication: u64,
    scheme: &str,
    v0: Option<&PyField>,
    store_every: usize,
    log_noise: bool,
) -> PyResult<PyTrajectory> {
    let cfg = SolverConfig::new(n, dt)
        .with_scheme(parse::<Scheme>(scheme)?)
        .with_store_every(store_every)
        .with_noise_log(log_noise);
    let zero;
    let start = match v0 {
        Some(f) => &f.inner,
        None => {
            zero = sp::SpectralField::zeros(n).map_err(err)?;
            &zero
        }
    };
    let inner = solver::simulate_path(&params.inner, start, &cfg, seed, replication).map_err(err)?;
    Ok(PyTrajectory { inner })
}

#[pyfunction]
fn enumerate_modes(n: u32, selector_name: &str) -> PyResult<Vec<(i32, i32, i32)>> {
    Ok(sp::enumerate_modes(n, selector(selector_name)?)
        .map_err(err)?
        .into_iter()
        .map(|k| (k.k1, k.k2, k.k3))
        .collect())
}

#[pyfunction]
fn operator_eigenvalue(k: (i32, i32, i32), a: f64, b: f64, c: f64) -> PyResult<f64> {
    sp::operator_eigenvalue(&mode(k)?, a, b, c).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (k, sigma0, gamma, ck_rule="perpendicular"))]
fn noise_coefficient(k: (i32, i32, i32), sigma0: f64, gamma: f64, ck_rule: &str) -> PyResult<(f64, f64)> {
    let spec = NoiseSpec::new(sigma0, gamma, parse(ck_rule)?).map_err(err)?;
    let c = spe_core::noise::noise_coefficient(&spec, &mode(k)?);
    Ok((c[0], c[1]))
}

/// `E ∫_0^T |U_k|^2 dt` and its variance for a mode started at zero.
#[pyfunction]
fn time_energy_moments(params: &PyModelParams, k: (i32, i32, i32), t: f64) -> PyResult<(f64, f64)> {
    let m = linear::OUMode::new(mode(k)?, &params.inner);
    Ok((
        linear::expected_time_energy(&m, t).map_err(err)?,
        linear::variance_time_energy(&m, t).map_err(err)?,
    ))
}

#[pyfunction]
fn expected_norm_order(beta: f64, selector_name: &str, params: &PyModelParams, n: u32) -> PyResult<f64> {
    linear::expected_norm_order(beta, selector(selector_name)?, &params.inner, n).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (params, alpha=4.0, q="1", t_final=None))]
fn theoretical_covariance(params: &PyModelParams, alpha: f64, q: &str, t_final: Option<f64>) -> PyResult<[[f64; 2]; 2]> {
    let q: Resonance = parse(q)?;
    let t = t_final.unwrap_or(params.inner.t_final);
    est::theoretical_covariance(&params.inner, alpha, q, t).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (estimate, sigma, n, level=0.95))]
fn confidence_interval(estimate: f64, sigma: f64, n: u32, level: f64) -> PyResult<(f64, f64)> {
    est::confidence_interval(estimate, sigma, n, level).map_err(err)
}

#[pyfunction]
fn r3_table(n_max: u64) -> Vec<u64> {
    harness::r3_table(n_max)
}

fn report_dict(r: &Report) -> BTreeMap<String, Py<PyAny>> {
    Python::attach(|py| {
        let files: BTreeMap<String, String> = r.files.iter().cloned().collect();
        let gates: Vec<(String, bool, bool, String)> = r
            .gates
            .iter()
            .map(|g| (g.name.clone(), g.passed, g.hard, g.detail.clone()))
            .collect();
        let mut out: BTreeMap<String, Py<PyAny>> = BTreeMap::new();
        let mut put = |k: &str, v: Py<PyAny>| {
            out.insert(k.to_string(), v);
        };
        put("passed", r.passed().into_pyobject(py).unwrap().to_owned().into_any().unbind());
        put("summary", r.summary().into_pyobject(py).unwrap().into_any().unbind());
        put("files", files.into_pyobject(py).unwrap().into_any().unbind());
        put("gates", gates.into_pyobject(py).unwrap().into_any().unbind());
        put("config_hash", r.config_hash.clone().into_pyobject(py).unwrap().into_any().unbind());
        out
    })
}

/// Runs a harness command (`consistency`, `normality`, `linear-validate`)
/// on flat `key=value` config text. Nothing is written to disk.
#[pyfunction]
#[pyo3(signature = (command, config_text=""))]
fn run_experiment(py: Python<'_>, command: &str, config_text: &str) -> PyResult<BTreeMap<String, Py<PyAny>>> {
    let cfg = ExperimentConfig::parse(config_text).map_err(err)?;
    let report = py
        .detach(|| match command {
            "consistency" => harness::run_consistency(&cfg),
            "normality" => harness::run_normality(&cfg),
            "linear-validate" | "linear_validate" => harness::run_linear_validation(&cfg),
            other => Err(SpeError::InvalidParameter(format!("unknown command '{other}'"))),
        })
        .map_err(err)?;
    Ok(report_dict(&report))
}

#[pyfunction]
fn number_theory_checks(n_max: u64, lattice_n: u32) -> PyResult<BTreeMap<String, Py<PyAny>>> {
    Ok(report_dict(&harness::number_theory_checks(n_max, lattice_n).map_err(err)?))
}

#[pymodule]
fn spe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_modes, m)?)?;
    m.add_function(wrap_pyfunction!(operator_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(noise_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(time_energy_moments, m)?)?;
    m.add_function(wrap_pyfunction!(expected_norm_order, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(r3_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(number_theory_checks, m)?)?;
    m.add("BASIS", sp::BASIS_TAG)?;
    Ok(())
}
