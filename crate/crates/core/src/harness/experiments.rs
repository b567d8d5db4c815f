use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Result, SpeError};
use crate::estimators::{estimate, theoretical_covariance, EstimateResult, Family, PathStatistics, Variant};
use crate::linear::{expected_time_energy, variance_time_energy, OUMode};
use crate::noise::{auxiliary_rng, NoiseStreams};
use crate::solver::{simulate_path, Stepper};
use crate::spectral::{canonical_modes, pair_dot, ModeIndex, ModeSelector, SpectralField};
use crate::stats;

use super::config::{ExperimentConfig, InitialCondition, RunMode};
use super::exact::ExactSampler;
use super::report::{Gate, Report};

/// Observed modes the configured families need, up to the largest sweep
/// entry. Barotropic modes are always present for the horizontal estimate.
pub fn required_modes(cfg: &ExperimentConfig) -> Vec<ModeIndex> {
    let n = cfg.max_n();
    let q = cfg.estimator.q;
    let mut sels = vec![ModeSelector::Barotropic];
    for f in &cfg.families {
        sels.push(f.selector(q));
    }
    canonical_modes(n, ModeSelector::All)
        .into_iter()
        .filter(|k| sels.iter().any(|s| s.contains(k)))
        .collect()
}

/// Initial field of a replication on the simulation truncation.
pub fn initial_field(cfg: &ExperimentConfig, replication: u64) -> Result<SpectralField> {
    match cfg.init {
        InitialCondition::Zero => SpectralField::zeros(cfg.solver.n),
        InitialCondition::Smooth(decay) => {
            let mut rng = auxiliary_rng(cfg.seed, replication, 0);
            SpectralField::random_smooth(cfg.solver.n, decay, &mut rng)
        }
    }
}

#[derive(Clone, Debug)]
struct EstimateRow {
    replication: usize,
    n_obs: u32,
    family: Family,
    variant: Variant,
    outcome: std::result::Result<EstimateResult, String>,
}

fn replication_rows(cfg: &ExperimentConfig, sampler: Option<&ExactSampler>, rep: usize) -> Result<Vec<EstimateRow>> {
    let init = initial_field(cfg, rep as u64)?;
    let mut rows = Vec::new();
    let mut push = |n_obs: u32, variant: Variant, stats: &PathStatistics| {
        let ecfg = cfg.estimator_for(variant, n_obs);
        for &family in &cfg.families {
            rows.push(EstimateRow {
                replication: rep,
                n_obs,
                family,
                variant,
                outcome: estimate(stats, family, &ecfg).map_err(|e| e.to_string()),
            });
        }
    };
    match (cfg.mode, sampler) {
        (RunMode::LinearExact, Some(sampler)) => {
            let init = matches!(cfg.init, InitialCondition::Smooth(_)).then_some(&init);
            let stats = sampler.path_statistics(cfg.seed, rep as u64, init, cfg.effective_ito_rule());
            for &n in &cfg.n_sweep {
                for &v in &cfg.variants {
                    push(n, v, &stats);
                }
            }
        }
        _ => {
            let traj = simulate_path(&cfg.params, &init, &cfg.solver, cfg.seed, rep as u64)?;
            for &n in &cfg.n_sweep {
                for &v in &cfg.variants {
                    let stats = PathStatistics::from_trajectory(&traj, &cfg.estimator_for(v, n))?;
                    push(n, v, &stats);
                }
            }
        }
    }
    Ok(rows)
}

fn exact_sampler(cfg: &ExperimentConfig, modes: &[ModeIndex]) -> Result<Option<ExactSampler>> {
    if cfg.mode != RunMode::LinearExact {
        return Ok(None);
    }
    let dt = cfg.solver.dt * cfg.solver.store_every as f64 * cfg.estimator.subsample as f64;
    ExactSampler::new(&cfg.params, modes, dt).map(Some)
}

/// Runs every replication, in parallel, keeping replication order.
fn collect_estimates(cfg: &ExperimentConfig) -> Result<(Vec<EstimateRow>, Vec<String>)> {
    let modes = required_modes(cfg);
    let sampler = exact_sampler(cfg, &modes)?;
    let results: Vec<_> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| (rep, replication_rows(cfg, sampler.as_ref(), rep)))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (rep, r) in results {
        match r {
            Ok(mut v) => rows.append(&mut v),
            Err(e) => failures.push(format!("{rep}: {e}")),
        }
    }
    Ok((rows, failures))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn estimates_csv(cfg: &ExperimentConfig, hash: &str, rows: &[EstimateRow]) -> String {
    let mut out = String::from(
        "run_id,replication,N_obs,family,variant,alpha,q,value,denominator,ito,nonlinear,cross,inner_nu_h,status\n",
    );
    let alpha = cfg.estimator.alpha;
    let q = cfg.estimator.q;
    for r in rows {
        let run_id = format!("{}-r{}", &hash[..12], r.replication);
        let head = format!("{run_id},{},{},{},{},{alpha:e},{q}", r.replication, r.n_obs, r.family, r.variant);
        let _ = match &r.outcome {
            Ok(e) => writeln!(
                out,
                "{head},{:e},{:e},{:e},{:e},{},{},ok",
                e.value,
                e.denominator,
                e.parts.ito,
                e.parts.nonlinear,
                opt(e.parts.cross),
                opt(e.parts.inner_nu_h)
            ),
            Err(msg) => writeln!(out, "{head},,,,,,,error: {}", msg.replace(',', ";")),
        };
    }
    out
}

type GroupKey = (u32, Family, Variant);

fn grouped_values(rows: &[EstimateRow]) -> BTreeMap<GroupKey, Vec<f64>> {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Ok(e) = &r.outcome {
            groups.entry((r.n_obs, r.family, r.variant)).or_default().push(e.value);
        }
    }
    groups
}

/// Ensemble estimation over the truncation sweep.
///
/// Gates: for the horizontal and resonant families, a hard gate requires
/// `RMSE(first N) >= ratio * RMSE(last N)`; monotone RMSE decrease is a soft
/// gate for every family.
pub fn run_consistency(cfg: &ExperimentConfig) -> Result<Report> {
    let hash = cfg.hash();
    let mut report = Report::new("consistency", &hash, cfg.seed);
    report.warnings = cfg.estimator.regime_warnings(cfg.params.noise.gamma);
    let (rows, failures) = collect_estimates(cfg)?;
    report.failures = failures;
    let groups = grouped_values(&rows);

    let mut summary = String::from("N_obs,family,variant,count,mean,std,rmse,truth\n");
    let mut rmse: BTreeMap<(Family, Variant), Vec<(u32, f64)>> = BTreeMap::new();
    for (&(n, family, variant), values) in &groups {
        let truth = family.true_value(&cfg.params);
        let r = stats::rmse(values, truth);
        let sd = if values.len() > 1 { stats::variance(values).sqrt() } else { f64::NAN };
        let _ = writeln!(
            summary,
            "{n},{family},{variant},{},{:e},{sd:e},{r:e},{truth:e}",
            values.len(),
            stats::mean(values)
        );
        rmse.entry((family, variant)).or_default().push((n, r));
    }
    for ((family, variant), series) in &rmse {
        if series.len() < 2 {
            continue;
        }
        let monotone = series.windows(2).all(|w| w[1].1 <= w[0].1);
        let listing: Vec<String> = series.iter().map(|(n, r)| format!("N={n}:{r:.4e}")).collect();
        report.gates.push(Gate::soft(
            format!("rmse_monotone[{family},{variant}]"),
            monotone,
            listing.join(" "),
        ));
        if *family == Family::NuZ {
            continue;
        }
        let (n0, first) = series[0];
        let (n1, last) = series[series.len() - 1];
        let ratio = first / last;
        let passed = last <= 1e-12 || ratio >= cfg.gates.consistency_ratio;
        report.gates.push(Gate::hard(
            format!("rmse_ratio[{family},{variant}]"),
            passed,
            format!(
                "RMSE(N={n0})/RMSE(N={n1}) = {ratio:.3} (required >= {})",
                cfg.gates.consistency_ratio
            ),
        ));
    }
    if cfg.n_sweep.len() < 2 {
        report.warnings.push("single-entry sweep: no rate gates".into());
    }
    report.files.push(("consistency_estimates.csv".into(), estimates_csv(cfg, &hash, &rows)));
    report.files.push(("consistency_summary.csv".into(), summary));
    Ok(report)
}

/// Scaled errors `N^2 (ν̂_h - ν_h, hat ν̂_z - ν_z)` at the largest sweep
/// entry compared with the limiting covariance.
///
/// Hard gates: each covariance entry within the relative tolerance, each
/// mean within `z_limit` standard errors, marginal Anderson–Darling
/// p-values above the level, and `corr(ν̂_h, q ν̂_h + hat ν̂_z)` within
/// `z_limit / sqrt(R)` of zero.
pub fn run_normality(cfg: &ExperimentConfig) -> Result<Report> {
    let alpha = cfg.estimator.alpha;
    let gamma = cfg.params.noise.gamma;
    if !(alpha > gamma - 1.0) {
        return Err(SpeError::InvalidParameter(format!(
            "normality requires alpha > gamma - 1, got alpha={alpha}, gamma={gamma}"
        )));
    }
    let n = cfg.max_n();
    let variant = cfg.variants[0];
    let mut run = cfg.clone();
    run.n_sweep = vec![n];
    run.variants = vec![variant];
    run.families = vec![Family::NuH, Family::NuZHat];
    let hash = run.hash();
    let mut report = Report::new("normality", &hash, cfg.seed);
    let (rows, failures) = collect_estimates(&run)?;
    report.failures = failures;

    let scale = (n as f64).powi(2);
    let mut by_rep: BTreeMap<usize, [Option<f64>; 2]> = BTreeMap::new();
    for r in &rows {
        match &r.outcome {
            Ok(e) => {
                let slot = if r.family == Family::NuH { 0 } else { 1 };
                by_rep.entry(r.replication).or_default()[slot] = Some(e.value);
            }
            Err(msg) => report.failures.push(format!("{}: {msg}", r.replication)),
        }
    }
    let (nu_h, nu_z) = (cfg.params.nu_h, cfg.params.nu_z);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut samples = String::from("replication,scaled_error_nu_h,scaled_error_nu_z_hat\n");
    for (rep, v) in &by_rep {
        if let [Some(h), Some(z)] = v {
            let (x, y) = (scale * (h - nu_h), scale * (z - nu_z));
            xs.push(x);
            ys.push(y);
            let _ = writeln!(samples, "{rep},{x:e},{y:e}");
        }
    }
    if xs.len() < 8 {
        return Err(SpeError::InvalidParameter(format!(
            "only {} usable replications; normality needs at least 8",
            xs.len()
        )));
    }
    let sigma = theoretical_covariance(&cfg.params, alpha, cfg.estimator.q, cfg.params.t_final)?;
    let q = cfg.estimator.q.as_f64();
    let g = cfg.gates;
    let emp = [
        [stats::variance(&xs), stats::covariance(&xs, &ys)],
        [stats::covariance(&xs, &ys), stats::variance(&ys)],
    ];
    let ses = [
        [stats::covariance_standard_error(&xs, &xs), stats::covariance_standard_error(&xs, &ys)],
        [stats::covariance_standard_error(&xs, &ys), stats::covariance_standard_error(&ys, &ys)],
    ];
    let mut summary = String::from("statistic,empirical,theoretical,relative_error,standard_error\n");
    for (name, (i, j)) in [("sigma11", (0, 0)), ("sigma12", (0, 1)), ("sigma22", (1, 1))] {
        let rel = (emp[i][j] - sigma[i][j]).abs() / sigma[i][j].abs();
        let _ = writeln!(summary, "{name},{:e},{:e},{rel:e},{:e}", emp[i][j], sigma[i][j], ses[i][j]);
        report.gates.push(Gate::hard(
            format!("covariance[{name}]"),
            rel <= g.covariance_tolerance,
            format!(
                "empirical {:.5} vs {:.5}, relative error {rel:.3} (tolerance {})",
                emp[i][j], sigma[i][j], g.covariance_tolerance
            ),
        ));
    }
    for (name, s) in [("nu_h", &xs), ("nu_z_hat", &ys)] {
        let m = stats::mean(s);
        let se = stats::standard_error(s);
        let _ = writeln!(summary, "mean[{name}],{m:e},0e0,,{se:e}");
        report.gates.push(Gate::hard(
            format!("mean_zero[{name}]"),
            m.abs() <= g.z_limit * se,
            format!("mean {m:.4} with standard error {se:.4}"),
        ));
        let ad = stats::anderson_darling_normal(s);
        let ks = stats::ks_normal(s, stats::mean(s), stats::variance(s).sqrt());
        let _ = writeln!(summary, "anderson_darling[{name}],{:e},,,{:e}", ad.statistic, ad.p_value);
        let _ = writeln!(summary, "ks[{name}],{:e},,,{:e}", ks.statistic, ks.p_value);
        report.gates.push(Gate::hard(
            format!("normality[{name}]"),
            ad.p_value >= g.normality_level,
            format!("Anderson-Darling A2={:.4}, p={:.4}", ad.statistic, ad.p_value),
        ));
    }
    let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| q * x + y).collect();
    let rho = stats::correlation(&xs, &combo);
    let limit = g.z_limit / (xs.len() as f64).sqrt();
    let _ = writeln!(summary, "corr[nu_h,q*nu_h+nu_z_hat],{rho:e},0e0,,{:e}", 1.0 / (xs.len() as f64).sqrt());
    report.gates.push(Gate::hard(
        "uncorrelated[nu_h,q*nu_h+nu_z_hat]",
        rho.abs() <= limit,
        format!("correlation {rho:.4}, limit {limit:.4}"),
    ));

    let mut qq = String::from("component,p,sample_quantile,normal_quantile\n");
    for (name, s) in [("nu_h", &xs), ("nu_z_hat", &ys)] {
        for (p, a, b) in stats::qq_normal(s) {
            let _ = writeln!(qq, "{name},{p:e},{a:e},{b:e}");
        }
    }
    report.files.push(("normality_samples.csv".into(), samples));
    report.files.push(("normality_summary.csv".into(), summary));
    report.files.push(("normality_qq.csv".into(), qq));
    Ok(report)
}

fn solver_energy_integrals(cfg: &ExperimentConfig, rep: u64, modes: &[ModeIndex]) -> Result<Vec<f64>> {
    let mut params = cfg.params;
    params.nonlinear = false;
    let mut solver = cfg.solver;
    solver.n = cfg.max_n();
    let mut stepper = Stepper::new(&params, &solver)?;
    let steps = (params.t_final / solver.dt).round() as usize;
    let set = stepper.mode_set().clone();
    let pos: Vec<usize> = modes.iter().map(|k| set.position(k).expect("mode inside solver set")).collect();
    let mut streams = NoiseStreams::new(cfg.seed, rep, set.modes());
    let mut state = initial_field(cfg, rep)?.retruncate(solver.n)?;
    let energy = |s: &SpectralField| -> Vec<f64> { pos.iter().map(|&p| pair_dot(&s.coeffs()[p], &s.coeffs()[p])).collect() };
    let mut prev = energy(&state);
    let mut total = vec![0.0; modes.len()];
    for step in 1..=steps {
        let forcing = stepper.sample_forcing(&mut streams);
        state = stepper.step(&state, &forcing)?;
        if !state.is_finite() {
            return Err(SpeError::BlowUp { step });
        }
        let e = energy(&state);
        for ((t, a), b) in total.iter_mut().zip(&prev).zip(&e) {
            *t += 0.5 * (a + b) * solver.dt;
        }
        prev = e;
    }
    Ok(total)
}

/// Ensemble moments of `∫_0^T |U_k|^2 dt` against the closed forms.
///
/// Uses every mode `|k| <= max(n_sweep)` and a zero initial field. Hard
/// gates: the share of modes whose mean z-score is within `z_limit`, the
/// variance of the first `variance_modes` modes, and the weighted sums
/// `Σ m_k |k|^{4β} ∫|U_k|^2` for `β ∈ {0, 1/2}`.
pub fn run_linear_validation(cfg: &ExperimentConfig) -> Result<Report> {
    if cfg.mode == RunMode::FullNonlinear {
        return Err(SpeError::InvalidParameter(
            "linear validation requires mode=linear_exact or linear_via_solver".into(),
        ));
    }
    if cfg.init != InitialCondition::Zero {
        return Err(SpeError::InvalidParameter("linear validation requires init=zero".into()));
    }
    let n = cfg.max_n();
    let hash = cfg.hash();
    let mut report = Report::new("linear-validate", &hash, cfg.seed);
    let modes = canonical_modes(n, ModeSelector::All);
    let t = cfg.params.t_final;
    let sampler = match cfg.mode {
        RunMode::LinearExact => {
            Some(ExactSampler::new(&cfg.params, &modes, cfg.solver.dt * cfg.solver.store_every as f64)?)
        }
        _ => None,
    };
    let results: Vec<(usize, Result<Vec<f64>>)> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let r = match &sampler {
                Some(s) => Ok(s.energy_integrals(cfg.seed, rep as u64, None)),
                None => solver_energy_integrals(cfg, rep as u64, &modes),
            };
            (rep, r)
        })
        .collect();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (rep, r) in results {
        match r {
            Ok(v) => samples.push(v),
            Err(e) => report.failures.push(format!("{rep}: {e}")),
        }
    }
    if samples.len() < 2 {
        return Err(SpeError::InvalidParameter("linear validation needs at least 2 replications".into()));
    }
    let per_mode = |i: usize| -> Vec<f64> { samples.iter().map(|s| s[i]).collect() };

    let mut csv = String::from("k1,k2,k3,lambda,mean,standard_error,exact_mean,z,variance,variance_se,exact_variance,variance_z\n");
    let mut within = 0usize;
    let mut var_checked = 0usize;
    let mut var_within = 0usize;
    let mut worst_var = 0.0f64;
    for (i, k) in modes.iter().enumerate() {
        let mode = OUMode::new(*k, &cfg.params);
        let x = per_mode(i);
        let (m, se) = (stats::mean(&x), stats::standard_error(&x));
        let exact = expected_time_energy(&mode, t)?;
        let z = (m - exact) / se;
        if z.abs() <= cfg.gates.z_limit {
            within += 1;
        }
        let mut var_cols = String::from(",,,");
        if i < cfg.variance_modes {
            let v = stats::variance(&x);
            let centered: Vec<f64> = x.iter().map(|a| (a - m).powi(2)).collect();
            let vse = stats::standard_error(&centered);
            let ev = variance_time_energy(&mode, t)?;
            let vz = (v - ev) / vse;
            var_checked += 1;
            if vz.abs() <= cfg.gates.z_limit {
                var_within += 1;
            }
            worst_var = worst_var.max(vz.abs());
            var_cols = format!("{v:e},{vse:e},{ev:e},{vz:e}");
        }
        let _ = writeln!(
            csv,
            "{},{},{},{:e},{m:e},{se:e},{exact:e},{z:e},{var_cols}",
            k.k1, k.k2, k.k3, mode.lambda
        );
    }
    let frac = within as f64 / modes.len() as f64;
    report.gates.push(Gate::hard(
        "mode_means",
        frac >= cfg.gates.mode_fraction,
        format!(
            "{within}/{} modes within {} standard errors ({:.2}%, required {:.0}%)",
            modes.len(),
            cfg.gates.z_limit,
            100.0 * frac,
            100.0 * cfg.gates.mode_fraction
        ),
    ));
    if var_checked > 0 {
        report.gates.push(Gate::hard(
            "mode_variances",
            var_within == var_checked,
            format!("{var_within}/{var_checked} variances within {} standard errors, max |z| {worst_var:.2}", cfg.gates.z_limit),
        ));
    }

    let mut sums = String::from("beta,mean,standard_error,exact,z\n");
    for beta in [0.0, 0.5] {
        let weights: Vec<f64> = modes.iter().map(|k| k.multiplicity() * (k.norm_sq() as f64).powf(2.0 * beta)).collect();
        let totals: Vec<f64> = samples.iter().map(|s| s.iter().zip(&weights).map(|(a, w)| a * w).sum()).collect();
        let exact: f64 = modes
            .iter()
            .zip(&weights)
            .map(|(k, w)| Ok(w * expected_time_energy(&OUMode::new(*k, &cfg.params), t)?))
            .sum::<Result<f64>>()?;
        let (m, se) = (stats::mean(&totals), stats::standard_error(&totals));
        let z = (m - exact) / se;
        let _ = writeln!(sums, "{beta:e},{m:e},{se:e},{exact:e},{z:e}");
        report.gates.push(Gate::hard(
            format!("weighted_sum[beta={beta}]"),
            z.abs() <= cfg.gates.z_limit,
            format!("mean {m:.6e} vs {exact:.6e}, z = {z:.2}"),
        ));
    }
    report.files.push(("linear_modes.csv".into(), csv));
    report.files.push(("linear_sums.csv".into(), sums));
    Ok(report)
}

/// Number of representations of each `n <= n_max` as an ordered sum of three
/// squares of integers (signs counted).
pub fn r3_table(n_max: u64) -> Vec<u64> {
    let mut r = vec![0u64; n_max as usize + 1];
    let m = (n_max as f64).sqrt() as i64 + 1;
    for a in -m..=m {
        let a2 = a * a;
        if a2 as u64 > n_max {
            continue;
        }
        for b in -m..=m {
            let ab = a2 + b * b;
            if ab as u64 > n_max {
                continue;
            }
            for c in -m..=m {
                let s = (ab + c * c) as u64;
                if s <= n_max {
                    r[s as usize] += 1;
                }
            }
        }
    }
    r
}

/// `n = 4^a (8b + 7)` for some `a, b >= 0`.
pub fn is_three_square_excluded(mut n: u64) -> bool {
    if n == 0 {
        return false;
    }
    while n.is_multiple_of(4) {
        n /= 4;
    }
    n % 8 == 7
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: u32) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// `Σ_{k ∈ Z^d, 1 <= |k| <= N} |k|^α` by enumeration.
pub fn lattice_power_sum(d: u32, alpha: f64, n: u32) -> f64 {
    let n = n as i64;
    let r2 = n * n;
    let mut total = 0.0;
    let mut visit = |s: i64| {
        if s >= 1 && s <= r2 {
            total += (s as f64).powf(alpha / 2.0);
        }
    };
    match d {
        1 => (-n..=n).for_each(|a| visit(a * a)),
        2 => {
            for a in -n..=n {
                for b in -n..=n {
                    visit(a * a + b * b);
                }
            }
        }
        3 => {
            for a in -n..=n {
                for b in -n..=n {
                    for c in -n..=n {
                        visit(a * a + b * b + c * c);
                    }
                }
            }
        }
        _ => panic!("lattice_power_sum supports d in 1..=3"),
    }
    total
}

/// Leading-order lattice sum as stated for the appendix estimate:
/// `(d-1)^{-α/d} ω_d / (α/d + 1) N^{d+α}` for `d >= 2` and
/// `2 N^{α+1} / (α+1)` for `d = 1`.
pub fn lattice_sum_asymptotic(d: u32, alpha: f64, n: u32) -> f64 {
    let n = n as f64;
    let df = d as f64;
    if d == 1 {
        2.0 * n.powf(alpha + 1.0) / (alpha + 1.0)
    } else {
        (df - 1.0).powf(-alpha / df) * unit_ball_volume(d) / (alpha / df + 1.0) * n.powf(df + alpha)
    }
}

/// `∫_{|x| <= N} |x|^α dx = ω_d N^{d+α} / (α/d + 1)`.
pub fn ball_power_integral(d: u32, alpha: f64, n: u32) -> f64 {
    let df = d as f64;
    unit_ball_volume(d) / (alpha / df + 1.0) * (n as f64).powf(df + alpha)
}

pub const LATTICE_DIMENSIONS: [u32; 3] = [1, 2, 3];
pub const LATTICE_ALPHAS: [f64; 6] = [-0.5, 0.0, 0.5, 1.0, 2.0, 4.0];
pub const LATTICE_TOLERANCE: f64 = 0.02;

/// Three-square and lattice-sum checks.
///
/// Hard gates: `r3(n) = 0` exactly on `4^a(8b+7)`, `r3(n) > 0` elsewhere,
/// and every lattice ratio against [`lattice_sum_asymptotic`] within 2%.
/// Ratios against the ball integral are reported in a soft gate.
pub fn number_theory_checks(n_max: u64, lattice_n: u32) -> Result<Report> {
    if n_max < 1 || lattice_n < 1 {
        return Err(SpeError::InvalidParameter("n_max and lattice_n must be >= 1".into()));
    }
    let hash = {
        use sha2::{Digest, Sha256};
        let body = format!("nt_max={n_max}\nlattice_n={lattice_n}\n");
        Sha256::digest(body.as_bytes()).iter().map(|b| format!("{b:02x}")).collect::<String>()
    };
    let mut report = Report::new("ntcheck", &hash, 0);
    let r = r3_table(n_max);
    let mut csv = String::from("n,r3,excluded\n");
    let mut bad_zero = Vec::new();
    let mut bad_positive = Vec::new();
    let mut c_fit = 0.0f64;
    let mut excluded_count = 0;
    for n in 1..=n_max {
        let ex = is_three_square_excluded(n);
        let v = r[n as usize];
        if ex {
            excluded_count += 1;
            if v != 0 {
                bad_zero.push(n);
            }
        } else if v == 0 {
            bad_positive.push(n);
        }
        c_fit = c_fit.max(v as f64 / n as f64);
        let _ = writeln!(csv, "{n},{v},{ex}");
    }
    report.gates.push(Gate::hard(
        "r3_zero_on_excluded",
        bad_zero.is_empty(),
        format!("{excluded_count} excluded n <= {n_max}; violations {:?}", &bad_zero[..bad_zero.len().min(5)]),
    ));
    report.gates.push(Gate::hard(
        "r3_positive_elsewhere",
        bad_positive.is_empty(),
        format!("violations {:?}", &bad_positive[..bad_positive.len().min(5)]),
    ));
    report.gates.push(Gate::soft(
        "r3_linear_bound",
        true,
        format!("max r3(n)/n = {c_fit:.4} over 1..={n_max}"),
    ));

    let mut lat = String::from("d,alpha,N,lattice_sum,asymptotic,ratio,ball_integral,ratio_integral\n");
    let mut worst = (0.0f64, 0u32, 0.0f64);
    let mut worst_int = 0.0f64;
    let mut failing = Vec::new();
    for &d in &LATTICE_DIMENSIONS {
        for &alpha in &LATTICE_ALPHAS {
            if alpha <= -(d as f64) {
                continue;
            }
            let s = lattice_power_sum(d, alpha, lattice_n);
            let a = lattice_sum_asymptotic(d, alpha, lattice_n);
            let b = ball_power_integral(d, alpha, lattice_n);
            let (ra, rb) = (s / a, s / b);
            if (ra - 1.0).abs() > worst.0 {
                worst = ((ra - 1.0).abs(), d, alpha);
            }
            worst_int = worst_int.max((rb - 1.0).abs());
            if (ra - 1.0).abs() > LATTICE_TOLERANCE {
                failing.push(format!("(d={d},alpha={alpha}):{ra:.4}"));
            }
            let _ = writeln!(lat, "{d},{alpha:e},{lattice_n},{s:e},{a:e},{ra:e},{b:e},{rb:e}");
        }
    }
    report.gates.push(Gate::hard(
        "lattice_ratio",
        failing.is_empty(),
        format!(
            "N={lattice_n}, max |ratio-1| = {:.4} at d={}, alpha={}; outside {}: [{}]",
            worst.0,
            worst.1,
            worst.2,
            LATTICE_TOLERANCE,
            failing.join(" ")
        ),
    ));
    report.gates.push(Gate::soft(
        "lattice_ratio_ball_integral",
        worst_int <= LATTICE_TOLERANCE,
        format!("max |ratio-1| against the ball integral = {worst_int:.4}"),
    ));
    report.files.push(("r3.csv".into(), csv));
    report.files.push(("lattice_sums.csv".into(), lat));
    Ok(report)
}
