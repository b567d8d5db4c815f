use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spe_core::estimators::{estimate, martingale_representation, PathStatistics};
use spe_core::harness::{
    initial_field, number_theory_checks, run_consistency, run_linear_validation, run_normality, ExperimentConfig,
    Report, RunMode,
};
use spe_core::io::{read_trajectory, trajectory_to_string};
use spe_core::solver::simulate_path;
use spe_core::{Result, SpeError};

#[derive(Parser)]
#[command(name = "spe", version, about = "Stochastic primitive equations: simulation and viscosity estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    /// linear_exact, linear_via_solver or full_nonlinear.
    #[arg(long)]
    mode: Option<String>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the gate summary only, no file listing.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write it as a trajectory file.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
    /// Evaluate every configured estimator on a stored trajectory.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: PathBuf,
    },
    /// Ensemble estimates over the truncation sweep.
    Consistency {
        #[command(flatten)]
        common: Common,
    },
    /// Scaled-error sample against the limiting covariance.
    Normality {
        #[command(flatten)]
        common: Common,
    },
    /// Linear-regime moments against closed forms.
    LinearValidate {
        #[command(flatten)]
        common: Common,
    },
    /// Three-square counts and lattice power sums.
    Ntcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_max: Option<u64>,
        #[arg(long)]
        lattice_n: Option<u32>,
    },
}

/// Builds the config text from the file plus overrides so that derived
/// fields are computed once, after every override.
fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut text = match &c.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| SpeError::Io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    text.push('\n');
    let mut push = |k: &str, v: String| text.push_str(&format!("{k}={v}\n"));
    if let Some(s) = c.seed {
        push("seed", s.to_string());
    }
    if let Some(r) = c.replications {
        push("replications", r.to_string());
    }
    if let Some(m) = &c.mode {
        push("mode", m.clone());
    }
    if let Some(o) = &c.out {
        push("output_dir", o.display().to_string());
    }
    for o in &c.overrides {
        if !o.contains('=') {
            return Err(SpeError::InvalidParameter(format!("override '{o}' is not key=value")));
        }
        text.push_str(o);
        text.push('\n');
    }
    ExperimentConfig::parse(&text)
}

fn simulate(cfg: &ExperimentConfig, replication: u64) -> Result<Report> {
    let mut report = Report::new("simulate", &cfg.hash(), cfg.seed);
    let v0 = initial_field(cfg, replication)?;
    let mut solver = cfg.solver;
    solver.log_noise = true;
    let traj = simulate_path(&cfg.params, &v0, &solver, cfg.seed, replication)?;
    report
        .files
        .push((format!("trajectory_r{replication}.txt"), trajectory_to_string(&traj)));
    Ok(report)
}

fn estimate_file(cfg: &ExperimentConfig, path: &PathBuf) -> Result<Report> {
    let traj = read_trajectory(path)?;
    let mut report = Report::new("estimate", &cfg.hash(), traj.seed);
    let n_sim = traj.truncation();
    let mut csv = String::from("N_obs,family,variant,value,denominator,martingale_value,status\n");
    for &n in cfg.n_sweep.iter().filter(|&&n| n <= n_sim) {
        for &variant in &cfg.variants {
            let ecfg = cfg.estimator_for(variant, n);
            let stats = PathStatistics::from_trajectory(&traj, &ecfg)?;
            for &family in &cfg.families {
                let mart = martingale_representation(&stats, family, &ecfg, &traj.params)
                    .map(|v| format!("{v:e}"))
                    .unwrap_or_default();
                let line = match estimate(&stats, family, &ecfg) {
                    Ok(e) => format!("{n},{family},{variant},{:e},{:e},{mart},ok\n", e.value, e.denominator),
                    Err(e) => format!("{n},{family},{variant},,,,error: {}\n", e.to_string().replace(',', ";")),
                };
                csv.push_str(&line);
            }
        }
    }
    if cfg.n_sweep.iter().all(|&n| n > n_sim) {
        report
            .warnings
            .push(format!("every sweep entry exceeds the trajectory truncation {n_sim}"));
    }
    report.files.push(("estimates.csv".into(), csv));
    Ok(report)
}

fn run(cli: Cli) -> Result<bool> {
    let common = match &cli.command {
        Command::Simulate { common, .. }
        | Command::Estimate { common, .. }
        | Command::Consistency { common }
        | Command::Normality { common }
        | Command::LinearValidate { common }
        | Command::Ntcheck { common, .. } => common,
    };
    let mut cfg = load_config(common)?;
    let report = match &cli.command {
        Command::Simulate { replication, .. } => {
            if cfg.mode == RunMode::LinearExact {
                // the exact sampler stores no path; step the linear system instead
                cfg.mode = RunMode::LinearViaSolver;
            }
            simulate(&cfg, *replication)?
        }
        Command::Estimate { trajectory, .. } => estimate_file(&cfg, trajectory)?,
        Command::Consistency { .. } => run_consistency(&cfg)?,
        Command::Normality { .. } => run_normality(&cfg)?,
        Command::LinearValidate { .. } => run_linear_validation(&cfg)?,
        Command::Ntcheck { n_max, lattice_n, .. } => {
            let mut r = number_theory_checks(n_max.unwrap_or(cfg.nt_max), lattice_n.unwrap_or(cfg.lattice_n))?;
            r.config_hash = cfg.hash();
            r
        }
    };
    let written = report.write_to(&cfg.output_dir)?;
    print!("{}", report.summary());
    if !common.quiet {
        for p in written {
            println!("  wrote {}", p.display());
        }
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
