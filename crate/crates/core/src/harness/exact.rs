//! Per-mode exact sampling of the linear system on a uniform grid.

use crate::error::{Result, SpeError};
use crate::estimators::PathStatistics;
use crate::linear::{ExactStepper, OUMode};
use crate::model::ModelParams;
use crate::noise::mode_rng;
use crate::spectral::{pair_dot, ModeIndex, SpectralField, Vec2c, ZERO2};

use super::config::ItoRule;

pub struct ExactSampler {
    modes: Vec<OUMode>,
    steppers: Vec<ExactStepper>,
    dt: f64,
    steps: usize,
}

impl ExactSampler {
    pub fn new(params: &ModelParams, modes: &[ModeIndex], dt: f64) -> Result<Self> {
        params.validate()?;
        let steps = (params.t_final / dt).round();
        if steps < 1.0 || (steps * dt - params.t_final).abs() > 1e-9 * params.t_final {
            return Err(SpeError::InvalidParameter(format!(
                "final time {} is not a whole number of steps of {dt}",
                params.t_final
            )));
        }
        let modes: Vec<OUMode> = modes.iter().map(|k| OUMode::new(*k, params)).collect();
        let steppers = modes.iter().map(|m| ExactStepper::new(m, dt)).collect::<Result<_>>()?;
        Ok(Self {
            modes,
            steppers,
            dt,
            steps: steps as usize,
        })
    }

    pub fn modes(&self) -> impl Iterator<Item = &OUMode> {
        self.modes.iter()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn start(&self, i: usize, init: Option<&SpectralField>) -> Vec2c {
        init.map(|f| f.get(&self.modes[i].k)).unwrap_or(ZERO2)
    }

    /// Estimator statistics of one replication. Quadratic terms always use
    /// left sums; the Itô term follows `rule` (`Auto` means the Itô formula).
    pub fn path_statistics(
        &self,
        seed: u64,
        replication: u64,
        init: Option<&SpectralField>,
        rule: ItoRule,
    ) -> PathStatistics {
        let ks: Vec<ModeIndex> = self.modes.iter().map(|m| m.k).collect();
        let mut stats = PathStatistics::with_modes(ks, false);
        let t_final = self.steps as f64 * self.dt;
        for (i, (mode, stepper)) in self.modes.iter().zip(&self.steppers).enumerate() {
            let mut rng = mode_rng(seed, replication, &mode.k);
            let x0 = self.start(i, init);
            let mut x = x0;
            for _ in 0..self.steps {
                let next = stepper.step(&x, &mut rng);
                match rule {
                    ItoRule::LeftSum => stats.accumulate(i, &x, &next, self.dt),
                    _ => stats.accumulate_quadratic(i, &x, self.dt),
                }
                x = next;
            }
            if rule != ItoRule::LeftSum {
                let qv = mode.amp * mode.amp * t_final;
                stats.add_ito(i, 0.5 * (pair_dot(&x, &x) - pair_dot(&x0, &x0) - qv));
            }
        }
        stats
    }

    /// Trapezoidal `∫_0^T |U_k|^2 dt` for every mode of one replication.
    pub fn energy_integrals(&self, seed: u64, replication: u64, init: Option<&SpectralField>) -> Vec<f64> {
        self.modes
            .iter()
            .zip(&self.steppers)
            .enumerate()
            .map(|(i, (mode, stepper))| {
                let mut rng = mode_rng(seed, replication, &mode.k);
                let mut x = self.start(i, init);
                let mut prev = pair_dot(&x, &x);
                let mut total = 0.0;
                for _ in 0..self.steps {
                    x = stepper.step(&x, &mut rng);
                    let e = pair_dot(&x, &x);
                    total += 0.5 * (prev + e) * self.dt;
                    prev = e;
                }
                total
            })
            .collect()
    }
}
