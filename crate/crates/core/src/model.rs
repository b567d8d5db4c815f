use crate::error::{Result, SpeError};
use crate::noise::NoiseSpec;

/// Physical parameters of the stochastic hydrostatic system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub nu_h: f64,
    pub nu_z: f64,
    /// Coriolis parameter.
    pub f0: f64,
    pub noise: NoiseSpec,
    /// Observation horizon.
    pub t_final: f64,
    /// Whether the advection term is active.
    pub nonlinear: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            nu_h: 1.0,
            nu_z: 0.5,
            f0: 1.0,
            noise: NoiseSpec::default(),
            t_final: 1.0,
            nonlinear: true,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu_h > 0.0 && self.nu_z > 0.0) {
            return Err(SpeError::InvalidParameter(format!(
                "viscosities must be positive, got nu_h={} nu_z={}",
                self.nu_h, self.nu_z
            )));
        }
        if !self.f0.is_finite() {
            return Err(SpeError::InvalidParameter("f0 must be finite".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(SpeError::InvalidParameter(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        self.noise.validate()
    }
}
