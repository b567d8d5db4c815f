//! Additive noise `σ0 |k|^{-γ} c_k φ_k dW_k` and per-mode Brownian streams.
//!
//! Each stored mode carries one Brownian motion. Paired modes use a complex
//! increment with independent real and imaginary parts of variance `dt/2`;
//! self-paired modes use a real increment of variance `dt`. Either way
//! `E|ΔW|^2 = dt`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SpeError};
use crate::spectral::ModeIndex;

/// Direction rule for baroclinic noise vectors. Barotropic modes always use
/// the horizontal perpendicular so the forcing stays divergence-free.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CkRule {
    /// `k'⊥ / |k'|`, or `(1, 0)` when `k' = 0`.
    Perpendicular,
    /// A fixed unit vector for every baroclinic mode.
    FixedUnit([f64; 2]),
}

impl std::fmt::Display for CkRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CkRule::Perpendicular => f.write_str("perpendicular"),
            CkRule::FixedUnit([a, b]) => write!(f, "fixed:{a:e}:{b:e}"),
        }
    }
}

impl std::str::FromStr for CkRule {
    type Err = SpeError;

    /// `perpendicular` or `fixed:<x>:<y>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("perpendicular") {
            return Ok(CkRule::Perpendicular);
        }
        let bad = || SpeError::InvalidParameter(format!("unknown ck_rule '{s}'"));
        let rest = s.strip_prefix("fixed:").ok_or_else(bad)?;
        let (a, b) = rest.split_once(':').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        Ok(CkRule::FixedUnit([a, b]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma0: f64,
    pub gamma: f64,
    pub ck_rule: CkRule,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            gamma: 4.5,
            ck_rule: CkRule::Perpendicular,
        }
    }
}

impl NoiseSpec {
    pub fn new(sigma0: f64, gamma: f64, ck_rule: CkRule) -> Result<Self> {
        let spec = Self {
            sigma0,
            gamma,
            ck_rule,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(SpeError::InvalidParameter(format!(
                "sigma0 must be finite and nonnegative, got {}",
                self.sigma0
            )));
        }
        if !(self.gamma > 1.5) {
            return Err(SpeError::InvalidParameter(format!(
                "gamma must exceed 3/2, got {}",
                self.gamma
            )));
        }
        if let CkRule::FixedUnit(d) = self.ck_rule {
            let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if (n - 1.0).abs() > 1e-12 {
                return Err(SpeError::InvalidParameter(format!(
                    "fixed noise direction must be a unit vector, |d| = {n}"
                )));
            }
        }
        Ok(())
    }

    /// Unit direction `c_k`.
    pub fn direction(&self, k: &ModeIndex) -> [f64; 2] {
        let perp = || {
            let h = (k.horizontal_norm_sq() as f64).sqrt();
            [-(k.k2 as f64) / h, k.k1 as f64 / h]
        };
        if k.is_barotropic() {
            return perp();
        }
        match self.ck_rule {
            CkRule::FixedUnit(d) => d,
            CkRule::Perpendicular if k.is_self_paired() => [1.0, 0.0],
            CkRule::Perpendicular => perp(),
        }
    }

    /// Scalar amplitude `σ0 |k|^{-γ}`.
    pub fn amplitude(&self, k: &ModeIndex) -> f64 {
        self.sigma0 * (k.norm_sq() as f64).powf(-self.gamma / 2.0)
    }
}

/// `σ0 |k|^{-γ} c_k`.
pub fn noise_coefficient(spec: &NoiseSpec, k: &ModeIndex) -> [f64; 2] {
    let a = spec.amplitude(k);
    let c = spec.direction(k);
    [a * c[0], a * c[1]]
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id of a mode, independent of truncation, so a mode sees the same
/// Brownian path at every `N`.
pub fn mode_stream_id(k: &ModeIndex) -> u64 {
    let pack = |v: i32| (v as i64 + (1 << 20)) as u64 & 0x1f_ffff;
    (pack(k.k1) << 42) | (pack(k.k2) << 21) | pack(k.k3)
}

/// Generator for one `(seed, replication, mode)` triple.
pub fn mode_rng(seed: u64, replication: u64, k: &ModeIndex) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(replication)));
    rng.set_stream(mode_stream_id(k));
    rng
}

/// Generator for non-noise randomness of a replication (initial data and
/// the like). Its stream ids lie above every mode stream id.
pub fn auxiliary_rng(seed: u64, replication: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(replication)));
    rng.set_stream((1 << 63) | purpose);
    rng
}

/// Independent generators for a list of modes.
#[derive(Clone, Debug)]
pub struct NoiseStreams {
    rngs: Vec<ChaCha8Rng>,
}

impl NoiseStreams {
    pub fn new(seed: u64, replication: u64, modes: &[ModeIndex]) -> Self {
        Self {
            rngs: modes.iter().map(|k| mode_rng(seed, replication, k)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rngs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rngs.is_empty()
    }

    pub fn stream(&mut self, i: usize) -> &mut ChaCha8Rng {
        &mut self.rngs[i]
    }
}

/// One Brownian increment for mode `k` over `dt`.
pub fn brownian_increment<R: Rng + ?Sized>(k: &ModeIndex, dt: f64, rng: &mut R) -> Complex64 {
    if k.is_self_paired() {
        Complex64::new(rng.sample::<f64, _>(StandardNormal) * dt.sqrt(), 0.0)
    } else {
        let s = (dt / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    }
}

/// Brownian increments aligned with `modes`, one stream per mode.
pub fn sample_increments(
    modes: &[ModeIndex],
    dt: f64,
    streams: &mut NoiseStreams,
) -> Result<Vec<Complex64>> {
    if !(dt > 0.0) {
        return Err(SpeError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if streams.len() != modes.len() {
        return Err(SpeError::InvalidParameter(format!(
            "{} streams for {} modes",
            streams.len(),
            modes.len()
        )));
    }
    Ok(modes
        .iter()
        .enumerate()
        .map(|(i, k)| brownian_increment(k, dt, streams.stream(i)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_bound_enforced() {
        assert!(NoiseSpec::new(1.0, 1.5, CkRule::Perpendicular).is_err());
        assert!(NoiseSpec::new(-1.0, 2.0, CkRule::Perpendicular).is_err());
        assert!(NoiseSpec::new(1.0, 2.0, CkRule::FixedUnit([1.0, 1.0])).is_err());
    }

    #[test]
    fn self_paired_perpendicular_default() {
        let spec = NoiseSpec::default();
        let k = ModeIndex::new(0, 0, 3).unwrap();
        assert_eq!(spec.direction(&k), [1.0, 0.0]);
    }

    #[test]
    fn fixed_rule_ignored_on_barotropic_modes() {
        let spec = NoiseSpec::new(1.0, 2.0, CkRule::FixedUnit([1.0, 0.0])).unwrap();
        let k = ModeIndex::new(1, 0, 0).unwrap();
        assert_eq!(spec.direction(&k), [0.0, 1.0]);
    }

    #[test]
    fn stream_ids_distinct() {
        let modes = crate::spectral::enumerate_modes(6, crate::spectral::ModeSelector::All).unwrap();
        let mut ids: Vec<u64> = modes.iter().map(mode_stream_id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), modes.len());
    }

    #[test]
    fn nonpositive_dt_rejected() {
        let k = [ModeIndex::new(1, 0, 0).unwrap()];
        let mut s = NoiseStreams::new(1, 0, &k);
        assert!(sample_increments(&k, 0.0, &mut s).is_err());
    }
}
