//! Fourier lattice, the hydrostatic space of real divergence-free fields, and
//! the diagonal operator algebra on it.
//!
//! Basis functions are orthonormal on the periodic cube `[0, 2π]^3`:
//! `e^{i k'·x} cos(k3 z)` scaled to unit norm. The basis is even in `k3`, so
//! only `k3 >= 0` is stored. The reality condition pairs `(k1, k2, k3)` with
//! `(-k1, -k2, k3)`; only the canonical member of each pair is stored and the
//! partner is counted through [`ModeIndex::multiplicity`].

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SpeError};

/// Complex velocity coefficient `(u, v)` of one mode.
pub type Vec2c = [Complex64; 2];

pub const ZERO2: Vec2c = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];

/// Basis tag written into serialized fields.
pub const BASIS_TAG: &str = "orthonormal-cos-halfspace";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub k1: i32,
    pub k2: i32,
    pub k3: i32,
}

impl ModeIndex {
    pub fn new(k1: i32, k2: i32, k3: i32) -> Result<Self> {
        if k1 == 0 && k2 == 0 && k3 == 0 {
            return Err(SpeError::InvalidMode("zero mode is excluded".into()));
        }
        Ok(Self { k1, k2, k3 })
    }

    pub fn horizontal_norm_sq(&self) -> i64 {
        let (a, b) = (self.k1 as i64, self.k2 as i64);
        a * a + b * b
    }

    pub fn vertical_sq(&self) -> i64 {
        (self.k3 as i64) * (self.k3 as i64)
    }

    pub fn norm_sq(&self) -> i64 {
        self.horizontal_norm_sq() + self.vertical_sq()
    }

    pub fn is_barotropic(&self) -> bool {
        self.k3 == 0
    }

    /// `k' = 0`: the mode is its own conjugate partner and has a real coefficient.
    pub fn is_self_paired(&self) -> bool {
        self.k1 == 0 && self.k2 == 0
    }

    /// Stored representative: `k3 >= 0` and `(k1, k2)` lexicographically positive,
    /// or `k' = 0` with `k3 > 0`.
    pub fn is_canonical(&self) -> bool {
        self.k3 >= 0
            && (self.k1 > 0
                || (self.k1 == 0 && self.k2 > 0)
                || (self.k1 == 0 && self.k2 == 0 && self.k3 > 0))
    }

    /// Conjugate partner `(-k1, -k2, k3)`.
    pub fn partner(&self) -> Self {
        Self {
            k1: -self.k1,
            k2: -self.k2,
            k3: self.k3,
        }
    }

    /// Number of real-field lattice directions represented by a stored mode.
    pub fn multiplicity(&self) -> f64 {
        if self.is_self_paired() {
            1.0
        } else {
            2.0
        }
    }

    /// Maps any nonzero lattice point to its stored representative and whether
    /// the coefficient must be conjugated.
    pub fn canonicalize(&self) -> (Self, bool) {
        let k = Self {
            k3: self.k3.abs(),
            ..*self
        };
        if k.is_canonical() {
            (k, false)
        } else {
            (k.partner(), true)
        }
    }

    pub fn horizontal(&self) -> [f64; 2] {
        [self.k1 as f64, self.k2 as f64]
    }
}

impl Ord for ModeIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.norm_sq(), self.k1, self.k2, self.k3).cmp(&(
            other.norm_sq(),
            other.k1,
            other.k2,
            other.k3,
        ))
    }
}

impl PartialOrd for ModeIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.k1, self.k2, self.k3)
    }
}

/// Positive rational resonance ratio `q = p / r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Resonance(Ratio<i64>);

impl Resonance {
    pub fn new(numer: i64, denom: i64) -> Result<Self> {
        if numer <= 0 || denom <= 0 {
            return Err(SpeError::InvalidParameter(format!(
                "resonance ratio must be positive, got {numer}/{denom}"
            )));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn one() -> Self {
        Self(Ratio::from_integer(1))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `r (k1^2 + k2^2) = p k3^2` with `k3 != 0`, decided in integers.
    pub fn matches(&self, k: &ModeIndex) -> bool {
        k.k3 != 0 && self.denom() * k.horizontal_norm_sq() == self.numer() * k.vertical_sq()
    }
}

impl fmt::Display for Resonance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for Resonance {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SpeError::InvalidParameter(format!("cannot parse resonance ratio '{s}'"));
        let s = s.trim();
        match s.split_once('/') {
            Some((p, r)) => Self::new(
                p.trim().parse().map_err(|_| bad())?,
                r.trim().parse().map_err(|_| bad())?,
            ),
            None => Self::new(s.parse().map_err(|_| bad())?, 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModeSelector {
    All,
    Barotropic,
    Baroclinic,
    Resonant(Resonance),
}

impl ModeSelector {
    pub fn contains(&self, k: &ModeIndex) -> bool {
        match self {
            ModeSelector::All => true,
            ModeSelector::Barotropic => k.k3 == 0,
            ModeSelector::Baroclinic => k.k3 != 0,
            ModeSelector::Resonant(q) => q.matches(k),
        }
    }
}

impl fmt::Display for ModeSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSelector::All => write!(f, "all"),
            ModeSelector::Barotropic => write!(f, "barotropic"),
            ModeSelector::Baroclinic => write!(f, "baroclinic"),
            ModeSelector::Resonant(q) => write!(f, "resonant({q})"),
        }
    }
}

fn lattice_ball(n: u32, keep: impl Fn(&ModeIndex) -> bool) -> Vec<ModeIndex> {
    let n = n as i32;
    let r2 = (n as i64) * (n as i64);
    let mut out = Vec::new();
    for k1 in -n..=n {
        for k2 in -n..=n {
            for k3 in -n..=n {
                let k = ModeIndex { k1, k2, k3 };
                let m = k.norm_sq();
                if m > 0 && m <= r2 && keep(&k) {
                    out.push(k);
                }
            }
        }
    }
    out.sort();
    out
}

/// All lattice points `1 <= |k| <= n` matching `sel`, both signs of every
/// component, in canonical order.
pub fn enumerate_modes(n: u32, sel: ModeSelector) -> Result<Vec<ModeIndex>> {
    if n == 0 {
        return Err(SpeError::InvalidParameter("truncation must be >= 1".into()));
    }
    Ok(lattice_ball(n, |k| sel.contains(k)))
}

/// Stored representatives of [`enumerate_modes`].
pub fn canonical_modes(n: u32, sel: ModeSelector) -> Vec<ModeIndex> {
    lattice_ball(n, |k| k.is_canonical() && sel.contains(k))
}

/// Smallest truncation `<= bound` with a nonempty resonant set.
pub fn smallest_resonant_truncation(q: Resonance, bound: u32) -> Option<u32> {
    let r2 = |k: &ModeIndex| k.norm_sq() as f64;
    canonical_modes(bound, ModeSelector::Resonant(q))
        .first()
        .map(|k| r2(k).sqrt().ceil() as u32)
}

/// Canonical mode list of a truncation with position lookup.
#[derive(Debug)]
pub struct ModeSet {
    truncation: u32,
    modes: Vec<ModeIndex>,
    index: HashMap<ModeIndex, usize>,
}

impl ModeSet {
    pub fn new(n: u32) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(SpeError::InvalidParameter("truncation must be >= 1".into()));
        }
        let modes = canonical_modes(n, ModeSelector::All);
        let index = modes.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        Ok(Arc::new(Self {
            truncation: n,
            modes,
            index,
        }))
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Position of a canonical mode.
    pub fn position(&self, k: &ModeIndex) -> Option<usize> {
        self.index.get(k).copied()
    }
}

/// Real hydrostatic velocity field truncated at `|k| <= N`, stored on the
/// canonical half lattice.
#[derive(Clone, Debug)]
pub struct SpectralField {
    modes: Arc<ModeSet>,
    coeffs: Vec<Vec2c>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.truncation() == other.truncation() && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(n: u32) -> Result<Self> {
        Ok(Self::zeros_on(ModeSet::new(n)?))
    }

    pub fn zeros_on(modes: Arc<ModeSet>) -> Self {
        let coeffs = vec![ZERO2; modes.len()];
        Self { modes, coeffs }
    }

    /// Builds a field from coefficients aligned with `modes`. Self-paired
    /// coefficients must be real.
    pub fn from_coeffs(modes: Arc<ModeSet>, coeffs: Vec<Vec2c>) -> Result<Self> {
        if coeffs.len() != modes.len() {
            return Err(SpeError::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                modes.len(),
                coeffs.len()
            )));
        }
        for (k, c) in modes.modes().iter().zip(&coeffs) {
            if k.is_self_paired() && (c[0].im != 0.0 || c[1].im != 0.0) {
                return Err(SpeError::InvalidField {
                    mode: *k,
                    reason: "self-paired coefficient must be real".into(),
                });
            }
        }
        Ok(Self { modes, coeffs })
    }

    /// Builds a field and zeroes imaginary parts of self-paired modes.
    pub(crate) fn from_coeffs_real_projected(modes: Arc<ModeSet>, coeffs: Vec<Vec2c>) -> Self {
        debug_assert_eq!(coeffs.len(), modes.len());
        let mut f = Self { modes, coeffs };
        f.enforce_reality();
        f
    }

    pub fn truncation(&self) -> u32 {
        self.modes.truncation()
    }

    pub fn mode_set(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn modes(&self) -> &[ModeIndex] {
        self.modes.modes()
    }

    pub fn coeffs(&self) -> &[Vec2c] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Vec2c] {
        &mut self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, &Vec2c)> + '_ {
        self.modes.modes().iter().copied().zip(self.coeffs.iter())
    }

    /// Coefficient of any lattice point, resolving conjugate partners and
    /// negative `k3`. Points outside the truncation read as zero.
    pub fn get(&self, k: &ModeIndex) -> Vec2c {
        let (c, conj) = k.canonicalize();
        match self.modes.position(&c) {
            Some(i) if conj => [self.coeffs[i][0].conj(), self.coeffs[i][1].conj()],
            Some(i) => self.coeffs[i],
            None => ZERO2,
        }
    }

    /// Sets a coefficient through any representative of its conjugate class.
    pub fn set(&mut self, k: &ModeIndex, value: Vec2c) -> Result<()> {
        let (c, conj) = k.canonicalize();
        let i = self.modes.position(&c).ok_or_else(|| {
            SpeError::InvalidMode(format!("{k} outside truncation {}", self.truncation()))
        })?;
        let v = if conj {
            [value[0].conj(), value[1].conj()]
        } else {
            value
        };
        if c.is_self_paired() && (v[0].im != 0.0 || v[1].im != 0.0) {
            return Err(SpeError::InvalidField {
                mode: c,
                reason: "self-paired coefficient must be real".into(),
            });
        }
        self.coeffs[i] = v;
        Ok(())
    }

    pub fn map_modes(&self, f: impl Fn(&ModeIndex, &Vec2c) -> Vec2c) -> Self {
        let coeffs = self.iter().map(|(k, c)| f(&k, c)).collect();
        Self {
            modes: self.modes.clone(),
            coeffs,
        }
    }

    pub fn try_map_modes(&self, f: impl Fn(&ModeIndex, &Vec2c) -> Result<Vec2c>) -> Result<Self> {
        let coeffs = self
            .iter()
            .map(|(k, c)| f(&k, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            modes: self.modes.clone(),
            coeffs,
        })
    }

    /// Squared L² norm.
    pub fn norm_sq(&self) -> f64 {
        self.iter()
            .map(|(k, c)| k.multiplicity() * (c[0].norm_sqr() + c[1].norm_sqr()))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c[0].re.is_finite() && c[0].im.is_finite() && c[1].re.is_finite() && c[1].im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_same(self, other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a[0] - b[0]).norm().max((a[1] - b[1]).norm()))
            .fold(0.0, f64::max))
    }

    /// Re-expresses the field at truncation `n`, dropping or zero-filling modes.
    pub fn retruncate(&self, n: u32) -> Result<Self> {
        if n == self.truncation() {
            return Ok(self.clone());
        }
        let modes = ModeSet::new(n)?;
        let coeffs = modes.modes().iter().map(|k| self.get(k)).collect();
        Ok(Self { modes, coeffs })
    }

    /// Checks reality of self-paired modes and barotropic incompressibility,
    /// relative to the field's largest coefficient.
    pub fn validate(&self, rel_tol: f64) -> Result<()> {
        let scale = self
            .coeffs
            .iter()
            .map(|c| c[0].norm().max(c[1].norm()))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for (k, c) in self.iter() {
            if k.is_self_paired() && (c[0].im.abs() > rel_tol * scale || c[1].im.abs() > rel_tol * scale) {
                return Err(SpeError::InvalidField {
                    mode: k,
                    reason: "self-paired coefficient must be real".into(),
                });
            }
            if k.is_barotropic() {
                let [a, b] = k.horizontal();
                let div = (c[0] * a + c[1] * b).norm() / k.horizontal_norm_sq() as f64;
                if div > rel_tol * scale {
                    return Err(SpeError::InvalidField {
                        mode: k,
                        reason: format!("barotropic divergence {div:e}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Zeroes imaginary parts of self-paired modes.
    pub(crate) fn enforce_reality(&mut self) {
        for (k, c) in self.modes.modes().iter().zip(self.coeffs.iter_mut()) {
            if k.is_self_paired() {
                c[0].im = 0.0;
                c[1].im = 0.0;
            }
        }
    }

    /// Random field in H with independent Gaussian coefficients of standard
    /// deviation `|k|^{-decay}`.
    pub fn random_smooth<R: Rng + ?Sized>(n: u32, decay: f64, rng: &mut R) -> Result<Self> {
        let modes = ModeSet::new(n)?;
        let coeffs = modes
            .modes()
            .iter()
            .map(|k| {
                let s = (k.norm_sq() as f64).powf(-decay / 2.0);
                let mut draw = || -> f64 { rng.sample::<f64, _>(StandardNormal) * s };
                if k.is_self_paired() {
                    [Complex64::new(draw(), 0.0), Complex64::new(draw(), 0.0)]
                } else {
                    [
                        Complex64::new(draw(), draw()) / 2f64.sqrt(),
                        Complex64::new(draw(), draw()) / 2f64.sqrt(),
                    ]
                }
            })
            .collect();
        Ok(hydrostatic_leray(&Self { modes, coeffs }))
    }
}

fn check_same(f: &SpectralField, g: &SpectralField) -> Result<()> {
    if f.truncation() != g.truncation() {
        return Err(SpeError::TruncationMismatch {
            left: f.truncation(),
            right: g.truncation(),
        });
    }
    Ok(())
}

impl Add for &SpectralField {
    type Output = SpectralField;

    /// Panics on mismatched truncations.
    fn add(self, rhs: Self) -> SpectralField {
        assert_eq!(self.truncation(), rhs.truncation(), "truncation mismatch");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
            .collect();
        SpectralField {
            modes: self.modes.clone(),
            coeffs,
        }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: Self) -> SpectralField {
        self + &(-rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;

    fn neg(self) -> SpectralField {
        self.map_modes(|_, c| [-c[0], -c[1]])
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, s: f64) -> SpectralField {
        self.map_modes(|_, c| [c[0] * s, c[1] * s])
    }
}

fn power_factor(k: &ModeIndex, base_sq: i64, exponent: f64) -> Result<f64> {
    if exponent == 0.0 {
        return Ok(1.0);
    }
    if base_sq == 0 {
        return if exponent > 0.0 {
            Ok(0.0)
        } else {
            Err(SpeError::OperatorDomain { mode: *k })
        };
    }
    let b = base_sq as f64;
    if exponent.fract() == 0.0 && exponent.abs() < 64.0 {
        Ok(b.powi(exponent as i32))
    } else {
        Ok(b.powf(exponent))
    }
}

/// Eigenvalue of `A_h^a A_z^b A^c` on mode `k`: `|k'|^{2a} |k3|^{2b} |k|^{2c}`.
pub fn operator_eigenvalue(k: &ModeIndex, a: f64, b: f64, c: f64) -> Result<f64> {
    Ok(power_factor(k, k.horizontal_norm_sq(), a)?
        * power_factor(k, k.vertical_sq(), b)?
        * power_factor(k, k.norm_sq(), c)?)
}

/// Applies `A_h^a A_z^b A^c`. Modes with zero coefficient are skipped, so a
/// negative exponent is only a domain error where the field has support.
pub fn apply_operator(f: &SpectralField, a: f64, b: f64, c: f64) -> Result<SpectralField> {
    f.try_map_modes(|k, v| {
        if *v == ZERO2 {
            return Ok(ZERO2);
        }
        let e = operator_eigenvalue(k, a, b, c)?;
        Ok([v[0] * e, v[1] * e])
    })
}

pub fn project(f: &SpectralField, sel: ModeSelector) -> SpectralField {
    f.map_modes(|k, v| if sel.contains(k) { *v } else { ZERO2 })
}

/// Horizontal Leray projection of a barotropic field.
pub fn leray_h(f: &SpectralField) -> Result<SpectralField> {
    if let Some((k, _)) = f.iter().find(|(k, v)| !k.is_barotropic() && **v != ZERO2) {
        return Err(SpeError::InvalidField {
            mode: k,
            reason: "horizontal Leray projection needs a barotropic field".into(),
        });
    }
    Ok(hydrostatic_leray(f))
}

/// Hydrostatic Leray projection: horizontal Leray on the barotropic part,
/// identity on the baroclinic part.
pub fn hydrostatic_leray(f: &SpectralField) -> SpectralField {
    f.map_modes(|k, v| {
        if !k.is_barotropic() {
            return *v;
        }
        let [a, b] = k.horizontal();
        let dot = (v[0] * a + v[1] * b) / k.horizontal_norm_sq() as f64;
        [v[0] - dot * a, v[1] - dot * b]
    })
}

/// Real L² inner product.
pub fn inner_product(f: &SpectralField, g: &SpectralField) -> Result<f64> {
    check_same(f, g)?;
    Ok(f.iter()
        .zip(g.coeffs.iter())
        .map(|((k, a), b)| k.multiplicity() * pair_dot(a, b))
        .sum())
}

/// `Re(a · conj(b))` for one mode.
pub fn pair_dot(a: &Vec2c, b: &Vec2c) -> f64 {
    (a[0] * b[0].conj() + a[1] * b[1].conj()).re
}

/// Pointwise rotation `(u, v) -> (-v, u)`.
pub fn perp(f: &SpectralField) -> SpectralField {
    f.map_modes(|_, v| [-v[1], v[0]])
}
