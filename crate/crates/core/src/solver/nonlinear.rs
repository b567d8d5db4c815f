//! Hydrostatic advection `B(f, g) = f·∇_h g + w(f) ∂_z g` with
//! `w(f) = -∫_0^z ∇_h·f`.
//!
//! Fields are cosine series in `z`; `w` and `∂_z g` are sine series. Both
//! evaluators work in unnormalized "cosine units": a stored coefficient `b`
//! becomes `√2 b` for `k3 > 0` and `b` for `k3 = 0`, over every horizontal
//! wavenumber (conjugate partners included). The product then carries one
//! factor `(2π)^{-3/2}` when mapped back to the orthonormal basis.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SpeError};
use crate::spectral::{ModeIndex, ModeSet, SpectralField, Vec2c, ZERO2};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn basis_scale() -> f64 {
    (2.0 * PI).powf(-1.5)
}

/// Vertical velocity in the orthonormal sine basis `e^{i k'·x} sin(k3 z)`.
#[derive(Clone, Debug)]
pub struct SineField {
    modes: Arc<ModeSet>,
    coeffs: Vec<Complex64>,
}

impl SineField {
    pub fn modes(&self) -> &[ModeIndex] {
        self.modes.modes()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, k: &ModeIndex) -> Complex64 {
        let (c, conj) = k.canonicalize();
        let v = self
            .modes
            .position(&c)
            .map(|i| self.coeffs[i])
            .unwrap_or_default();
        // sin is odd in k3
        let v = if k.k3 < 0 { -v } else { v };
        if conj {
            v.conj()
        } else {
            v
        }
    }
}

/// `w`-coefficient `-i (k'·f_k) / k3` per mode; zero on barotropic modes.
pub fn vertical_velocity(f: &SpectralField) -> SineField {
    let coeffs = f
        .iter()
        .map(|(k, c)| vertical_coefficient(&k, c))
        .collect();
    SineField {
        modes: f.mode_set().clone(),
        coeffs,
    }
}

fn vertical_coefficient(k: &ModeIndex, c: &Vec2c) -> Complex64 {
    if k.k3 == 0 {
        return Complex64::default();
    }
    let div = c[0] * k.k1 as f64 + c[1] * k.k2 as f64;
    -I * div / k.k3 as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    /// Direct for `N <= 8`, pseudo-spectral above.
    #[default]
    Auto,
    Direct,
    PseudoSpectral,
}

impl ConvolutionMethod {
    pub fn resolve(self, n: u32) -> Self {
        match self {
            ConvolutionMethod::Auto if n <= 8 => ConvolutionMethod::Direct,
            ConvolutionMethod::Auto => ConvolutionMethod::PseudoSpectral,
            m => m,
        }
    }
}

impl std::fmt::Display for ConvolutionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConvolutionMethod::Auto => "auto",
            ConvolutionMethod::Direct => "direct",
            ConvolutionMethod::PseudoSpectral => "pseudo_spectral",
        })
    }
}

impl std::str::FromStr for ConvolutionMethod {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(ConvolutionMethod::Auto),
            "direct" => Ok(ConvolutionMethod::Direct),
            "pseudo_spectral" | "pseudospectral" => Ok(ConvolutionMethod::PseudoSpectral),
            other => Err(SpeError::InvalidParameter(format!("unknown convolution '{other}'"))),
        }
    }
}

/// One entry of the full `k3 >= 0` list in cosine units.
#[derive(Clone, Copy)]
struct Expanded {
    k: ModeIndex,
    value: Vec2c,
}

fn expand(f: &SpectralField) -> Vec<Expanded> {
    let mut out = Vec::with_capacity(2 * f.modes().len());
    for (k, c) in f.iter() {
        let s = if k.k3 > 0 { SQRT_2 } else { 1.0 };
        let value = [c[0] * s, c[1] * s];
        out.push(Expanded { k, value });
        if !k.is_self_paired() {
            out.push(Expanded {
                k: k.partner(),
                value: [value[0].conj(), value[1].conj()],
            });
        }
    }
    out
}

fn to_orthonormal(m: &ModeIndex, r: Vec2c) -> Vec2c {
    let s = basis_scale() * if m.k3 > 0 { 1.0 / SQRT_2 } else { 1.0 };
    [r[0] * s, r[1] * s]
}

/// Bilinear advection evaluator for a fixed input truncation, reusable across
/// calls.
pub struct Advection {
    n_in: u32,
    method: ConvolutionMethod,
    spectral: Option<PseudoSpectral>,
}

impl Advection {
    pub fn new(n_in: u32, method: ConvolutionMethod) -> Self {
        Self {
            n_in,
            method: method.resolve(n_in),
            spectral: None,
        }
    }

    pub fn method(&self) -> ConvolutionMethod {
        self.method
    }

    /// `P_{n_out} B(f, g)` without pressure projection.
    pub fn evaluate(&mut self, f: &SpectralField, g: &SpectralField, n_out: u32) -> Result<SpectralField> {
        for h in [f, g] {
            if h.truncation() != self.n_in {
                return Err(SpeError::TruncationMismatch {
                    left: h.truncation(),
                    right: self.n_in,
                });
            }
        }
        let out_modes = ModeSet::new(n_out)?;
        let coeffs = match self.method {
            ConvolutionMethod::PseudoSpectral => {
                let n_in = self.n_in;
                let ps = self
                    .spectral
                    .get_or_insert_with(|| PseudoSpectral::new(n_in, n_out));
                if ps.n_out != n_out {
                    *ps = PseudoSpectral::new(n_in, n_out);
                }
                ps.evaluate(f, g, &out_modes)
            }
            _ => direct(f, g, &out_modes),
        };
        Ok(SpectralField::from_coeffs_real_projected(out_modes, coeffs))
    }
}

/// `P_{n_out} B(f, g)`; `n_out` defaults to the input truncation.
pub fn nonlinear_b(
    f: &SpectralField,
    g: &SpectralField,
    method: ConvolutionMethod,
    n_out: Option<u32>,
) -> Result<SpectralField> {
    if f.truncation() != g.truncation() {
        return Err(SpeError::TruncationMismatch {
            left: f.truncation(),
            right: g.truncation(),
        });
    }
    let n = f.truncation();
    Advection::new(n, method).evaluate(f, g, n_out.unwrap_or(n))
}

fn direct(f: &SpectralField, g: &SpectralField, out: &ModeSet) -> Vec<Vec2c> {
    let n = out.truncation() as i32;
    let n2 = (n as i64) * (n as i64);
    let side = (2 * n + 1) as usize;
    let depth = (n + 1) as usize;
    let idx = |m1: i32, m2: i32, m3: i32| -> usize {
        (((m1 + n) as usize) * side + (m2 + n) as usize) * depth + m3 as usize
    };
    let mut acc = vec![ZERO2; side * side * depth];

    let fe = expand(f);
    let ge = expand(g);
    let fw: Vec<Complex64> = fe.iter().map(|e| vertical_coefficient(&e.k, &e.value)).collect();

    for (ej, wj) in fe.iter().zip(&fw) {
        let j = ej.k;
        for el in &ge {
            let l = el.k;
            let m1 = j.k1 + l.k1;
            let m2 = j.k2 + l.k2;
            // canonical horizontal half, m' = 0 kept for self-paired targets
            if m1 < 0 || (m1 == 0 && m2 < 0) {
                continue;
            }
            let h2 = (m1 as i64) * (m1 as i64) + (m2 as i64) * (m2 as i64);
            if h2 > n2 {
                continue;
            }
            let adv = I * (ej.value[0] * l.k1 as f64 + ej.value[1] * l.k2 as f64);
            let vert = *wj * (-(l.k3 as f64));
            let t1 = [adv * el.value[0], adv * el.value[1]];
            let t2 = [vert * el.value[0], vert * el.value[1]];
            let d = (j.k3 - l.k3).abs();
            if h2 + (d as i64) * (d as i64) <= n2 {
                let a = &mut acc[idx(m1, m2, d)];
                a[0] += (t1[0] + t2[0]) * 0.5;
                a[1] += (t1[1] + t2[1]) * 0.5;
            }
            let s = j.k3 + l.k3;
            if h2 + (s as i64) * (s as i64) <= n2 {
                let a = &mut acc[idx(m1, m2, s)];
                a[0] += (t1[0] - t2[0]) * 0.5;
                a[1] += (t1[1] - t2[1]) * 0.5;
            }
        }
    }
    out.modes()
        .iter()
        .map(|m| to_orthonormal(m, acc[idx(m.k1, m.k2, m.k3)]))
        .collect()
}

/// Dealiased collocation evaluator on an `M^3` grid, `M = 2 N_in + N_out + 1`.
struct PseudoSpectral {
    n_out: u32,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    lane: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl PseudoSpectral {
    fn new(n_in: u32, n_out: u32) -> Self {
        let m = (2 * n_in + n_out + 1) as usize;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            n_out,
            m,
            fwd,
            inv,
            lane: vec![Complex64::default(); m * m],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    fn wrap(&self, kappa: i32) -> usize {
        kappa.rem_euclid(self.m as i32) as usize
    }

    fn at(&self, k1: i32, k2: i32, k3: i32) -> usize {
        (self.wrap(k1) * self.m + self.wrap(k2)) * self.m + self.wrap(k3)
    }

    fn add_cos(&self, grid: &mut [Complex64], k: &ModeIndex, v: Complex64) {
        if k.k3 == 0 {
            grid[self.at(k.k1, k.k2, 0)] += v;
        } else {
            grid[self.at(k.k1, k.k2, k.k3)] += v * 0.5;
            grid[self.at(k.k1, k.k2, -k.k3)] += v * 0.5;
        }
    }

    fn add_sin(&self, grid: &mut [Complex64], k: &ModeIndex, v: Complex64) {
        if k.k3 == 0 {
            return;
        }
        let h = v / (2.0 * I);
        grid[self.at(k.k1, k.k2, k.k3)] += h;
        grid[self.at(k.k1, k.k2, -k.k3)] -= h;
    }

    /// In-place 3D transform along all axes.
    fn transform(&mut self, grid: &mut [Complex64], inverse: bool) {
        let m = self.m;
        let plan = if inverse { self.inv.clone() } else { self.fwd.clone() };
        // contiguous axis
        plan.process_with_scratch(grid, &mut self.scratch);
        // middle axis
        for x in 0..m {
            let base = x * m * m;
            for z in 0..m {
                for y in 0..m {
                    self.lane[z * m + y] = grid[base + y * m + z];
                }
            }
            plan.process_with_scratch(&mut self.lane, &mut self.scratch);
            for z in 0..m {
                for y in 0..m {
                    grid[base + y * m + z] = self.lane[z * m + y];
                }
            }
        }
        // outer axis
        for y in 0..m {
            for z in 0..m {
                for x in 0..m {
                    self.lane[z * m + x] = grid[(x * m + y) * m + z];
                }
            }
            plan.process_with_scratch(&mut self.lane, &mut self.scratch);
            for z in 0..m {
                for x in 0..m {
                    grid[(x * m + y) * m + z] = self.lane[z * m + x];
                }
            }
        }
    }

    fn evaluate(&mut self, f: &SpectralField, g: &SpectralField, out: &ModeSet) -> Vec<Vec2c> {
        let size = self.m * self.m * self.m;
        let zero = Complex64::default();
        // u, v, w, then (∂x, ∂y, ∂z) of each g component
        let mut grids: Vec<Vec<Complex64>> = (0..9).map(|_| vec![zero; size]).collect();
        for e in expand(f) {
            self.add_cos(&mut grids[0], &e.k, e.value[0]);
            self.add_cos(&mut grids[1], &e.k, e.value[1]);
            self.add_sin(&mut grids[2], &e.k, vertical_coefficient(&e.k, &e.value));
        }
        for e in expand(g) {
            for c in 0..2 {
                let v = e.value[c];
                self.add_cos(&mut grids[3 + 3 * c], &e.k, I * e.k.k1 as f64 * v);
                self.add_cos(&mut grids[4 + 3 * c], &e.k, I * e.k.k2 as f64 * v);
                self.add_sin(&mut grids[5 + 3 * c], &e.k, -(e.k.k3 as f64) * v);
            }
        }
        for grid in grids.iter_mut() {
            self.transform(grid, true);
        }
        let mut products: Vec<Vec<Complex64>> = (0..2).map(|_| vec![zero; size]).collect();
        for (c, prod) in products.iter_mut().enumerate() {
            let (gx, gy, gz) = (&grids[3 + 3 * c], &grids[4 + 3 * c], &grids[5 + 3 * c]);
            for p in 0..size {
                prod[p] = grids[0][p] * gx[p] + grids[1][p] * gy[p] + grids[2][p] * gz[p];
            }
        }
        let norm = 1.0 / size as f64;
        for prod in products.iter_mut() {
            self.transform(prod, false);
        }
        out.modes()
            .iter()
            .map(|k| {
                let mut r = ZERO2;
                for (c, prod) in products.iter().enumerate() {
                    r[c] = if k.k3 == 0 {
                        prod[self.at(k.k1, k.k2, 0)]
                    } else {
                        prod[self.at(k.k1, k.k2, k.k3)] + prod[self.at(k.k1, k.k2, -k.k3)]
                    } * norm;
                }
                to_orthonormal(k, r)
            })
            .collect()
    }
}
