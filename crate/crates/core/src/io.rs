//! Plain-text serialization of fields and trajectories.
//!
//! Field file:
//! ```text
//! # spe-field N=<n> basis=<tag>
//! k1,k2,k3,re_u,im_u,re_v,im_v
//! <one row per stored mode, canonical order>
//! ```
//! Trajectory file: a `key=value` header, the column line, then one
//! `@state <i> t=<time>` block per stored time and, when present, one
//! `@forcing <i>` block per interval. Floats use the shortest round-trip
//! exponent form, so a write/read cycle is lossless.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, SpeError};
use crate::model::ModelParams;
use crate::noise::NoiseSpec;
use crate::solver::{SolverConfig, Trajectory};
use crate::spectral::{ModeIndex, ModeSet, SpectralField, Vec2c, BASIS_TAG};

pub const FIELD_MAGIC: &str = "# spe-field";
pub const TRAJECTORY_MAGIC: &str = "# spe-trajectory";
pub const TRAJECTORY_VERSION: u32 = 1;
pub const COLUMNS: &str = "k1,k2,k3,re_u,im_u,re_v,im_v";

fn push_rows(out: &mut String, modes: &[ModeIndex], coeffs: &[Vec2c]) {
    for (k, c) in modes.iter().zip(coeffs) {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{:e}",
            k.k1, k.k2, k.k3, c[0].re, c[0].im, c[1].re, c[1].im
        );
    }
}

pub fn field_to_string(f: &SpectralField) -> String {
    let mut out = format!("{FIELD_MAGIC} N={} basis={BASIS_TAG}\n{COLUMNS}\n", f.truncation());
    push_rows(&mut out, f.modes(), f.coeffs());
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(s: &'a str) -> Self {
        Self { inner: s.lines().enumerate() }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => return Ok((i + 1, l.trim())),
                None => {
                    return Err(SpeError::Parse {
                        line: 0,
                        message: "unexpected end of input".into(),
                    })
                }
            }
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> SpeError {
    SpeError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from '{s}'")))
}

fn read_rows(lines: &mut Lines<'_>, modes: &ModeSet) -> Result<Vec<Vec2c>> {
    let mut coeffs = Vec::with_capacity(modes.len());
    for expected in modes.modes() {
        let (no, l) = lines.next_line()?;
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 7 {
            return Err(parse_err(no, format!("expected 7 columns, found {}", cols.len())));
        }
        let k = ModeIndex {
            k1: parse_num(no, cols[0], "k1")?,
            k2: parse_num(no, cols[1], "k2")?,
            k3: parse_num(no, cols[2], "k3")?,
        };
        if k != *expected {
            return Err(parse_err(no, format!("expected mode {expected}, found {k}")));
        }
        let v: Vec<f64> = cols[3..]
            .iter()
            .map(|c| parse_num(no, c, "coefficient"))
            .collect::<Result<_>>()?;
        coeffs.push([Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])]);
    }
    Ok(coeffs)
}

fn header_fields(line: &str) -> HashMap<&str, &str> {
    line.split_whitespace().filter_map(|t| t.split_once('=')).collect()
}

pub fn field_from_str(s: &str) -> Result<SpectralField> {
    let mut lines = Lines::new(s);
    let (no, head) = lines.next_line()?;
    let rest = head
        .strip_prefix(FIELD_MAGIC)
        .ok_or_else(|| parse_err(no, "missing field header"))?;
    let fields = header_fields(rest);
    let basis = fields.get("basis").copied().unwrap_or("");
    if basis != BASIS_TAG {
        return Err(parse_err(no, format!("unsupported basis tag '{basis}'")));
    }
    let n: u32 = parse_num(no, fields.get("N").copied().unwrap_or(""), "N")?;
    let (no, cols) = lines.next_line()?;
    if cols != COLUMNS {
        return Err(parse_err(no, "unexpected column line"));
    }
    let modes = ModeSet::new(n)?;
    let coeffs = read_rows(&mut lines, &modes)?;
    SpectralField::from_coeffs(modes, coeffs)
}

pub fn write_field(path: impl AsRef<Path>, f: &SpectralField) -> Result<()> {
    std::fs::write(path, field_to_string(f))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<SpectralField> {
    field_from_str(&std::fs::read_to_string(path)?)
}

pub fn trajectory_to_string(t: &Trajectory) -> String {
    let p = &t.params;
    let mut out = String::new();
    let _ = writeln!(out, "{TRAJECTORY_MAGIC}");
    let _ = writeln!(out, "version={TRAJECTORY_VERSION}");
    let _ = writeln!(out, "basis={BASIS_TAG}");
    let _ = writeln!(out, "N={}", t.truncation());
    let _ = writeln!(out, "nu_h={:e}", p.nu_h);
    let _ = writeln!(out, "nu_z={:e}", p.nu_z);
    let _ = writeln!(out, "f0={:e}", p.f0);
    let _ = writeln!(out, "sigma0={:e}", p.noise.sigma0);
    let _ = writeln!(out, "gamma={:e}", p.noise.gamma);
    let _ = writeln!(out, "ck_rule={}", p.noise.ck_rule);
    let _ = writeln!(out, "t_final={:e}", p.t_final);
    let _ = writeln!(out, "nonlinear={}", p.nonlinear);
    if let Some(c) = &t.solver {
        let _ = writeln!(out, "solver.n={}", c.n);
        let _ = writeln!(out, "solver.dt={:e}", c.dt);
        let _ = writeln!(out, "solver.scheme={}", c.scheme);
        let _ = writeln!(out, "solver.convolution={}", c.convolution);
        let _ = writeln!(out, "solver.store_every={}", c.store_every);
        let _ = writeln!(out, "solver.log_noise={}", c.log_noise);
    }
    let _ = writeln!(out, "seed={}", t.seed);
    let _ = writeln!(out, "replication={}", t.replication);
    let _ = writeln!(out, "states={}", t.states.len());
    let _ = writeln!(out, "noise_log={}", t.noise_log.is_some());
    let _ = writeln!(out, "{COLUMNS}");
    for (i, (time, s)) in t.times.iter().zip(&t.states).enumerate() {
        let _ = writeln!(out, "@state {i} t={time:e}");
        push_rows(&mut out, s.modes(), s.coeffs());
    }
    if let (Some(log), Some(first)) = (&t.noise_log, t.states.first()) {
        for (i, f) in log.iter().enumerate() {
            let _ = writeln!(out, "@forcing {i}");
            push_rows(&mut out, first.modes(), f);
        }
    }
    out
}

pub fn trajectory_from_str(s: &str) -> Result<Trajectory> {
    let mut lines = Lines::new(s);
    let (no, magic) = lines.next_line()?;
    if magic != TRAJECTORY_MAGIC {
        return Err(parse_err(no, "missing trajectory header"));
    }
    let mut header: HashMap<String, (usize, String)> = HashMap::new();
    loop {
        let (no, l) = lines.next_line()?;
        if l == COLUMNS {
            break;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| parse_err(no, format!("expected key=value, found '{l}'")))?;
        header.insert(k.trim().to_string(), (no, v.trim().to_string()));
    }
    let get = |key: &str| -> Result<(usize, &str)> {
        header
            .get(key)
            .map(|(n, v)| (*n, v.as_str()))
            .ok_or_else(|| parse_err(0, format!("missing header key '{key}'")))
    };
    let num = |key: &str| -> Result<f64> {
        let (no, v) = get(key)?;
        parse_num(no, v, key)
    };
    let (no, version) = get("version")?;
    if parse_num::<u32>(no, version, "version")? != TRAJECTORY_VERSION {
        return Err(parse_err(no, format!("unsupported trajectory version {version}")));
    }
    let (no, basis) = get("basis")?;
    if basis != BASIS_TAG {
        return Err(parse_err(no, format!("unsupported basis tag '{basis}'")));
    }
    let (no, n) = get("N")?;
    let n: u32 = parse_num(no, n, "N")?;
    let (no, ck) = get("ck_rule")?;
    let params = ModelParams {
        nu_h: num("nu_h")?,
        nu_z: num("nu_z")?,
        f0: num("f0")?,
        noise: NoiseSpec {
            sigma0: num("sigma0")?,
            gamma: num("gamma")?,
            ck_rule: ck.parse().map_err(|e: SpeError| parse_err(no, e.to_string()))?,
        },
        t_final: num("t_final")?,
        nonlinear: {
            let (no, v) = get("nonlinear")?;
            parse_num(no, v, "nonlinear")?
        },
    };
    let solver = if header.contains_key("solver.n") {
        let field = |key: &str| -> Result<(usize, &str)> { get(&format!("solver.{key}")) };
        let (a, n_s) = field("n")?;
        let (b, scheme) = field("scheme")?;
        let (c, conv) = field("convolution")?;
        let (d, store) = field("store_every")?;
        let (e, log) = field("log_noise")?;
        let (g, dt) = field("dt")?;
        Some(SolverConfig {
            n: parse_num(a, n_s, "solver.n")?,
            dt: parse_num(g, dt, "solver.dt")?,
            scheme: scheme.parse().map_err(|e: SpeError| parse_err(b, e.to_string()))?,
            convolution: conv.parse().map_err(|e: SpeError| parse_err(c, e.to_string()))?,
            store_every: parse_num(d, store, "solver.store_every")?,
            log_noise: parse_num(e, log, "solver.log_noise")?,
        })
    } else {
        None
    };
    let (no, seed) = get("seed")?;
    let seed = parse_num(no, seed, "seed")?;
    let (no, rep) = get("replication")?;
    let replication = parse_num(no, rep, "replication")?;
    let (no, count) = get("states")?;
    let count: usize = parse_num(no, count, "states")?;
    let (no, has_log) = get("noise_log")?;
    let has_log: bool = parse_num(no, has_log, "noise_log")?;

    let modes: Arc<ModeSet> = ModeSet::new(n)?;
    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for i in 0..count {
        let (no, l) = lines.next_line()?;
        let rest = l
            .strip_prefix("@state ")
            .ok_or_else(|| parse_err(no, format!("expected state block {i}")))?;
        let (idx, t) = rest
            .split_once(" t=")
            .ok_or_else(|| parse_err(no, "malformed state block header"))?;
        if parse_num::<usize>(no, idx, "block index")? != i {
            return Err(parse_err(no, format!("state blocks out of order at {i}")));
        }
        times.push(parse_num(no, t, "time")?);
        let coeffs = read_rows(&mut lines, &modes)?;
        states.push(SpectralField::from_coeffs(modes.clone(), coeffs)?);
    }
    let noise_log = if has_log {
        let mut log = Vec::with_capacity(count.saturating_sub(1));
        for i in 0..count.saturating_sub(1) {
            let (no, l) = lines.next_line()?;
            let idx = l
                .strip_prefix("@forcing ")
                .ok_or_else(|| parse_err(no, format!("expected forcing block {i}")))?;
            if parse_num::<usize>(no, idx, "block index")? != i {
                return Err(parse_err(no, format!("forcing blocks out of order at {i}")));
            }
            log.push(read_rows(&mut lines, &modes)?);
        }
        Some(log)
    } else {
        None
    };
    let traj = Trajectory {
        times,
        states,
        params,
        solver,
        seed,
        replication,
        noise_log,
    };
    traj.validate()?;
    Ok(traj)
}

pub fn write_trajectory(path: impl AsRef<Path>, t: &Trajectory) -> Result<()> {
    std::fs::write(path, trajectory_to_string(t))?;
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    trajectory_from_str(&std::fs::read_to_string(path)?)
}
