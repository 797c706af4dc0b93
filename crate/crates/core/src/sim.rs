//! Pseudospectral integration of the dispersive equation
//! `i∂_t u + ε∂_x²u ± 2DΠ(|u|²)u = 0` on a periodic box.
//!
//! The state is kept in Fourier space on wavenumbers `k_j = 2πj/L`. Only modes
//! with `k ≥ 0` and `|j| < M/3` are ever populated: the mask is both the Szegő
//! projector and the 2/3 dealiasing rule. Time stepping is fourth-order
//! Runge–Kutta in integrating-factor form, so the linear phase `e^{−iεk²t}` is
//! exact.
//!
//! Checkpoints are a single line of JSON followed by `M` little-endian
//! `(f32 re, f32 im)` pairs holding the Fourier-series coefficients
//! `û_j / M` in FFT order (`j = 0, 1, …, M/2−1, −M/2, …, −1`).

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branches::branch_set;
use crate::hardy::{RationalHardyFunction, SignMode};
use crate::zdl::zd_rational;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("box of length {length} leaves {fraction:.3e} of the mass outside (limit {limit:.1e})")]
    BoxTooSmall { length: f64, fraction: f64, limit: f64 },
    #[error("focusing data needs ‖u₀‖² < 2π, got {0}")]
    FocusingMassExceeded(f64),
    #[error("relative mass change {drift:.3e} in one step at t = {t}; reduce dt")]
    CFLViolation { t: f64, drift: f64 },
    #[error("test function {index} is not supported inside the box")]
    TestFunctionLeavesBox { index: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Default limit on the fraction of `‖u₀‖²` lying outside the box.
pub const DEFAULT_OUTSIDE_MASS: f64 = 0.05;
const STEP_DRIFT_LIMIT: f64 = 1e-6;

pub struct SimState {
    pub length: f64,
    pub modes: usize,
    pub eps: f64,
    pub sign: SignMode,
    pub t: f64,
    pub dt: f64,
    coeffs: Vec<C64>,
    k: Vec<f64>,
    mask: Vec<bool>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    mass0: f64,
    /// Pairs `(t, mass)` recorded by [`evolve`].
    pub mass_series: Vec<(f64, f64)>,
    /// Fraction of `‖u₀‖²` outside the box at initialization.
    pub outside_mass: f64,
    /// Fraction of the sampled data's energy at negative frequencies before masking.
    pub initial_leakage: f64,
    /// Nonlinear term switch, for linear-propagation checks.
    pub nonlinear: bool,
}

impl std::fmt::Debug for SimState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimState")
            .field("length", &self.length)
            .field("modes", &self.modes)
            .field("eps", &self.eps)
            .field("sign", &self.sign)
            .field("t", &self.t)
            .field("dt", &self.dt)
            .finish()
    }
}

/// `0.5 L / (π M (1 + 2‖u₀‖²_∞))`.
pub fn default_dt(length: f64, modes: usize, linf: f64) -> f64 {
    0.5 * length / (PI * modes as f64 * (1.0 + 2.0 * linf * linf))
}

fn wavenumbers(length: f64, modes: usize) -> (Vec<f64>, Vec<bool>) {
    let m = modes as i64;
    let mut k = Vec::with_capacity(modes);
    let mut mask = Vec::with_capacity(modes);
    for j in 0..m {
        let jj = if j < m / 2 { j } else { j - m };
        k.push(2.0 * PI * jj as f64 / length);
        mask.push(jj >= 0 && 3 * jj.abs() < m);
    }
    (k, mask)
}

fn blank(length: f64, modes: usize, eps: f64, sign: SignMode, dt: f64) -> Result<SimState, SimError> {
    if !modes.is_power_of_two() || modes < 16 {
        return Err(SimError::InvalidParameters(format!("M = {modes} must be a power of two ≥ 16")));
    }
    if !(eps > 0.0) {
        return Err(SimError::InvalidParameters(format!("ε = {eps} must be positive")));
    }
    if !(length > 0.0) || !(dt > 0.0) {
        return Err(SimError::InvalidParameters(format!("L = {length}, dt = {dt}")));
    }
    let (k, mask) = wavenumbers(length, modes);
    let mut planner = FftPlanner::new();
    Ok(SimState {
        length,
        modes,
        eps,
        sign,
        t: 0.0,
        dt,
        coeffs: vec![C64::new(0.0, 0.0); modes],
        k,
        mask,
        fft: planner.plan_fft_forward(modes),
        ifft: planner.plan_fft_inverse(modes),
        mass0: 0.0,
        mass_series: Vec::new(),
        outside_mass: 0.0,
        initial_leakage: 0.0,
        nonlinear: true,
    })
}

/// Samples `u₀` on `x_j = −L/2 + jL/M` and projects onto the admissible modes.
pub fn init_sim(
    u: &RationalHardyFunction,
    length: f64,
    modes: usize,
    eps: f64,
    sign: SignMode,
    dt: Option<f64>,
) -> Result<SimState, SimError> {
    init_sim_with_limit(u, length, modes, eps, sign, dt, DEFAULT_OUTSIDE_MASS)
}

pub fn init_sim_with_limit(
    u: &RationalHardyFunction,
    length: f64,
    modes: usize,
    eps: f64,
    sign: SignMode,
    dt: Option<f64>,
    outside_limit: f64,
) -> Result<SimState, SimError> {
    let total = u
        .l2_norm_sq()
        .map_err(|e| SimError::InvalidParameters(e.to_string()))?;
    if sign == SignMode::Focusing && total >= 2.0 * PI {
        return Err(SimError::FocusingMassExceeded(total));
    }
    let dt = dt.unwrap_or_else(|| default_dt(length, modes, u.linf_norm()));
    let mut s = blank(length, modes, eps, sign, dt)?;
    let xs = s.grid();
    let samples: Vec<C64> = xs.iter().map(|&x| u.eval_real(x)).collect();
    let inside: f64 = samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * length / modes as f64;
    s.outside_mass = if total > 0.0 { ((total - inside) / total).max(0.0) } else { 0.0 };
    if s.outside_mass > outside_limit {
        return Err(SimError::BoxTooSmall { length, fraction: s.outside_mass, limit: outside_limit });
    }
    let mut c = samples;
    s.fft.process(&mut c);
    let all: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    let negative: f64 = c
        .iter()
        .zip(&s.k)
        .filter(|(_, &k)| k < 0.0)
        .map(|(v, _)| v.norm_sqr())
        .sum();
    s.initial_leakage = if all > 0.0 { negative / all } else { 0.0 };
    for (v, &keep) in c.iter_mut().zip(&s.mask) {
        if !keep {
            *v = C64::new(0.0, 0.0);
        }
    }
    s.coeffs = c;
    s.mass0 = s.mass();
    s.mass_series.push((0.0, s.mass0));
    Ok(s)
}

impl SimState {
    pub fn grid(&self) -> Vec<f64> {
        let dx = self.length / self.modes as f64;
        (0..self.modes).map(|j| -0.5 * self.length + dx * j as f64).collect()
    }

    pub fn dx(&self) -> f64 {
        self.length / self.modes as f64
    }

    /// Raw (unnormalized) FFT coefficients.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn szego_mask(&self) -> &[bool] {
        &self.mask
    }

    /// `∫|u|² dx` on the box, `(L/M²) Σ |û_j|²`.
    pub fn mass(&self) -> f64 {
        let m = self.modes as f64;
        self.coeffs.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.length / (m * m)
    }

    pub fn initial_mass(&self) -> f64 {
        self.mass0
    }

    pub fn mass_drift(&self) -> f64 {
        if self.mass0 == 0.0 {
            0.0
        } else {
            (self.mass() / self.mass0 - 1.0).abs()
        }
    }

    /// Energy fraction in negative wavenumbers (zero unless the mask is bypassed).
    pub fn negative_frequency_fraction(&self) -> f64 {
        let all: f64 = self.coeffs.iter().map(|v| v.norm_sqr()).sum();
        let neg: f64 = self
            .coeffs
            .iter()
            .zip(&self.k)
            .filter(|(_, &k)| k < 0.0)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        if all > 0.0 {
            neg / all
        } else {
            0.0
        }
    }

    /// Values `u(t, x_j)` on the grid.
    pub fn physical(&self) -> Vec<C64> {
        let mut buf = self.coeffs.clone();
        self.ifft.process(&mut buf);
        let s = 1.0 / self.modes as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    fn to_physical(&self, c: &[C64]) -> Vec<C64> {
        let mut buf = c.to_vec();
        self.ifft.process(&mut buf);
        let s = 1.0 / self.modes as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    fn to_spectral(&self, p: &mut [C64]) {
        self.fft.process(p);
    }

    /// `±2i Π_mask F[(DΠ_mask|u|²) u]`.
    fn nonlinear_term(&self, c: &[C64]) -> Vec<C64> {
        if !self.nonlinear {
            return vec![C64::new(0.0, 0.0); c.len()];
        }
        let u = self.to_physical(c);
        let mut dens: Vec<C64> = u.iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect();
        self.to_spectral(&mut dens);
        for ((d, &k), &keep) in dens.iter_mut().zip(&self.k).zip(&self.mask) {
            *d = if keep { *d * k } else { C64::new(0.0, 0.0) };
        }
        let w = self.to_physical(&dens);
        let mut prod: Vec<C64> = w.iter().zip(&u).map(|(a, b)| a * b).collect();
        self.to_spectral(&mut prod);
        let f = C64::new(0.0, 2.0 * self.sign.pm());
        for (p, &keep) in prod.iter_mut().zip(&self.mask) {
            *p = if keep { *p * f } else { C64::new(0.0, 0.0) };
        }
        prod
    }

    fn rk4(&self, h: f64) -> Vec<C64> {
        let e: Vec<C64> = self
            .k
            .iter()
            .map(|&k| C64::from_polar(1.0, -self.eps * k * k * h * 0.5))
            .collect();
        let u = &self.coeffs;
        let n = u.len();
        let scale = |v: Vec<C64>| -> Vec<C64> { v.into_iter().map(|x| x * h).collect() };
        let a = scale(self.nonlinear_term(u));
        let arg: Vec<C64> = (0..n).map(|j| e[j] * (u[j] + a[j] * 0.5)).collect();
        let b = scale(self.nonlinear_term(&arg));
        let arg: Vec<C64> = (0..n).map(|j| e[j] * u[j] + b[j] * 0.5).collect();
        let c = scale(self.nonlinear_term(&arg));
        let arg: Vec<C64> = (0..n).map(|j| e[j] * e[j] * u[j] + e[j] * c[j]).collect();
        let d = scale(self.nonlinear_term(&arg));
        (0..n)
            .map(|j| {
                let e2 = e[j] * e[j];
                e2 * u[j] + (e2 * a[j] + e[j] * (b[j] + c[j]) * 2.0 + d[j]) / 6.0
            })
            .collect()
    }

    fn advance(&mut self, h: f64) -> Result<(), SimError> {
        let before = self.mass();
        let next = self.rk4(h);
        let old = std::mem::replace(&mut self.coeffs, next);
        let after = self.mass();
        if before > 0.0 && ((after / before) - 1.0).abs() > STEP_DRIFT_LIMIT {
            let drift = ((after / before) - 1.0).abs();
            self.coeffs = old;
            return Err(SimError::CFLViolation { t: self.t, drift });
        }
        self.t += h;
        Ok(())
    }

    /// Pairings `Σ u(x_j) χ̄(x_j) Δx` with tabulated test functions.
    pub fn weak_pairings(&self, tests: &[Vec<C64>]) -> Result<Vec<C64>, SimError> {
        let u = self.physical();
        pairings(&u, tests, self.dx())
    }
}

/// One integrating-factor RK4 step of size `dt`.
pub fn step(state: &mut SimState) -> Result<(), SimError> {
    let h = state.dt;
    state.advance(h)
}

/// Steps to `target`, finishing with a partial step, and records the mass.
pub fn evolve(state: &mut SimState, target: f64) -> Result<(), SimError> {
    if target < state.t {
        return Err(SimError::InvalidParameters(format!(
            "target time {target} precedes current time {}",
            state.t
        )));
    }
    let dt = state.dt;
    let tol = 1e-12 * (1.0 + target.abs());
    while target - state.t > tol {
        let h = dt.min(target - state.t);
        state.advance(h)?;
        let m = state.mass();
        state.mass_series.push((state.t, m));
    }
    state.t = target.max(state.t);
    Ok(())
}

/// Gaussian `exp(−((x − c)/w)²)` tabulated on a grid.
pub fn gaussian(xs: &[f64], center: f64, width: f64) -> Vec<C64> {
    xs.iter()
        .map(|&x| C64::new((-((x - center) / width).powi(2)).exp(), 0.0))
        .collect()
}

fn pairings(u: &[C64], tests: &[Vec<C64>], dx: f64) -> Result<Vec<C64>, SimError> {
    let n = u.len();
    let edge = (n / 20).max(1);
    tests
        .iter()
        .enumerate()
        .map(|(index, chi)| {
            if chi.len() != n {
                return Err(SimError::InvalidParameters(format!(
                    "test function {index} has {} samples, grid has {n}",
                    chi.len()
                )));
            }
            let peak = chi.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let boundary = chi[..edge]
                .iter()
                .chain(&chi[n - edge..])
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            if boundary > 1e-12 * peak {
                return Err(SimError::TestFunctionLeavesBox { index });
            }
            Ok(u.iter().zip(chi).map(|(a, b)| a * b.conj()).sum::<C64>() * dx)
        })
        .collect()
}

/// Pairings of an arbitrary grid function.
pub fn weak_pairings_of(values: &[C64], tests: &[Vec<C64>], dx: f64) -> Result<Vec<C64>, SimError> {
    pairings(values, tests, dx)
}

/// Closed-form limit on a grid; points too close to a critical value are
/// evaluated at a slightly shifted abscissa.
pub fn zd_on_grid(u: &RationalHardyFunction, t: f64, sign: SignMode, xs: &[f64]) -> Vec<C64> {
    xs.iter()
        .map(|&x| {
            for shift in [0.0, 1e-6, -1e-6, 1e-5, -1e-5, 1e-4] {
                if let Ok(bs) = branch_set(u, t, x + shift, sign) {
                    if let Ok(s) = zd_rational(u, &bs) {
                        return s.value;
                    }
                }
            }
            C64::new(f64::NAN, f64::NAN)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTest {
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub length: f64,
    pub modes: usize,
    pub dt: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { length: 80.0, modes: 2048, dt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub pairing_errors: Vec<f64>,
    pub mass_drift: f64,
    pub wall_time_s: f64,
}

/// `|⟨u^ε(t) − ZD(t), χ⟩|` for each test function and each `ε`.
pub fn epsilon_sweep(
    u: &RationalHardyFunction,
    sign: SignMode,
    t: f64,
    eps_list: &[f64],
    tests: &[GaussianTest],
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>, SimError> {
    if eps_list.is_empty() {
        return Err(SimError::InvalidParameters("empty ε list".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(SimError::InvalidParameters("every ε must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SimError::InvalidParameters("ε list must be strictly descending".into()));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut zd: Option<(Vec<C64>, Vec<Vec<C64>>)> = None;
    for &eps in eps_list {
        let start = Instant::now();
        let mut s = init_sim(u, cfg.length, cfg.modes, eps, sign, cfg.dt)?;
        let xs = s.grid();
        let (z, chis) = zd.get_or_insert_with(|| {
            let z = zd_on_grid(u, t, sign, &xs);
            let chis = tests.iter().map(|g| gaussian(&xs, g.center, g.width)).collect();
            (z, chis)
        });
        evolve(&mut s, t)?;
        let ue = s.physical();
        let diff: Vec<C64> = ue.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
        let p = pairings(&diff, chis, s.dx())?;
        rows.push(SweepRow {
            eps,
            pairing_errors: p.iter().map(|v| v.norm()).collect(),
            mass_drift: s.mass_drift(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    #[serde(rename = "L")]
    length: f64,
    #[serde(rename = "M")]
    modes: usize,
    eps: f64,
    sign: SignMode,
    t: f64,
    dt: f64,
}

const CHECKPOINT_FORMAT: &str = "cmzd-sim-v1";

pub fn write_checkpoint<W: Write>(state: &SimState, mut w: W) -> Result<(), SimError> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        length: state.length,
        modes: state.modes,
        eps: state.eps,
        sign: state.sign,
        t: state.t,
        dt: state.dt,
    };
    let line = serde_json::to_string(&header).map_err(|e| SimError::Checkpoint(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    let s = 1.0 / state.modes as f64;
    let mut bytes = Vec::with_capacity(8 * state.modes);
    for v in &state.coeffs {
        bytes.extend_from_slice(&((v.re * s) as f32).to_le_bytes());
        bytes.extend_from_slice(&((v.im * s) as f32).to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<SimState, SimError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| SimError::Checkpoint(e.to_string()))?;
    if h.format != CHECKPOINT_FORMAT {
        return Err(SimError::Checkpoint(format!("unknown format '{}'", h.format)));
    }
    let mut s = blank(h.length, h.modes, h.eps, h.sign, h.dt)?;
    let mut bytes = vec![0u8; 8 * h.modes];
    r.read_exact(&mut bytes)?;
    let m = h.modes as f64;
    for (j, chunk) in bytes.chunks_exact(8).enumerate() {
        let re = f32::from_le_bytes(chunk[..4].try_into().expect("4 bytes"));
        let im = f32::from_le_bytes(chunk[4..].try_into().expect("4 bytes"));
        s.coeffs[j] = if s.mask[j] { C64::new(re as f64 * m, im as f64 * m) } else { C64::new(0.0, 0.0) };
    }
    s.t = h.t;
    s.mass0 = s.mass();
    s.mass_series.push((s.t, s.mass0));
    Ok(s)
}
