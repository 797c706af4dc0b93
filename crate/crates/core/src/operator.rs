//! Resolvent formulas on a discretized Fourier half-line.
//!
//! Functions in the Hardy space are represented by samples of `f̂` at the cell
//! centres `ξ_j = (j + ½)h` of `[0, Ξ]`. On this grid
//!
//! * `X*` acts as `i∂_ξ`, discretized by a one-sided second-order stencil that
//!   looks towards larger `ξ`, so `X* − z` is upper triangular and banded;
//! * `T_{u₀}` is a lower-triangular Toeplitz matrix with entries
//!   `(h/2π) û₀(nh)` (trapezoid weights), and `T_{u₀}T_{ū₀} = A A*`;
//! * `I₊(f) = f̂(0⁺)` is a three-point extrapolation to `ξ = 0`.
//!
//! The limit is `ZD(t, z) = I₊[(X* ∓ 2tAA* − z)⁻¹ û₀] / 2πi` for `Im z > 0`.
//! Systems are solved by GMRES, right-preconditioned with the exact
//! triangular solve of `X* − z`. Beyond `Ξ` the solution is continued by a
//! single geometric mode whose ratio is read off the computed interior, which
//! removes most of the truncation error at small `Im z`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::branches::branch_set;
use crate::hardy::{fourier_halfline, RationalHardyFunction, SignMode};
use crate::linalg::{gmres, DenseMatrix, GmresConfig};
use crate::zdl::{Route, ZDSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("linear solve failed near the discrete spectrum: {0}")]
    LinearSolveSingular(String),
    #[error("height δ = {0} outside [1e-3, 1e-1]")]
    InvalidHeight(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct OperatorOptions {
    /// Continue solutions past `Ξ` by one geometric mode.
    pub far_field_closure: bool,
    pub max_closure_iterations: usize,
    pub closure_tol: f64,
    pub gmres: GmresConfig,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self {
            far_field_closure: true,
            max_closure_iterations: 8,
            closure_tol: 1e-11,
            gmres: GmresConfig { restart: 200, max_iterations: 4000, rel_tol: 1e-12 },
        }
    }
}

pub struct HalfLineOperator {
    u: RationalHardyFunction,
    xi_max: f64,
    m: usize,
    tail: usize,
    h: f64,
    xi: Vec<f64>,
    xi_ext: Vec<f64>,
    u0_hat: Vec<C64>,
    kernel: Vec<C64>,
    kernel_hat: Vec<C64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    pub options: OperatorOptions,
}

impl std::fmt::Debug for HalfLineOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HalfLineOperator")
            .field("xi_max", &self.xi_max)
            .field("m", &self.m)
            .field("tail", &self.tail)
            .finish()
    }
}

/// `(15 f₀ − 10 f₁ + 3 f₂)/8`, exact for quadratics sampled at `h/2, 3h/2, 5h/2`.
pub fn extract_i_plus(f_hat: &[C64]) -> C64 {
    match f_hat.len() {
        0 => C64::new(0.0, 0.0),
        1 => f_hat[0],
        2 => (f_hat[0] * 3.0 - f_hat[1]) * 0.5,
        _ => (f_hat[0] * 15.0 - f_hat[1] * 10.0 + f_hat[2] * 3.0) / 8.0,
    }
}

pub fn build_halfline(
    u: &RationalHardyFunction,
    xi_max: f64,
    m: usize,
) -> Result<HalfLineOperator, OperatorError> {
    if m < 64 {
        return Err(OperatorError::GridTooCoarse(format!("M = {m} < 64")));
    }
    if !(xi_max > 0.0) {
        return Err(OperatorError::GridTooCoarse(format!("Ξ = {xi_max}")));
    }
    let h = xi_max / m as f64;
    let tail = m;
    let xi: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) * h).collect();
    let xi_ext: Vec<f64> = (0..m + tail).map(|j| (j as f64 + 0.5) * h).collect();
    let u0_hat = fourier_halfline(u, &xi);
    let mut kernel: Vec<C64> = (0..m + tail)
        .map(|n| u.fourier_hat(n as f64 * h) * (h / (2.0 * PI)))
        .collect();
    kernel[0] *= 0.5;
    let len = 2 * (m + tail);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(len);
    let ifft = planner.plan_fft_inverse(len);
    let mut kernel_hat = vec![C64::new(0.0, 0.0); len];
    kernel_hat[..kernel.len()].copy_from_slice(&kernel);
    fft.process(&mut kernel_hat);
    let scale = 1.0 / len as f64;
    kernel_hat.iter_mut().for_each(|v| *v *= scale);

    let peak = u0_hat.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let edge = u.fourier_hat(xi_max).norm();
    if peak > 0.0 && edge > 1e-8 * peak {
        log::warn!("|û₀(Ξ)| = {edge:e} is not negligible against max |û₀| = {peak:e}");
    }
    let op = HalfLineOperator {
        u: u.clone(),
        xi_max,
        m,
        tail,
        h,
        xi,
        xi_ext,
        u0_hat,
        kernel,
        kernel_hat,
        fft,
        ifft,
        options: OperatorOptions::default(),
    };
    if !u.is_zero() {
        let z = C64::new(0.0, 1.0);
        let approx = op.resolvent_identity(u, z);
        let exact = u.eval(z).map_err(|e| OperatorError::GridTooCoarse(e.to_string()))?;
        let rel = (approx - exact).norm() / exact.norm().max(1e-300);
        if rel > 5e-2 {
            return Err(OperatorError::GridTooCoarse(format!(
                "resolvent self-test error {rel:.3e} at z = i"
            )));
        }
    }
    Ok(op)
}

impl HalfLineOperator {
    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn u0_hat(&self) -> &[C64] {
        &self.u0_hat
    }

    /// Multiplier `ξ_j` of the dispersion term.
    pub fn dispersion(&self) -> &[f64] {
        &self.xi
    }

    pub fn data(&self) -> &RationalHardyFunction {
        &self.u
    }

    /// Toeplitz symbol entries `a_n`, `n = 0 … M + T − 1`.
    pub fn kernel(&self) -> &[C64] {
        &self.kernel
    }

    /// `(A x)_i = Σ_{k ≤ i} a_{i−k} x_k` for `x` of length at most `M + T`.
    fn lower(&self, x: &[C64]) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.kernel_hat.len()];
        buf[..x.len()].copy_from_slice(x);
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.ifft.process(&mut buf);
        buf.truncate(x.len());
        buf
    }

    /// `(A* x)_j = Σ_{k ≥ j} ā_{k−j} x_k` by reversing and conjugating.
    fn upper(&self, x: &[C64]) -> Vec<C64> {
        let rev: Vec<C64> = x.iter().rev().map(|v| v.conj()).collect();
        let mut out = self.lower(&rev);
        out.reverse();
        out.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    /// `T_{u₀}T_{ū₀} x` on the truncated grid.
    pub fn apply_toeplitz_prod(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.m);
        self.lower(&self.upper(x))
    }

    /// First `M` rows of `A A* x` for an extended vector of length `M + T`.
    fn toeplitz_prod_ext(&self, x_ext: &[C64]) -> Vec<C64> {
        let mut w = self.upper(x_ext);
        w.truncate(self.m);
        self.lower(&w)
    }

    /// Dense `M × M` Toeplitz product, for small grids and diagnostics.
    pub fn toeplitz_prod_dense(&self) -> DenseMatrix {
        let m = self.m;
        let a = |n: isize| if n >= 0 { self.kernel[n as usize] } else { C64::new(0.0, 0.0) };
        DenseMatrix::from_fn(m, |i, j| {
            (0..=i.min(j))
                .map(|k| a(i as isize - k as isize) * a(j as isize - k as isize).conj())
                .sum()
        })
    }

    /// Dense `i∂_ξ` with the forward stencil and zero values past `Ξ`.
    pub fn xstar_dense(&self) -> DenseMatrix {
        let (c0, c1, c2) = self.stencil();
        DenseMatrix::from_fn(self.m, |i, j| {
            if j == i {
                c0
            } else if j == i + 1 {
                c1
            } else if j == i + 2 {
                c2
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    fn stencil(&self) -> (C64, C64, C64) {
        let s = 1.0 / (2.0 * self.h);
        (C64::new(0.0, -3.0 * s), C64::new(0.0, 4.0 * s), C64::new(0.0, -s))
    }

    /// Solves `(X* − z) f = g`, with `f_{M−1+m} = f_{M−1} ρ^m` past the grid.
    fn triangular_solve(&self, g: &[C64], z: C64, rho: C64) -> Result<Vec<C64>, OperatorError> {
        let m = self.m;
        let (s0, c1, c2) = self.stencil();
        let c0 = s0 - z;
        let last = c0 + c1 * rho + c2 * rho * rho;
        if last.norm() == 0.0 || c0.norm() == 0.0 {
            return Err(OperatorError::LinearSolveSingular("zero pivot in X* − z".into()));
        }
        let mut f = vec![C64::new(0.0, 0.0); m];
        f[m - 1] = g[m - 1] / last;
        f[m - 2] = (g[m - 2] - c1 * f[m - 1] - c2 * rho * f[m - 1]) / c0;
        for j in (0..m - 2).rev() {
            f[j] = (g[j] - c1 * f[j + 1] - c2 * f[j + 2]) / c0;
        }
        Ok(f)
    }

    fn extend(&self, f: &[C64], rho: C64) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.m + self.tail);
        out.extend_from_slice(f);
        let mut v = f[self.m - 1];
        for _ in 0..self.tail {
            v *= rho;
            out.push(v);
        }
        out
    }

    fn decay_ratio(&self, f: &[C64]) -> C64 {
        let m = self.m;
        let j1 = m - 1 - ((0.075 * self.xi_max / self.h) as usize).min(m - 1);
        let j2 = m - 1 - ((0.15 * self.xi_max / self.h) as usize).min(m - 1);
        if j1 == j2 || f[j1] == C64::new(0.0, 0.0) || f[j2] == C64::new(0.0, 0.0) {
            return C64::new(0.0, 0.0);
        }
        let rho = ((f[j1] / f[j2]).ln() / (j1 as f64 - j2 as f64)).exp();
        if rho.norm() < 1.0 && rho.is_finite() {
            rho
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// `I₊[(X* − k Φ*AA*Φ − z)⁻¹ rhs] / 2πi`, where `Φ` is an optional unit
    /// diagonal on the extended grid.
    fn solve_value(
        &self,
        k: f64,
        z: C64,
        rhs: &[C64],
        phase: Option<&[C64]>,
    ) -> Result<C64, OperatorError> {
        let m = self.m;
        let to_value = |f: &[C64]| extract_i_plus(f) / C64::new(0.0, 2.0 * PI);
        let mut rho = C64::new(0.0, 0.0);
        let mut value: Option<C64> = None;
        let iterations = if self.options.far_field_closure {
            self.options.max_closure_iterations.max(1)
        } else {
            1
        };
        for _ in 0..iterations {
            let f = if k == 0.0 {
                self.triangular_solve(rhs, z, rho)?
            } else {
                let mut failure = None;
                let apply = |g: &[C64], out: &mut [C64]| {
                    let y = match self.triangular_solve(g, z, rho) {
                        Ok(y) => y,
                        Err(e) => {
                            failure = Some(e);
                            vec![C64::new(0.0, 0.0); m]
                        }
                    };
                    let mut ext = self.extend(&y, rho);
                    if let Some(ph) = phase {
                        ext.iter_mut().zip(ph).for_each(|(v, p)| *v *= p);
                    }
                    let kx = self.toeplitz_prod_ext(&ext);
                    for j in 0..m {
                        let term = match phase {
                            Some(ph) => ph[j].conj() * kx[j],
                            None => kx[j],
                        };
                        out[j] = g[j] - term * k;
                    }
                };
                let (g, _) = gmres(apply, rhs, &self.options.gmres)
                    .map_err(|e| OperatorError::LinearSolveSingular(e.to_string()))?;
                if let Some(e) = failure {
                    return Err(e);
                }
                self.triangular_solve(&g, z, rho)?
            };
            let nv = to_value(&f);
            if !nv.is_finite() {
                return Err(OperatorError::LinearSolveSingular("non-finite solution".into()));
            }
            let done = value.is_some_and(|v| (nv - v).norm() < self.options.closure_tol);
            value = Some(nv);
            if done || !self.options.far_field_closure {
                break;
            }
            rho = self.decay_ratio(&f);
        }
        Ok(value.unwrap_or_default())
    }

    /// `I₊((X* − z)⁻¹ f̂) / 2πi`, which should reproduce `f(z)` for `Im z > 0`.
    pub fn resolvent_identity(&self, f: &RationalHardyFunction, z: C64) -> C64 {
        let rhs = fourier_halfline(f, &self.xi);
        match self.triangular_solve(&rhs, z, C64::new(0.0, 0.0)) {
            Ok(sol) => extract_i_plus(&sol) / C64::new(0.0, 2.0 * PI),
            Err(_) => C64::new(f64::NAN, f64::NAN),
        }
    }

    /// Largest eigenvalue of `AA*` by power iteration.
    pub fn toeplitz_norm_estimate(&self, iterations: usize) -> f64 {
        let mut x: Vec<C64> = (0..self.m)
            .map(|j| C64::new(1.0 + 0.1 * ((j * 7919) % 13) as f64, 0.05 * (j % 5) as f64))
            .collect();
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let nrm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
            let y = self.apply_toeplitz_prod(&x);
            lambda = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            x = y;
        }
        lambda
    }
}

fn check_height(delta: f64) -> Result<(), OperatorError> {
    if (1e-3..=1e-1).contains(&delta) {
        Ok(())
    } else {
        Err(OperatorError::InvalidHeight(delta))
    }
}

/// `ZD(t, x + iδ)` at one height, without extrapolation.
pub fn resolve_at_height(
    op: &HalfLineOperator,
    t: f64,
    x: f64,
    sign: SignMode,
    delta: f64,
) -> Result<C64, OperatorError> {
    op.solve_value(sign.pm() * 2.0 * t, C64::new(x, delta), &op.u0_hat, None)
}

/// Three-level Richardson extrapolation in the height, `δ, δ/2, δ/4 → 0`.
fn richardson(f: impl Fn(f64) -> Result<C64, OperatorError>, delta: f64) -> Result<C64, OperatorError> {
    let a = f(delta)?;
    let b = f(delta / 2.0)?;
    let c = f(delta / 4.0)?;
    Ok((c * 8.0 - b * 6.0 + a) / 3.0)
}

pub fn resolve_zd_operator(
    op: &HalfLineOperator,
    t: f64,
    x: f64,
    sign: SignMode,
    delta: f64,
) -> Result<ZDSample, OperatorError> {
    check_height(delta)?;
    let value = richardson(|d| resolve_at_height(op, t, x, sign, d), delta)?;
    let ell = branch_set(op.data(), t, x, sign).map(|b| b.ell).unwrap_or(0);
    Ok(ZDSample::new(t, x, value, ell, Route::Operator))
}

/// `u^ε(t, x + iδ)` through `Φ (X* ∓ 2tΦ*AA*Φ − z)⁻¹ Φ* û₀` with
/// `Φ = e^{iεtξ²}`, the conjugated form of `X* + 2tεD ∓ 2tAA* − z`.
pub fn resolve_ueps_operator(
    op: &HalfLineOperator,
    t: f64,
    eps: f64,
    x: f64,
    sign: SignMode,
    delta: f64,
) -> Result<C64, OperatorError> {
    let z = C64::new(x, delta);
    let k = sign.pm() * 2.0 * t;
    if eps == 0.0 {
        return op.solve_value(k, z, &op.u0_hat, None);
    }
    let phase: Vec<C64> = op
        .xi_ext
        .iter()
        .map(|&s| C64::from_polar(1.0, eps * t * s * s))
        .collect();
    let rhs: Vec<C64> = op
        .u0_hat
        .iter()
        .zip(&phase)
        .map(|(u, p)| u * p.conj())
        .collect();
    op.solve_value(k, z, &rhs, Some(&phase))
}

/// `u^ε(t, x)` on the real line by Richardson extrapolation in the height.
pub fn resolve_ueps_real(
    op: &HalfLineOperator,
    t: f64,
    eps: f64,
    x: f64,
    sign: SignMode,
    delta: f64,
) -> Result<C64, OperatorError> {
    check_height(delta)?;
    richardson(|d| resolve_ueps_operator(op, t, eps, x, sign, d), delta)
}

/// Dense LU solve with zero continuation past `Ξ`; for small grids.
pub fn resolve_dense_at_height(
    op: &HalfLineOperator,
    t: f64,
    x: f64,
    sign: SignMode,
    delta: f64,
) -> Result<C64, OperatorError> {
    let z = C64::new(x, delta);
    let k = sign.pm() * 2.0 * t;
    let xs = op.xstar_dense();
    let kk = op.toeplitz_prod_dense();
    let a = DenseMatrix::from_fn(op.m, |i, j| {
        let d = if i == j { z } else { C64::new(0.0, 0.0) };
        xs.get(i, j) - kk.get(i, j) * k - d
    });
    let lu = a.lu().map_err(|e| OperatorError::LinearSolveSingular(e.to_string()))?;
    let f = lu.solve(&op.u0_hat);
    Ok(extract_i_plus(&f) / C64::new(0.0, 2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn i_plus_of_figure1() {
        let u = RationalHardyFunction::figure1();
        let op = build_halfline(&u, 40.0, 1024).unwrap();
        let v = extract_i_plus(op.u0_hat());
        assert!((v - c(0.0, -2.0 * PI)).norm() < 1e-4 * 2.0 * PI);
        assert_eq!(extract_i_plus(&[C64::new(0.0, 0.0); 8]), C64::new(0.0, 0.0));
        assert!((fourier_halfline(&u, &[0.0])[0] - c(0.0, -2.0 * PI)).norm() < 1e-15);
    }

    #[test]
    fn resolvent_identity_at_i() {
        let u = RationalHardyFunction::figure1();
        let op = build_halfline(&u, 40.0, 1024).unwrap();
        let v = op.resolvent_identity(&u, c(0.0, 1.0));
        assert!((v - c(0.0, -0.5)).norm() < 1e-3 * 0.5);
    }

    #[test]
    fn coarse_grid_rejected() {
        let u = RationalHardyFunction::figure1();
        assert!(matches!(build_halfline(&u, 40.0, 32), Err(OperatorError::GridTooCoarse(_))));
        assert!(matches!(build_halfline(&u, 400.0, 64), Err(OperatorError::GridTooCoarse(_))));
    }

    #[test]
    fn fft_products_match_dense() {
        let u = RationalHardyFunction::figure1();
        let op = build_halfline(&u, 10.0, 96).unwrap();
        let x: Vec<C64> = (0..96).map(|j| c((j as f64 * 0.3).sin(), (j as f64 * 0.17).cos())).collect();
        let fast = op.apply_toeplitz_prod(&x);
        let dense = op.toeplitz_prod_dense().matvec(&x);
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gmres_matches_dense_lu_without_closure() {
        let u = RationalHardyFunction::figure1();
        let mut op = build_halfline(&u, 20.0, 256).unwrap();
        op.options.far_field_closure = false;
        let a = resolve_at_height(&op, 2.0, -3.0, SignMode::Focusing, 0.1).unwrap();
        let b = resolve_dense_at_height(&op, 2.0, -3.0, SignMode::Focusing, 0.1).unwrap();
        assert!((a - b).norm() < 1e-9 * b.norm(), "{a} vs {b}");
    }

    #[test]
    fn time_zero_is_resolvent_identity() {
        let u = RationalHardyFunction::figure1();
        let op = build_halfline(&u, 40.0, 2048).unwrap();
        let d = 0.1;
        let v = resolve_at_height(&op, 0.0, 0.5, SignMode::Focusing, d).unwrap();
        let exact = u.eval(c(0.5, d)).unwrap();
        assert!((v - exact).norm() < 1e-3);
        let w = resolve_ueps_operator(&op, 0.0, 0.3, 0.5, SignMode::Focusing, d).unwrap();
        assert!((w - exact).norm() < 1e-3);
    }

    #[test]
    fn zero_dispersion_reduces_to_zd_path() {
        let u = RationalHardyFunction::figure1();
        let op = build_halfline(&u, 20.0, 512).unwrap();
        let a = resolve_at_height(&op, 1.0, 0.5, SignMode::Defocusing, 0.05).unwrap();
        let b = resolve_ueps_operator(&op, 1.0, 0.0, 0.5, SignMode::Defocusing, 0.05).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn height_checked() {
        let u = RationalHardyFunction::figure1();
        let op = build_halfline(&u, 20.0, 128).unwrap();
        assert!(matches!(
            resolve_zd_operator(&op, 1.0, 0.0, SignMode::Focusing, 0.5),
            Err(OperatorError::InvalidHeight(_))
        ));
    }
}
