//! Real and complex roots of the characteristic equation `y ∓ 2t v₀(y) = x`.
//!
//! For rational data the equation clears to a real polynomial of degree
//! `2N + 1`. Its real roots `y₀ < … < y_{2ℓ}` are the branches of the
//! multivalued Burgers solution at `(t, x)`. The complex roots come in
//! conjugate pairs.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hardy::{RationalHardyFunction, SignMode};
pub use crate::poly::polynomial_roots;
use crate::poly::{ComplexPolynomial, RootError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BranchError {
    #[error("complex root {0} has no conjugate partner")]
    UnpairedComplexRoot(C64),
    #[error("scan window [{lo}, {hi}] does not bracket every real root")]
    WindowTooNarrow { lo: f64, hi: f64 },
    #[error("scan found {0} real roots; refine the scan")]
    EvenRootCount(usize),
    #[error("branch set is degenerate (near-double root or critical point)")]
    DegenerateBranchSet,
    #[error(transparent)]
    Root(#[from] RootError),
}

pub const DEFAULT_TOL_IM: f64 = 1e-8;
pub const DEFAULT_SCAN_PANELS: usize = 20_000;
const DEGENERATE_GAP: f64 = 1e-6;
const DEGENERATE_SLOPE: f64 = 1e-6;

/// Roots of the characteristic equation at one `(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSet {
    pub t: f64,
    pub x: f64,
    pub sign: SignMode,
    pub real_roots: Vec<f64>,
    pub upper_roots: Vec<C64>,
    pub ell: usize,
    pub degenerate: bool,
    /// `γ_t′` at each real root.
    pub gamma_prime: Vec<f64>,
}

impl BranchSet {
    /// Real roots at even positions `y₀, y₂, …` followed by the upper roots.
    pub fn even_points(&self) -> Vec<C64> {
        self.real_roots
            .iter()
            .step_by(2)
            .map(|&y| C64::new(y, 0.0))
            .chain(self.upper_roots.iter().copied())
            .collect()
    }

    /// Real roots at odd positions followed by the conjugates of the upper roots.
    pub fn odd_points(&self) -> Vec<C64> {
        self.real_roots
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&y| C64::new(y, 0.0))
            .chain(self.upper_roots.iter().map(|w| w.conj()))
            .collect()
    }
}

fn build(
    t: f64,
    x: f64,
    sign: SignMode,
    mut real_roots: Vec<f64>,
    upper_roots: Vec<C64>,
    dv0: impl Fn(f64) -> f64,
) -> BranchSet {
    real_roots.sort_by(|a, b| a.total_cmp(b));
    let gamma_prime: Vec<f64> = real_roots
        .iter()
        .map(|&y| 1.0 - sign.pm() * 2.0 * t * dv0(y))
        .collect();
    let close = real_roots
        .windows(2)
        .any(|w| w[1] - w[0] < DEGENERATE_GAP);
    let flat = gamma_prime.iter().any(|g| g.abs() < DEGENERATE_SLOPE);
    let ell = real_roots.len().saturating_sub(1) / 2;
    BranchSet {
        t,
        x,
        sign,
        real_roots,
        upper_roots,
        ell,
        degenerate: close || flat,
        gamma_prime,
    }
}

/// `(y − x) Q Q̄ ∓ 2t P P̄`, monic of degree `2N + 1` with real coefficients.
pub fn branch_polynomial(
    u: &RationalHardyFunction,
    t: f64,
    x: f64,
    sign: SignMode,
) -> ComplexPolynomial {
    let v = u.modulus_squared_extension();
    let lin = ComplexPolynomial::from_real(&[-x, 1.0]);
    let p = lin
        .mul(&v.denominator)
        .sub(&v.numerator.scale(C64::new(sign.pm() * 2.0 * t, 0.0)));
    let scale = p.max_coeff().max(1.0);
    if p.max_imag() > 1e-12 * scale {
        log::warn!("branch polynomial has imaginary coefficients of size {:e}", p.max_imag());
    }
    p.realified()
}

/// Splits the roots of the branch polynomial into real roots and upper
/// members of conjugate pairs.
pub fn classify(
    roots: &[C64],
    t: f64,
    x: f64,
    u: &RationalHardyFunction,
    sign: SignMode,
    tol_im: f64,
) -> Result<BranchSet, BranchError> {
    let mut real = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for &r in roots {
        if r.im.abs() <= tol_im * (1.0 + r.norm()) {
            real.push(r.re);
        } else if r.im > 0.0 {
            upper.push(r);
        } else {
            lower.push(r);
        }
    }
    let mut used = vec![false; lower.len()];
    for &w in &upper {
        let best = lower
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .min_by(|a, b| (a.1 - w.conj()).norm().total_cmp(&(b.1 - w.conj()).norm()));
        match best {
            Some((i, l)) if (l - w.conj()).norm() <= 1e-6 * (1.0 + w.norm()) => used[i] = true,
            _ => return Err(BranchError::UnpairedComplexRoot(w)),
        }
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(BranchError::UnpairedComplexRoot(lower[i]));
    }
    let dv = u.modulus_squared_extension().derivative();
    Ok(build(t, x, sign, real, upper, |y| dv.eval_real(y)))
}

/// Roots of the branch polynomial, classified with the default tolerance.
pub fn branch_set(
    u: &RationalHardyFunction,
    t: f64,
    x: f64,
    sign: SignMode,
) -> Result<BranchSet, BranchError> {
    let p = branch_polynomial(u, t, x, sign);
    let roots = polynomial_roots(&p)?;
    classify(&roots, t, x, u, sign, DEFAULT_TOL_IM)
}

/// `±max(50, 10 max|p_k|)`.
pub fn default_window(u: &RationalHardyFunction) -> (f64, f64) {
    let r = u
        .pole_params()
        .iter()
        .map(|p| 10.0 * p.norm())
        .fold(50.0, f64::max);
    (-r, r)
}

/// Bisection to machine resolution followed by a guarded Newton step.
fn refine_root(g: &impl Fn(f64) -> f64, dg: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
        if b - a <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    let y = 0.5 * (a + b);
    let d = dg(y);
    if d != 0.0 {
        let next = y - g(y) / d;
        if next >= a && next <= b && g(next).abs() <= g(y).abs() {
            return next;
        }
    }
    y
}

/// Real roots of `y ∓ 2t v₀(y) = x` for general data by sign-change scanning.
#[allow(clippy::too_many_arguments)]
pub fn scan_roots_general(
    v0: impl Fn(f64) -> f64,
    dv0: impl Fn(f64) -> f64,
    t: f64,
    x: f64,
    sign: SignMode,
    window: (f64, f64),
    n_scan: usize,
) -> Result<BranchSet, BranchError> {
    let k = sign.pm() * 2.0 * t;
    let g = |y: f64| y - k * v0(y) - x;
    let dg = |y: f64| 1.0 - k * dv0(y);
    let (lo, hi) = window;
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return Err(BranchError::WindowTooNarrow { lo, hi });
    }
    let n = n_scan.max(2);
    let h = (hi - lo) / n as f64;
    let mut roots = Vec::new();
    let mut prev_y = lo;
    let mut prev_g = g(lo);
    for i in 1..=n {
        let y = if i == n { hi } else { lo + h * i as f64 };
        let gy = g(y);
        if gy == 0.0 {
            roots.push(y);
        } else if prev_g != 0.0 && (gy < 0.0) != (prev_g < 0.0) {
            roots.push(refine_root(&g, &dg, prev_y, y));
        }
        prev_y = y;
        prev_g = gy;
    }
    if roots.len() % 2 == 0 {
        return Err(BranchError::EvenRootCount(roots.len()));
    }
    Ok(build(t, x, sign, roots, Vec::new(), dv0))
}

/// First time at which `γ_t` stops being monotone, `1 / sup(±2 v₀′)`.
pub fn shock_time(
    u: &RationalHardyFunction,
    sign: SignMode,
    window: (f64, f64),
    n_scan: usize,
) -> f64 {
    if u.is_zero() {
        return f64::INFINITY;
    }
    let dv = u.modulus_squared_extension().derivative();
    let f = |y: f64| sign.pm() * 2.0 * dv.eval_real(y);
    let (lo, hi) = window;
    let n = n_scan.max(2);
    let h = (hi - lo) / n as f64;
    let (mut best_i, mut best) = (0, f(lo));
    for i in 1..=n {
        let v = f(lo + h * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    // Golden-section refinement on the two neighbouring panels.
    let mut a = lo + h * (best_i.max(1) - 1) as f64;
    let mut b = (lo + h * (best_i + 1) as f64).min(hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let sup = best.max(fc).max(fd);
    if sup <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / sup
    }
}

/// Images `γ_t(y*)` of the zeros of `γ_t′` found in the window, for general data.
pub fn critical_values_general(
    v0: impl Fn(f64) -> f64,
    dv0: impl Fn(f64) -> f64,
    d2v0: impl Fn(f64) -> f64,
    t: f64,
    sign: SignMode,
    window: (f64, f64),
    n_scan: usize,
) -> Vec<f64> {
    let k = sign.pm() * 2.0 * t;
    if k == 0.0 {
        return Vec::new();
    }
    let gp = |y: f64| 1.0 - k * dv0(y);
    let gpp = |y: f64| -k * d2v0(y);
    let (lo, hi) = window;
    let n = n_scan.max(2);
    let h = (hi - lo) / n as f64;
    let mut out = Vec::new();
    let mut prev_y = lo;
    let mut prev = gp(lo);
    for i in 1..=n {
        let y = lo + h * i as f64;
        let cur = gp(y);
        if (cur < 0.0) != (prev < 0.0) {
            let ys = refine_root(&gp, &gpp, prev_y, y);
            out.push(ys - k * v0(ys));
        }
        prev_y = y;
        prev = cur;
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

pub fn critical_values(
    u: &RationalHardyFunction,
    t: f64,
    sign: SignMode,
    window: (f64, f64),
    n_scan: usize,
) -> Vec<f64> {
    let v = u.modulus_squared_extension();
    let dv = v.derivative();
    let d2v = dv.derivative();
    critical_values_general(
        |y| v.eval_real(y),
        |y| dv.eval_real(y),
        |y| d2v.eval_real(y),
        t,
        sign,
        window,
        n_scan,
    )
}

/// Values `v₀(y_k)` of the multivalued Burgers solution at the real roots.
pub fn burgers_branches(bs: &BranchSet, u: &RationalHardyFunction) -> Result<Vec<f64>, BranchError> {
    if bs.degenerate {
        return Err(BranchError::DegenerateBranchSet);
    }
    Ok(bs.real_roots.iter().map(|&y| u.eval_real(y).norm_sqr()).collect())
}
