//! Pointwise evaluation of the zero-dispersion limit by closed formulas.
//!
//! Four routes are available for rational data: the odd-root quotient
//! `P(x)/∏(x − y_{2k−1})`, a ratio of Cauchy-type determinants, the finite-rank
//! linear system behind it, and the branch formula with its phase integral. The
//! branch formula also accepts general data through [`BranchData`].

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branches::{
    branch_set, critical_values, default_window, shock_time, BranchError, BranchSet,
    DEFAULT_SCAN_PANELS,
};
use crate::hardy::{RationalFunction, RationalHardyFunction, SignMode};
use crate::linalg::{DenseMatrix, LinalgError};
use crate::quad::{integrate_with_breaks, QuadConfig, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZdError {
    #[error("branch set is degenerate at x = {0}")]
    DegenerateBranchSet(f64),
    #[error("denominator determinant vanishes")]
    SingularDenominatorDeterminant,
    #[error("finite-rank system is singular")]
    SingularSystem,
    #[error("log argument {value:e} is negative at s = {s}")]
    NegativeLogArgument { s: f64, value: f64 },
    #[error("phase quadrature failed: {0}")]
    QuadratureNotConverged(#[from] QuadError),
    #[error("stencil at t + h = {0} reaches the shock time {1}")]
    StencilCrossesShock(f64, f64),
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error("operator route: {0}")]
    Operator(String),
}

/// Which formula produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Rational,
    Determinant,
    FiniteRank,
    BranchPhase,
    Operator,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Rational => "rational",
            Route::Determinant => "determinant",
            Route::FiniteRank => "finite_rank",
            Route::BranchPhase => "branch",
            Route::Operator => "operator",
        }
    }
}

impl FromStr for Route {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rational" => Ok(Route::Rational),
            "determinant" => Ok(Route::Determinant),
            "finite_rank" | "finite-rank" => Ok(Route::FiniteRank),
            "branch" | "branch_phase" => Ok(Route::BranchPhase),
            "operator" => Ok(Route::Operator),
            other => Err(format!("unknown route '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZDSample {
    pub t: f64,
    pub x: f64,
    pub value: C64,
    pub modulus: f64,
    /// `arg(value)` in `(−π, π]`.
    pub phase: f64,
    pub ell: usize,
    pub route: Route,
}

impl ZDSample {
    pub fn new(t: f64, x: f64, value: C64, ell: usize, route: Route) -> Self {
        Self { t, x, value, modulus: value.norm(), phase: value.arg(), ell, route }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldPoint {
    Valid(ZDSample),
    Excluded { x: f64, critical_value: f64 },
    Failed { x: f64, reason: String },
}

impl FieldPoint {
    pub fn x(&self) -> f64 {
        match self {
            FieldPoint::Valid(s) => s.x,
            FieldPoint::Excluded { x, .. } | FieldPoint::Failed { x, .. } => *x,
        }
    }

    pub fn sample(&self) -> Option<&ZDSample> {
        match self {
            FieldPoint::Valid(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZDField {
    pub t: f64,
    pub route: Route,
    pub xs: Vec<f64>,
    pub points: Vec<FieldPoint>,
    pub critical_values: Vec<f64>,
}

impl ZDField {
    pub fn valid(&self) -> impl Iterator<Item = &ZDSample> {
        self.points.iter().filter_map(FieldPoint::sample)
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| matches!(p, FieldPoint::Failed { .. })).count()
    }

    /// Trapezoid-free grid norm `(Σ |v_j|² Δx)^{1/2}` over valid samples,
    /// with `Δx` the local grid spacing.
    pub fn grid_l2_norm(&self) -> f64 {
        let n = self.xs.len();
        let mut acc = 0.0;
        for (j, p) in self.points.iter().enumerate() {
            if let FieldPoint::Valid(s) = p {
                let lo = if j > 0 { self.xs[j - 1] } else { self.xs[j] };
                let hi = if j + 1 < n { self.xs[j + 1] } else { self.xs[j] };
                let dx = if n > 1 { 0.5 * (hi - lo) } else { 0.0 };
                acc += s.modulus * s.modulus * dx;
            }
        }
        acc.sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZdConfig {
    pub quad: QuadConfig,
    /// Half-width of the interpolation used across removable points of the
    /// phase integrand.
    pub cancel_eps: f64,
    /// Distance to a critical value below which a grid point is excluded.
    pub crit_eps: f64,
    /// Negative log arguments above `−neg_log_tol` are clamped, not rejected.
    pub neg_log_tol: f64,
    pub n_scan: usize,
    pub operator_modes: usize,
    pub operator_xi_max: f64,
    pub operator_delta: f64,
}

impl Default for ZdConfig {
    fn default() -> Self {
        Self {
            quad: QuadConfig { abs_tol: 1e-11, rel_tol: 1e-11, max_subdivisions: 4000 },
            cancel_eps: 1e-5,
            crit_eps: 1e-4,
            neg_log_tol: 1e-10,
            n_scan: DEFAULT_SCAN_PANELS,
            operator_modes: 4096,
            operator_xi_max: 40.0,
            operator_delta: 0.1,
        }
    }
}

fn require_regular(bs: &BranchSet) -> Result<(), ZdError> {
    if bs.degenerate {
        Err(ZdError::DegenerateBranchSet(bs.x))
    } else {
        Ok(())
    }
}

/// `P(x) / [∏(x − y_{2j−1}) ∏(x − w̄)]` over odd real roots and conjugated upper roots.
pub fn zd_rational(u: &RationalHardyFunction, bs: &BranchSet) -> Result<ZDSample, ZdError> {
    require_regular(bs)?;
    let x = C64::new(bs.x, 0.0);
    let denom: C64 = bs.odd_points().iter().map(|y| x - y).product();
    if denom == C64::new(0.0, 0.0) {
        return Err(ZdError::DegenerateBranchSet(bs.x));
    }
    let value = u.numerator().eval(x) / denom;
    Ok(ZDSample::new(bs.t, bs.x, value, bs.ell, Route::Rational))
}

fn at_time_zero(u: &RationalHardyFunction, bs: &BranchSet, route: Route) -> ZDSample {
    ZDSample::new(bs.t, bs.x, u.eval_real(bs.x), 0, route)
}

fn determinant(m: DenseMatrix) -> Result<C64, LinalgError> {
    Ok(m.lu()?.determinant())
}

/// Ratio of `(N+1)×(N+1)` determinants built on the even-indexed roots.
///
/// With `C_kj = 1/(y_{2k} + p_j)` the value is `det[u₀, u₀C] / det[1, u₀C]`,
/// the row-scaled form of `det[1, C] / det[1/u₀, C]`, which stays finite when
/// `u₀` vanishes at a root.
pub fn zd_determinant(u: &RationalHardyFunction, bs: &BranchSet) -> Result<ZDSample, ZdError> {
    require_regular(bs)?;
    if bs.t == 0.0 {
        return Ok(at_time_zero(u, bs, Route::Determinant));
    }
    let even = bs.even_points();
    let n = even.len();
    let p = u.pole_params();
    let u0: Vec<C64> = even.iter().map(|&y| u.numerator().eval(y) / u.denominator().eval(y)).collect();
    let cauchy = |k: usize, j: usize| u0[k] / (even[k] + p[j - 1]);
    let num = DenseMatrix::from_fn(n, |k, j| if j == 0 { u0[k] } else { cauchy(k, j) });
    let den = DenseMatrix::from_fn(n, |k, j| if j == 0 { C64::new(1.0, 0.0) } else { cauchy(k, j) });
    let d = determinant(den).map_err(|_| ZdError::SingularDenominatorDeterminant)?;
    if d == C64::new(0.0, 0.0) || !d.is_finite() {
        return Err(ZdError::SingularDenominatorDeterminant);
    }
    let nu = match determinant(num) {
        Ok(v) => v,
        Err(_) => C64::new(0.0, 0.0),
    };
    Ok(ZDSample::new(bs.t, bs.x, nu / d, bs.ell, Route::Determinant))
}

/// Solves for `(ZD, f(−p₀), …, f(−p_{N−1}))` from
/// `u₀(y_{2k}) = ZD ± 2t u₀(y_{2k}) Σ_j c̄_j f_j / (y_{2k} + p_j)`.
pub fn finite_rank_zd(
    u: &RationalHardyFunction,
    sign: SignMode,
    bs: &BranchSet,
) -> Result<ZDSample, ZdError> {
    require_regular(bs)?;
    if bs.t == 0.0 {
        return Ok(at_time_zero(u, bs, Route::FiniteRank));
    }
    let even = bs.even_points();
    let n = even.len();
    let p = u.pole_params();
    let c = u.residues();
    let k2t = sign.pm() * 2.0 * bs.t;
    let u0: Vec<C64> = even.iter().map(|&y| u.numerator().eval(y) / u.denominator().eval(y)).collect();
    let a = DenseMatrix::from_fn(n, |k, j| {
        if j == 0 {
            C64::new(1.0, 0.0)
        } else {
            u0[k] * c[j - 1].conj() * k2t / (even[k] + p[j - 1])
        }
    });
    let lu = a.lu().map_err(|_| ZdError::SingularSystem)?;
    let sol = lu.solve(&u0);
    if !sol[0].is_finite() {
        return Err(ZdError::SingularSystem);
    }
    Ok(ZDSample::new(bs.t, bs.x, sol[0], bs.ell, Route::FiniteRank))
}

/// Data needed by the branch formula: `v₀ = |u₀|²`, its derivative and `arg u₀`.
pub trait BranchData {
    fn v0(&self, y: f64) -> f64;
    fn dv0(&self, y: f64) -> f64;
    fn arg_u0(&self, x: f64) -> f64;
}

/// Adapter for rational data.
pub struct RationalData<'a> {
    u: &'a RationalHardyFunction,
    v: RationalFunction,
    dv: RationalFunction,
}

impl<'a> RationalData<'a> {
    pub fn new(u: &'a RationalHardyFunction) -> Self {
        let v = u.modulus_squared_extension();
        let dv = v.derivative();
        Self { u, v, dv }
    }
}

impl BranchData for RationalData<'_> {
    fn v0(&self, y: f64) -> f64 {
        self.v.eval_real(y)
    }
    fn dv0(&self, y: f64) -> f64 {
        self.dv.eval_real(y)
    }
    fn arg_u0(&self, x: f64) -> f64 {
        self.u.eval_real(x).arg()
    }
}

/// Adapter for data given by closures.
pub struct FnData<V, D, A> {
    pub v0: V,
    pub dv0: D,
    pub arg_u0: A,
}

impl<V, D, A> BranchData for FnData<V, D, A>
where
    V: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
    A: Fn(f64) -> f64,
{
    fn v0(&self, y: f64) -> f64 {
        (self.v0)(y)
    }
    fn dv0(&self, y: f64) -> f64 {
        (self.dv0)(y)
    }
    fn arg_u0(&self, x: f64) -> f64 {
        (self.arg_u0)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseResult {
    pub phi: f64,
    pub quad_error: f64,
    /// Number of log arguments clamped from `(−tol, 0]`.
    pub clamped: usize,
}

/// `g(y) = (γ_t(y) − x)/∏(y − y_k)` as `(sign, log|g|)`.
fn log_g<D: BranchData + ?Sized>(data: &D, k: f64, x: f64, roots: &[f64], y: f64) -> (f64, f64) {
    let num = y - k * data.v0(y) - x;
    let mut sign = num.signum();
    let mut lg = num.abs().ln();
    for &r in roots {
        let d = y - r;
        sign *= d.signum();
        lg -= d.abs().ln();
    }
    (sign, lg)
}

/// The phase `φ(t, x) = arg u₀(x) + (1/2π) ∫₀^∞ log[g(x+s)/g(x−s)] ds/s`.
pub fn phase_integral<D: BranchData + ?Sized>(
    data: &D,
    bs: &BranchSet,
    sign: SignMode,
    cfg: &ZdConfig,
) -> Result<PhaseResult, ZdError> {
    let x = bs.x;
    let base = data.arg_u0(x);
    if bs.t == 0.0 {
        return Ok(PhaseResult { phi: base, quad_error: 0.0, clamped: 0 });
    }
    require_regular(bs)?;
    let k = sign.pm() * 2.0 * bs.t;
    let roots = &bs.real_roots;
    let eta = cfg.cancel_eps;

    // log g with removable 0/0 points bridged by linear interpolation.
    let lg = |y: f64| -> (f64, f64) {
        let near = roots
            .iter()
            .copied()
            .min_by(|a, b| (y - a).abs().total_cmp(&(y - b).abs()));
        match near {
            Some(r) if (y - r).abs() < eta * (1.0 + r.abs()) => {
                let w = eta * (1.0 + r.abs());
                let (s1, l1) = log_g(data, k, x, roots, r - w);
                let (s2, l2) = log_g(data, k, x, roots, r + w);
                let lam = (y - (r - w)) / (2.0 * w);
                (s1 * s2, l1 + lam * (l2 - l1))
            }
            _ => log_g(data, k, x, roots, y),
        }
    };

    let clamped = std::cell::Cell::new(0usize);
    let failure: std::cell::Cell<Option<(f64, f64)>> = std::cell::Cell::new(None);
    let s_min = 1e-7 * (1.0 + x.abs());
    let integrand = |s: f64| -> f64 {
        let s = s.max(s_min);
        let (sp, lp) = lg(x + s);
        let (sm, lm) = lg(x - s);
        let mut log_b = lp - lm;
        if sp * sm <= 0.0 {
            let magnitude = if log_b < 700.0 { log_b.exp() } else { f64::INFINITY };
            if magnitude < cfg.neg_log_tol {
                clamped.set(clamped.get() + 1);
                log_b = (1e-300f64).ln();
            } else {
                if failure.get().is_none() {
                    failure.set(Some((s, -magnitude)));
                }
                return 0.0;
            }
        }
        log_b / s
    };

    let mut breaks: Vec<f64> = roots.iter().map(|r| (x - r).abs()).filter(|d| *d > 0.0).collect();
    breaks.push(0.0);
    let far = breaks.iter().copied().fold(1.0, f64::max);
    let s0 = 2.0 * far + 2.0;
    breaks.push(s0);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();

    let near = integrate_with_breaks(|s| C64::new(integrand(s), 0.0), &breaks, &cfg.quad)?;
    // Tail on [s0, ∞) through s = s0/τ; the integrand decays like 1/s².
    let tail = integrate_with_breaks(
        |tau| {
            let s = s0 / tau;
            C64::new(integrand(s) * s0 / (tau * tau), 0.0)
        },
        &[0.0, 0.01, 0.1, 0.5, 1.0],
        &cfg.quad,
    )?;
    if let Some((s, value)) = failure.get() {
        return Err(ZdError::NegativeLogArgument { s, value });
    }
    if clamped.get() > 0 {
        log::warn!("phase integral at x = {x}: clamped {} log arguments", clamped.get());
    }
    Ok(PhaseResult {
        phi: base + (near.value.re + tail.value.re) / (2.0 * PI),
        quad_error: (near.error + tail.error) / (2.0 * PI),
        clamped: clamped.get(),
    })
}

/// `e^{iφ} (∓i sgn t)^ℓ ∏ |u₀(y_k)|^{(−1)^k}`.
pub fn zd_branch<D: BranchData + ?Sized>(
    data: &D,
    bs: &BranchSet,
    sign: SignMode,
    cfg: &ZdConfig,
) -> Result<ZDSample, ZdError> {
    if bs.t == 0.0 {
        let value = C64::from_polar(data.v0(bs.x).max(0.0).sqrt(), data.arg_u0(bs.x));
        return Ok(ZDSample::new(bs.t, bs.x, value, 0, Route::BranchPhase));
    }
    require_regular(bs)?;
    let log_mod: f64 = bs
        .real_roots
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let l = 0.5 * data.v0(y).ln();
            if k % 2 == 0 {
                l
            } else {
                -l
            }
        })
        .sum();
    let phase = phase_integral(data, bs, sign, cfg)?;
    let pref = C64::new(0.0, -sign.pm() * bs.t.signum()).powu(bs.ell as u32);
    let value = C64::from_polar(log_mod.exp(), phase.phi) * pref;
    Ok(ZDSample::new(bs.t, bs.x, value, bs.ell, Route::BranchPhase))
}

/// One point by one of the closed routes.
pub fn zd_point(
    u: &RationalHardyFunction,
    t: f64,
    x: f64,
    sign: SignMode,
    route: Route,
    cfg: &ZdConfig,
) -> Result<ZDSample, ZdError> {
    let bs = branch_set(u, t, x, sign)?;
    match route {
        Route::Rational => zd_rational(u, &bs),
        Route::Determinant => zd_determinant(u, &bs),
        Route::FiniteRank => finite_rank_zd(u, sign, &bs),
        Route::BranchPhase => zd_branch(&RationalData::new(u), &bs, sign, cfg),
        Route::Operator => Err(ZdError::Operator("use zd_field or the operator module".into())),
    }
}

/// Evaluates a route over a grid, excluding points near critical values.
pub fn zd_field(
    u: &RationalHardyFunction,
    t: f64,
    xs: &[f64],
    sign: SignMode,
    route: Route,
    cfg: &ZdConfig,
) -> ZDField {
    let window = default_window(u);
    let crit = critical_values(u, t, sign, window, cfg.n_scan);
    let op = if route == Route::Operator {
        Some(crate::operator::build_halfline(u, cfg.operator_xi_max, cfg.operator_modes))
    } else {
        None
    };
    let points = xs
        .iter()
        .map(|&x| {
            if let Some(&c) = crit.iter().find(|&&c| (x - c).abs() < cfg.crit_eps) {
                return FieldPoint::Excluded { x, critical_value: c };
            }
            let r = match &op {
                Some(Ok(op)) => crate::operator::resolve_zd_operator(op, t, x, sign, cfg.operator_delta)
                    .map_err(|e| ZdError::Operator(e.to_string())),
                Some(Err(e)) => Err(ZdError::Operator(e.to_string())),
                None => zd_point(u, t, x, sign, route, cfg),
            };
            match r {
                Ok(s) => FieldPoint::Valid(s),
                Err(e) => FieldPoint::Failed { x, reason: e.to_string() },
            }
        })
        .collect();
    ZDField { t, route, xs: xs.to_vec(), points, critical_values: crit }
}

/// `max |∂_t v ∓ 2v ∂_x v|` for `v = |ZD|²` by central differences.
pub fn burgers_residual(
    u: &RationalHardyFunction,
    sign: SignMode,
    t: f64,
    xs: &[f64],
    h_t: f64,
    h_x: f64,
) -> Result<f64, ZdError> {
    let ts = shock_time(u, sign, default_window(u), DEFAULT_SCAN_PANELS);
    if t + h_t >= ts {
        return Err(ZdError::StencilCrossesShock(t + h_t, ts));
    }
    let v = |tt: f64, x: f64| -> Result<f64, ZdError> {
        let bs = branch_set(u, tt, x, sign)?;
        Ok(zd_rational(u, &bs)?.value.norm_sqr())
    };
    let mut worst: f64 = 0.0;
    for &x in xs {
        let dt = (v(t + h_t, x)? - v(t - h_t, x)?) / (2.0 * h_t);
        let dx = (v(t, x + h_x)? - v(t, x - h_x)?) / (2.0 * h_x);
        let r = dt - sign.pm() * 2.0 * v(t, x)? * dx;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}
