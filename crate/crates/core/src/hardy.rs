//! Rational functions in the Hardy space of the upper half-plane.
//!
//! Data has the form `u₀ = P/Q` with `Q(y) = ∏ (y + p̄_k)` and `Im p_k < 0`, so
//! every pole `−p̄_k` lies in the lower half-plane. The Fourier convention used
//! throughout the crate is `û(ξ) = ∫ u(x) e^{−iξx} dx`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{polynomial_roots, ComplexPolynomial};
use crate::quad::{integrate_with_breaks, QuadConfig, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardyError {
    #[error("pole parameter p_{index} = {value} must have negative imaginary part")]
    PoleInUpperHalfPlane { index: usize, value: C64 },
    #[error("pole parameters p_{first} and p_{second} coincide (gap {gap:e})")]
    RepeatedPole { first: usize, second: usize, gap: f64 },
    #[error("numerator degree {degree} exceeds N − 1 = {max}")]
    DegreeTooHigh { degree: usize, max: i64 },
    #[error("evaluation point {0} is a pole")]
    EvalAtPole(C64),
    #[error("residue formula left an imaginary part of {0:e}")]
    ResidueFormulaInconsistent(f64),
    #[error("integrand tail beyond S = {truncation} is not negligible (estimate {estimate:e})")]
    TailNotNegligible { truncation: f64, estimate: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Choice of sign in the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignMode {
    Focusing,
    Defocusing,
}

impl SignMode {
    /// `+1` for focusing, `−1` for defocusing: the upper sign of every `±`.
    pub fn pm(self) -> f64 {
        match self {
            SignMode::Focusing => 1.0,
            SignMode::Defocusing => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignMode::Focusing => "focusing",
            SignMode::Defocusing => "defocusing",
        }
    }
}

impl std::str::FromStr for SignMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "focusing" | "+" | "plus" => Ok(SignMode::Focusing),
            "defocusing" | "-" | "minus" => Ok(SignMode::Defocusing),
            other => Err(format!("unknown sign mode '{other}'")),
        }
    }
}

impl std::fmt::Display for SignMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A plain quotient of polynomials, used for `v₀ = |u₀|²` and its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    pub numerator: ComplexPolynomial,
    pub denominator: ComplexPolynomial,
}

impl RationalFunction {
    pub fn eval(&self, z: C64) -> C64 {
        self.numerator.eval(z) / self.denominator.eval(z)
    }

    /// Real part of the value at a real point.
    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(C64::new(x, 0.0)).re
    }

    pub fn derivative(&self) -> RationalFunction {
        let n = &self.numerator;
        let d = &self.denominator;
        RationalFunction {
            numerator: n.derivative().mul(d).sub(&n.mul(&d.derivative())),
            denominator: d.mul(d),
        }
    }
}

/// `u₀(y) = P(y) / ∏ (y + p̄_k)` with cached partial-fraction residues.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalHardyFunction {
    numerator: ComplexPolynomial,
    poles: Vec<C64>,
    residues: Vec<C64>,
    denominator: ComplexPolynomial,
}

const POLE_GAP: f64 = 1e-10;
const POLE_EVAL_TOL: f64 = 1e-12;

pub fn make_rational(
    numerator: ComplexPolynomial,
    pole_params: Vec<C64>,
) -> Result<RationalHardyFunction, HardyError> {
    for (index, &value) in pole_params.iter().enumerate() {
        if !(value.im < 0.0) {
            return Err(HardyError::PoleInUpperHalfPlane { index, value });
        }
    }
    for i in 0..pole_params.len() {
        for j in i + 1..pole_params.len() {
            let gap = (pole_params[i] - pole_params[j]).norm();
            if gap < POLE_GAP {
                return Err(HardyError::RepeatedPole { first: i, second: j, gap });
            }
        }
    }
    let n = pole_params.len();
    if let Some(degree) = numerator.degree() {
        if degree + 1 > n {
            return Err(HardyError::DegreeTooHigh { degree, max: n as i64 - 1 });
        }
    }
    let locations: Vec<C64> = pole_params.iter().map(|p| -p.conj()).collect();
    let denominator = ComplexPolynomial::from_roots(&locations);
    let residues = (0..n)
        .map(|k| {
            let y = locations[k];
            let rest: C64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| y - locations[j])
                .product();
            numerator.eval(y) / rest
        })
        .collect();
    Ok(RationalHardyFunction { numerator, poles: pole_params, residues, denominator })
}

impl RationalHardyFunction {
    /// `1/(y + i)`, the standard benchmark datum.
    pub fn figure1() -> Self {
        make_rational(
            ComplexPolynomial::from_real(&[1.0]),
            vec![C64::new(0.0, -1.0)],
        )
        .expect("valid preset")
    }

    pub fn numerator(&self) -> &ComplexPolynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &ComplexPolynomial {
        &self.denominator
    }

    /// The parameters `p_k` (each with `Im p_k < 0`).
    pub fn pole_params(&self) -> &[C64] {
        &self.poles
    }

    /// Pole locations `−p̄_k`.
    pub fn pole_locations(&self) -> Vec<C64> {
        self.poles.iter().map(|p| -p.conj()).collect()
    }

    pub fn residues(&self) -> &[C64] {
        &self.residues
    }

    pub fn n(&self) -> usize {
        self.poles.len()
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn eval(&self, z: C64) -> Result<C64, HardyError> {
        if self.poles.iter().any(|p| (z + p.conj()).norm() <= POLE_EVAL_TOL) {
            return Err(HardyError::EvalAtPole(z));
        }
        Ok(self.numerator.eval(z) / self.denominator.eval(z))
    }

    /// Value on the real line, where no pole can sit.
    pub fn eval_real(&self, x: f64) -> C64 {
        let z = C64::new(x, 0.0);
        self.numerator.eval(z) / self.denominator.eval(z)
    }

    /// `Σ c_k / (z + p̄_k)`, the partial-fraction form.
    pub fn eval_partial_fractions(&self, z: C64) -> C64 {
        self.residues
            .iter()
            .zip(&self.poles)
            .map(|(c, p)| c / (z + p.conj()))
            .sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        make_rational(self.numerator.scale(s), self.poles.clone()).expect("scaling keeps validity")
    }

    /// `v₀ = P P̄ / (Q Q̄)`, equal to `|u₀|²` on the real line.
    pub fn modulus_squared_extension(&self) -> RationalFunction {
        RationalFunction {
            numerator: self.numerator.mul(&self.numerator.conj_coeffs()),
            denominator: self.denominator.mul(&self.denominator.conj_coeffs()),
        }
    }

    /// `‖u₀‖²` by closing the contour in the upper half-plane.
    pub fn l2_norm_sq(&self) -> Result<f64, HardyError> {
        let mut sum = C64::new(0.0, 0.0);
        for (c, p) in self.residues.iter().zip(&self.poles) {
            sum += c.conj() * self.eval(-p)?;
        }
        let total = C64::new(0.0, 2.0 * PI) * sum;
        let scale = total.norm().max(1.0);
        if total.im.abs() > 1e-10 * scale {
            return Err(HardyError::ResidueFormulaInconsistent(total.im));
        }
        Ok(total.re)
    }

    /// `sup |u₀|` on the real line, from the critical points of `v₀`.
    pub fn linf_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let v = self.modulus_squared_extension();
        let dv = v.derivative().numerator;
        let mut best = self.eval_real(0.0).norm();
        if dv.degree().is_some_and(|d| d >= 1) {
            if let Ok(roots) = polynomial_roots(&dv) {
                for r in roots {
                    if r.im.abs() <= 1e-6 * (1.0 + r.re.abs()) {
                        best = best.max(self.eval_real(r.re).norm());
                    }
                }
            }
        }
        best
    }

    /// Closed-form `û(ξ) = −2πi Σ c_k e^{iξp̄_k}` for `ξ ≥ 0`.
    pub fn fourier_hat(&self, xi: f64) -> C64 {
        let s: C64 = self
            .residues
            .iter()
            .zip(&self.poles)
            .map(|(c, p)| c * (C64::new(0.0, xi) * p.conj()).exp())
            .sum();
        C64::new(0.0, -2.0 * PI) * s
    }
}

/// Samples of `û` at nonnegative frequencies.
pub fn fourier_halfline(u: &RationalHardyFunction, xi: &[f64]) -> Vec<C64> {
    xi.iter().map(|&x| u.fourier_hat(x)).collect()
}

/// `Πh(x) = h(x)/2 − (i/2π) ∫₀^S (h(x+s) − h(x−s))/s ds`.
///
/// The tail check assumes `h` decays at least like `1/|y|`; anything slower is
/// rejected once the estimated tail exceeds `tail_tol`.
pub fn szego_project_pv<F: Fn(f64) -> C64>(
    h: F,
    x: f64,
    truncation: f64,
    tail_tol: f64,
    cfg: &QuadConfig,
) -> Result<C64, HardyError> {
    let s_max = truncation;
    let edge = h(x + s_max).norm().max(h(x - s_max).norm());
    let far = h(x + 2.0 * s_max).norm().max(h(x - 2.0 * s_max).norm());
    // For h ~ C/|y|^p the tail is about |h(S)|/p; a ratio above 2^{-0.7}
    // means p < 0.7 and the bound is unreliable.
    let estimate = if far > 0.6 * edge && edge > 0.0 { f64::INFINITY } else { edge / (2.0 * PI) };
    if estimate > tail_tol {
        return Err(HardyError::TailNotNegligible { truncation, estimate });
    }
    const S_MIN: f64 = 1e-7;
    let integrand = |s: f64| {
        let s = s.max(S_MIN);
        (h(x + s) - h(x - s)) / s
    };
    let mut breaks = vec![0.0];
    let mut b = 1.0;
    while b < s_max {
        breaks.push(b);
        b *= 4.0;
    }
    breaks.push(s_max);
    let r = integrate_with_breaks(integrand, &breaks, cfg)?;
    Ok(h(x) * 0.5 - C64::new(0.0, 1.0 / (2.0 * PI)) * r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_real;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn three_pole() -> RationalHardyFunction {
        make_rational(
            ComplexPolynomial::new(vec![c(0.5, 0.2), c(-0.3, 0.1), c(0.2, 0.0)]),
            vec![c(0.7, -1.0), c(-1.2, -0.6), c(0.1, -2.0)],
        )
        .unwrap()
    }

    #[test]
    fn figure1_residue() {
        let u = RationalHardyFunction::figure1();
        assert_eq!(u.residues(), &[c(1.0, 0.0)]);
        assert!((u.eval(c(0.0, 0.0)).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
        assert!((u.eval(c(0.0, 1.0)).unwrap() - c(0.0, -0.5)).norm() < 1e-15);
        assert!(matches!(u.eval(c(0.0, -1.0)), Err(HardyError::EvalAtPole(_))));
    }

    #[test]
    fn constructor_errors() {
        let err = make_rational(ComplexPolynomial::from_real(&[0.0, 1.0]), vec![c(0.0, -1.0)]);
        assert!(matches!(err, Err(HardyError::DegreeTooHigh { degree: 1, max: 0 })));
        let err = make_rational(ComplexPolynomial::from_real(&[1.0]), vec![c(0.0, 1.0)]);
        assert!(matches!(err, Err(HardyError::PoleInUpperHalfPlane { .. })));
        let err = make_rational(
            ComplexPolynomial::from_real(&[1.0]),
            vec![c(0.0, -1.0), c(0.0, -1.0 - 1e-12)],
        );
        assert!(matches!(err, Err(HardyError::RepeatedPole { .. })));
    }

    #[test]
    fn single_partial_fraction_residue() {
        let u = make_rational(ComplexPolynomial::new(vec![c(0.0, 1.0)]), vec![c(0.0, -2.0)]).unwrap();
        assert!((u.residues()[0] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn residues_reconstruct_quotient() {
        let u = three_pole();
        for k in -20..=20 {
            let y = c(0.37 * k as f64, 0.0);
            let a = u.eval(y).unwrap();
            let b = u.eval_partial_fractions(y);
            assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn modulus_extension_matches_real_axis() {
        let u = RationalHardyFunction::figure1();
        let v = u.modulus_squared_extension();
        assert!((v.eval_real(0.0) - 1.0).abs() < 1e-15);
        assert!((v.eval_real(3.0) - 0.1).abs() < 1e-15);
        let w = three_pole();
        let vw = w.modulus_squared_extension();
        for k in -10..=10 {
            let x = 0.6 * k as f64;
            assert!((vw.eval_real(x) - w.eval_real(x).norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_norm_against_quadrature() {
        let u = RationalHardyFunction::figure1();
        assert!((u.l2_norm_sq().unwrap() - PI).abs() < 1e-14);
        let s = u.scaled(c(0.3, 0.4));
        assert!((s.l2_norm_sq().unwrap() - 0.25 * PI).abs() < 1e-14);

        let w = three_pole();
        // ∫ |w|² dx with the substitution x = tan θ.
        let (q, _) = integrate_real(
            |th| {
                let x = th.tan();
                w.eval_real(x).norm_sqr() / th.cos().powi(2)
            },
            &[-PI / 2.0, -1.0, 0.0, 1.0, PI / 2.0],
            &QuadConfig::default(),
        )
        .unwrap();
        assert!((w.l2_norm_sq().unwrap() - q).abs() < 1e-9 * q);
    }

    #[test]
    fn linf_of_figure1_is_one() {
        assert!((RationalHardyFunction::figure1().linf_norm() - 1.0).abs() < 1e-14);
        let w = three_pole();
        let sampled = (-40000..=40000)
            .map(|k| w.eval_real(k as f64 * 1e-3).norm())
            .fold(0.0, f64::max);
        assert!(w.linf_norm() >= sampled - 1e-12);
        assert!(w.linf_norm() <= sampled + 1e-6);
    }

    #[test]
    fn fourier_closed_form_against_numeric_integral() {
        let u = RationalHardyFunction::figure1();
        for xi in [0.5f64, 1.0, 2.0] {
            // Truncate at a quarter period past a whole number of periods, where
            // the leading boundary terms of the two 1/x tails cancel.
            let r = (2.0 * PI * (300.0 * xi).round() + PI / 2.0) / xi;
            let f = |x: f64| (C64::new(0.0, -xi * x)).exp() / c(x, 1.0);
            let panels = (2.0 * r * xi / PI).ceil() as usize;
            let brk: Vec<f64> = (0..=panels).map(|k| -r + 2.0 * r * k as f64 / panels as f64).collect();
            let cfg = QuadConfig { abs_tol: 1e-10, rel_tol: 1e-10, max_subdivisions: 20_000 };
            let numeric = integrate_with_breaks(f, &brk, &cfg).unwrap().value;
            let exact = u.fourier_hat(xi);
            assert!((numeric - exact).norm() < 1e-4, "ξ={xi}: {numeric} vs {exact}");
            assert!((exact - c(0.0, -2.0 * PI * (-xi).exp())).norm() < 1e-14);
        }
        assert!((u.fourier_hat(0.0) - c(0.0, -2.0 * PI)).norm() < 1e-15);
    }

    #[test]
    fn plancherel_on_halfline() {
        let u = three_pole();
        let (q, _) = integrate_real(
            |t| {
                // ξ = t/(1−t) maps [0,1) onto [0,∞)
                let xi = t / (1.0 - t);
                u.fourier_hat(xi).norm_sqr() / (1.0 - t).powi(2)
            },
            &[0.0, 0.5, 0.9, 1.0 - 1e-12],
            &QuadConfig::default(),
        )
        .unwrap();
        assert!((q / (2.0 * PI) - u.l2_norm_sq().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn projector_of_lorentzian() {
        let h = |y: f64| c(1.0 / (1.0 + y * y), 0.0);
        let cfg = QuadConfig::default();
        for x in [0.0, 0.7, -2.0] {
            let p = szego_project_pv(h, x, 1e6, 1e-6, &cfg).unwrap();
            let exact = c(1.0, x) / (2.0 * (1.0 + x * x));
            assert!((p - exact).norm() < 1e-6, "x={x}: {p} vs {exact}");
            assert!((p.re - 0.5 * h(x).re).abs() < 1e-12);
        }
    }

    #[test]
    fn projector_fixes_hardy_functions() {
        let h = |y: f64| c(1.0, 0.0) / c(y, 1.0);
        for x in [-1.0, 0.0, 2.5] {
            let p = szego_project_pv(h, x, 1e8, 1e-6, &QuadConfig::default()).unwrap();
            assert!((p - h(x)).norm() < 1e-6);
        }
    }

    #[test]
    fn projector_rejects_slow_tails() {
        let h = |y: f64| c(1.0 / (1.0 + y.abs()).sqrt(), 0.0);
        let err = szego_project_pv(h, 0.0, 100.0, 1e-6, &QuadConfig::default()).unwrap_err();
        assert!(matches!(err, HardyError::TailNotNegligible { .. }));
    }
}
