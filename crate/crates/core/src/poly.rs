//! Dense complex polynomials and an all-roots solver.
//!
//! Roots come from the eigenvalues of a balanced companion matrix and are then
//! polished by Newton iterations on the original coefficients.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("polynomial has degree {0}, need at least 1")]
    DegreeTooLow(usize),
    #[error("companion eigen-solver did not converge for degree {0}")]
    EigenSolverFailure(usize),
}

/// Polynomial with complex coefficients in ascending degree order.
///
/// The leading stored coefficient is nonzero; the zero polynomial has no
/// coefficients at all.
#[derive(Clone, PartialEq, Default)]
pub struct ComplexPolynomial {
    coeffs: Vec<C64>,
}

impl ComplexPolynomial {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    /// Monic polynomial `∏ (y - r)`.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut p = Self::constant(C64::new(1.0, 0.0));
        for &r in roots {
            p = p.mul(&Self::new(vec![-r, C64::new(1.0, 0.0)]));
        }
        p
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_with_derivative(&self, z: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `Σ |a_n| |z|^n`, the natural scale of the rounding error of `eval(z)`.
    pub fn magnitude_at(&self, z: C64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[C64], i: usize| v.get(i).copied().unwrap_or_default();
        Self::new(
            (0..n)
                .map(|i| get(&self.coeffs, i) + get(&other.coeffs, i))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// The polynomial with conjugated coefficients, `P̄(y) = Σ conj(a_n) yⁿ`.
    pub fn conj_coeffs(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(n, &c)| c * n as f64)
                .collect(),
        )
    }

    /// Largest imaginary part among the coefficients.
    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Drops imaginary parts of the coefficients.
    pub fn realified(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| C64::new(c.re, 0.0)).collect())
    }
}

impl fmt::Debug for ComplexPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs.iter()).finish()
    }
}

/// Parlett–Reinsch diagonal balancing of a dense matrix, in place.
fn balance(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

fn newton_polish(p: &ComplexPolynomial, dp: &ComplexPolynomial, root: C64) -> C64 {
    let mut y = root;
    let mut res = p.eval(y).norm();
    for _ in 0..50 {
        let d = dp.eval(y);
        if d.norm() == 0.0 {
            break;
        }
        let next = y - p.eval(y) / d;
        let next_res = p.eval(next).norm();
        if !(next_res < res) {
            break;
        }
        y = next;
        res = next_res;
        if res <= 1e-15 * p.magnitude_at(y) {
            break;
        }
    }
    y
}

/// All roots of `p`, repeated according to multiplicity.
pub fn polynomial_roots(p: &ComplexPolynomial) -> Result<Vec<C64>, RootError> {
    let n = match p.degree() {
        Some(d) if d >= 1 => d,
        Some(d) => return Err(RootError::DegreeTooLow(d)),
        None => return Err(RootError::DegreeTooLow(0)),
    };
    let lead = p.leading();
    if n == 1 {
        return Ok(vec![-p.coeffs()[0] / lead]);
    }
    let mut comp = DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        comp[(i, n - 1)] = -p.coeffs()[i] / lead;
    }
    balance(&mut comp);
    let schur = nalgebra::linalg::Schur::try_new(comp, f64::EPSILON, 10_000)
        .ok_or(RootError::EigenSolverFailure(n))?;
    let eig = schur.eigenvalues().ok_or(RootError::EigenSolverFailure(n))?;
    let dp = p.derivative();
    Ok(eig.iter().map(|&r| newton_polish(p, &dp, r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted_by_re(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn trims_leading_zeros() {
        let p = ComplexPolynomial::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(p.degree(), Some(1));
        assert!(ComplexPolynomial::new(vec![c(0.0, 0.0)]).is_zero());
        assert_eq!(ComplexPolynomial::zero().degree(), None);
    }

    #[test]
    fn cubic_from_factorisation() {
        // (y + 1)(y² + 2y − 1) = y³ + 3y² + y − 1
        let p = ComplexPolynomial::from_real(&[-1.0, 1.0, 3.0, 1.0]);
        let r = sorted_by_re(polynomial_roots(&p).unwrap());
        let s2 = 2f64.sqrt();
        let expect = [-1.0 - s2, -1.0, -1.0 + s2];
        for (a, b) in r.iter().zip(expect) {
            assert!((a.re - b).abs() < 1e-13, "{a} vs {b}");
            assert!(a.im.abs() < 1e-13);
        }
    }

    #[test]
    fn linear_and_quadratic() {
        let r = polynomial_roots(&ComplexPolynomial::from_real(&[-2.0, 1.0])).unwrap();
        assert!((r[0] - c(2.0, 0.0)).norm() < 1e-15);
        let r = sorted_by_re(polynomial_roots(&ComplexPolynomial::from_real(&[1.0, 0.0, 1.0])).unwrap());
        let mut ims: Vec<f64> = r.iter().map(|z| z.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ims[0] + 1.0).abs() < 1e-14 && (ims[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_rejected() {
        assert_eq!(
            polynomial_roots(&ComplexPolynomial::from_real(&[3.0])),
            Err(RootError::DegreeTooLow(0))
        );
    }

    #[test]
    fn residual_small_for_badly_scaled_roots() {
        let roots = [c(1e-3, 0.0), c(-5.0, 2.0), c(-5.0, -2.0), c(40.0, 0.5), c(0.3, 7.0)];
        let p = ComplexPolynomial::from_roots(&roots);
        for r in polynomial_roots(&p).unwrap() {
            assert!(p.eval(r).norm() <= 1e-10 * p.magnitude_at(r));
        }
    }

    #[test]
    fn conj_and_derivative() {
        let p = ComplexPolynomial::new(vec![c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.0)]);
        assert_eq!(p.conj_coeffs().coeffs()[0], c(1.0, -2.0));
        let d = p.derivative();
        assert_eq!(d.coeffs(), &[c(0.0, -1.0), c(6.0, 0.0)]);
        let (v, dv) = p.eval_with_derivative(c(0.5, -0.25));
        assert!((v - p.eval(c(0.5, -0.25))).norm() < 1e-15);
        assert!((dv - d.eval(c(0.5, -0.25))).norm() < 1e-15);
    }
}
