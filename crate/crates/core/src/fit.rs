//! Barycentric rational interpolation by the AAA algorithm.
//!
//! Support points are chosen greedily at the sample of largest residual; the
//! weights are the smallest right singular vector of the Loewner matrix over
//! the remaining samples.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need matching, non-empty sample arrays (got {points} points, {values} values)")]
    BadSamples { points: usize, values: usize },
    #[error("sample {0} is not finite")]
    NonFinite(usize),
    #[error("SVD failed to converge")]
    Svd,
}

#[derive(Debug, Clone)]
pub struct AaaFit {
    pub support: Vec<f64>,
    pub values: Vec<C64>,
    pub weights: Vec<C64>,
    /// Largest absolute residual over the fitted samples.
    pub max_error: f64,
}

impl AaaFit {
    /// Type `(m−1, m−1)` with `m` support points.
    pub fn degree(&self) -> usize {
        self.support.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> C64 {
        let mut num = C64::new(0.0, 0.0);
        let mut den = C64::new(0.0, 0.0);
        for ((&z, &f), &w) in self.support.iter().zip(&self.values).zip(&self.weights) {
            if x == z {
                return f;
            }
            let c = w / (x - z);
            num += c * f;
            den += c;
        }
        num / den
    }
}

/// Fits `values` at `points` until the residual is at most `tol` or
/// `max_support` support points are in use.
pub fn aaa(points: &[f64], values: &[C64], tol: f64, max_support: usize) -> Result<AaaFit, FitError> {
    let n = points.len();
    if n == 0 || values.len() != n {
        return Err(FitError::BadSamples { points: n, values: values.len() });
    }
    if let Some(i) = (0..n).find(|&i| !points[i].is_finite() || !values[i].re.is_finite() || !values[i].im.is_finite()) {
        return Err(FitError::NonFinite(i));
    }
    let mean = values.iter().sum::<C64>() / n as f64;
    let mut approx = vec![mean; n];
    let mut is_support = vec![false; n];
    let mut support: Vec<usize> = Vec::new();
    let mut weights: Vec<C64> = Vec::new();
    let max_support = max_support.min(n);

    loop {
        let (pick, err) = (0..n)
            .filter(|&i| !is_support[i])
            .map(|i| (i, (values[i] - approx[i]).norm()))
            .fold((usize::MAX, -1.0), |acc, e| if e.1 > acc.1 { e } else { acc });
        if pick == usize::MAX || err <= tol || support.len() >= max_support {
            let max_error = if pick == usize::MAX { 0.0 } else { err.max(0.0) };
            return Ok(finish(points, values, &support, weights, max_error));
        }
        is_support[pick] = true;
        support.push(pick);

        let rest: Vec<usize> = (0..n).filter(|&i| !is_support[i]).collect();
        let m = support.len();
        if rest.is_empty() {
            weights = vec![C64::new(1.0, 0.0); m];
            return Ok(finish(points, values, &support, weights, 0.0));
        }
        let cauchy = DMatrix::from_fn(rest.len(), m, |r, c| {
            C64::new(1.0 / (points[rest[r]] - points[support[c]]), 0.0)
        });
        let loewner = DMatrix::from_fn(rest.len(), m, |r, c| {
            cauchy[(r, c)] * (values[rest[r]] - values[support[c]])
        });
        weights = smallest_right_singular_vector(loewner)?;
        for &i in &rest {
            let mut num = C64::new(0.0, 0.0);
            let mut den = C64::new(0.0, 0.0);
            for (c, &s) in support.iter().enumerate() {
                let k = weights[c] / (points[i] - points[s]);
                num += k * values[s];
                den += k;
            }
            approx[i] = num / den;
        }
        for &s in &support {
            approx[s] = values[s];
        }
    }
}

fn smallest_right_singular_vector(a: DMatrix<C64>) -> Result<Vec<C64>, FitError> {
    let cols = a.ncols();
    // Pad to at least square so V is complete.
    let a = if a.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (a.nrows(), cols)).copy_from(&a);
        p
    } else {
        a
    };
    let svd = a.try_svd(false, true, 1e-15, 10_000).ok_or(FitError::Svd)?;
    let vt = svd.v_t.ok_or(FitError::Svd)?;
    let k = (0..svd.singular_values.len())
        .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
        .ok_or(FitError::Svd)?;
    Ok((0..cols).map(|c| vt[(k, c)].conj()).collect())
}

fn finish(points: &[f64], values: &[C64], support: &[usize], weights: Vec<C64>, max_error: f64) -> AaaFit {
    let weights = if weights.len() == support.len() { weights } else { vec![C64::new(1.0, 0.0); support.len()] };
    AaaFit {
        support: support.iter().map(|&i| points[i]).collect(),
        values: support.iter().map(|&i| values[i]).collect(),
        weights,
        max_error,
    }
}
