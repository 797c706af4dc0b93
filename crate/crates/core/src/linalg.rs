//! Small dense complex LU and a restarted GMRES for matrix-free operators.

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("GMRES stalled: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
}

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn lu(&self) -> Result<Lu, LinalgError> {
        Lu::factor(self.clone())
    }
}

/// LU factorisation with scaled partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    m: DenseMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    fn factor(mut m: DenseMatrix) -> Result<Self, LinalgError> {
        let n = m.n;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j).norm()).fold(0.0, f64::max))
            .collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| {
                    let s = scale[perm[i]];
                    (i, if s > 0.0 { m.get(i, k).norm() / s } else { 0.0 })
                })
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= 0.0 || !best.is_finite() {
                return Err(LinalgError::Singular { column: k, pivot: best.max(0.0) });
            }
            if p != k {
                for j in 0..n {
                    m.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = m.get(k, k);
            for i in k + 1..n {
                let l = m.get(i, k) / pivot;
                m.set(i, k, l);
                if l != C64::new(0.0, 0.0) {
                    for j in k + 1..n {
                        let v = m.get(k, j);
                        m.add_at(i, j, -l * v);
                    }
                }
            }
        }
        Ok(Self { m, perm, swaps })
    }

    pub fn determinant(&self) -> C64 {
        let d: C64 = (0..self.m.n).map(|i| self.m.get(i, i)).product();
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.m.n;
        let mut y: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.m.get(i, j);
                y[i] = y[i] - l * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.m.get(i, j);
                y[i] = y[i] - u * y[j];
            }
            y[i] /= self.m.get(i, i);
        }
        y
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iterations: usize,
    pub rel_tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { restart: 200, max_iterations: 4000, rel_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Restarted GMRES for `A x = b` with `apply(x, out)` computing `out = A x`.
pub fn gmres<F: FnMut(&[C64], &mut [C64])>(
    mut apply: F,
    b: &[C64],
    cfg: &GmresConfig,
) -> Result<(Vec<C64>, GmresStats), LinalgError> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![C64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        return Ok((x, GmresStats { iterations: 0, residual: 0.0 }));
    }
    let m = cfg.restart.max(1);
    let mut total = 0;
    let mut ax = vec![C64::new(0.0, 0.0); n];
    let mut rel = 1.0;
    while total < cfg.max_iterations {
        apply(&x, &mut ax);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= cfg.rel_tol {
            return Ok((x, GmresStats { iterations: total, residual: rel }));
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![C64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![C64::new(0.0, 0.0); m];
        let mut sn = vec![C64::new(0.0, 0.0); m];
        let mut g = vec![C64::new(0.0, 0.0); m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = vec![C64::new(0.0, 0.0); n];
            apply(&basis[k], &mut w);
            total += 1;
            for (j, v) in basis.iter().enumerate() {
                let h = dot(v, &w);
                hess[j][k] = h;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= h * vi;
                }
            }
            let hn = norm(&w);
            hess[k + 1][k] = C64::new(hn, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * hess[j][k] + sn[j].conj() * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let a = hess[k][k];
            let bb = hess[k + 1][k];
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = a / denom;
            sn[k] = bb / denom;
            hess[k][k] = cs[k].conj() * a + sn[k].conj() * bb;
            hess[k + 1][k] = C64::new(0.0, 0.0);
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            rel = g[k + 1].norm() / bnorm;
            if rel <= cfg.rel_tol || hn == 0.0 || total >= cfg.max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![C64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
        if k_used == 0 {
            break;
        }
    }
    apply(&x, &mut ax);
    let res = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
    if res <= cfg.rel_tol * 10.0 {
        Ok((x, GmresStats { iterations: total, residual: res }))
    } else {
        Err(LinalgError::NotConverged { residual: res.max(rel), iterations: total })
    }
}
