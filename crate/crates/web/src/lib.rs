//! Browser bindings for the demo page in `www/`.
//!
//! Initial data is `a/(y + i)` with an amplitude slider. Curves come back as
//! flat `Float64Array`s so the page can draw them without further parsing.

use cmzd_core::branches::{branch_set, critical_values, default_window, shock_time as shock, DEFAULT_SCAN_PANELS};
use cmzd_core::hardy::{RationalHardyFunction, SignMode};
use cmzd_core::zdl::{zd_point, Route, ZdConfig};
use num_complex::Complex64 as C64;
use wasm_bindgen::prelude::*;

const CRIT_SCAN: usize = 4000;

fn data(amp: f64) -> RationalHardyFunction {
    RationalHardyFunction::figure1().scaled(C64::new(amp, 0.0))
}

fn sign(focusing: bool) -> SignMode {
    if focusing {
        SignMode::Focusing
    } else {
        SignMode::Defocusing
    }
}

/// `‖u₀‖²`, so the page can flag focusing data above `2π`.
#[wasm_bindgen]
pub fn mass(amp: f64) -> f64 {
    data(amp).l2_norm_sq().unwrap_or(f64::NAN)
}

/// `[x, Re ZD, Im ZD, |ZD|, ℓ]` per grid point; NaN rows near critical values.
#[wasm_bindgen]
pub fn zd_curve(amp: f64, focusing: bool, t: f64, x_min: f64, x_max: f64, n: usize) -> Vec<f64> {
    let u = data(amp);
    let s = sign(focusing);
    let cfg = ZdConfig::default();
    let crit = critical_values(&u, t, s, default_window(&u), CRIT_SCAN);
    let n = n.max(2);
    let mut out = Vec::with_capacity(5 * n);
    for i in 0..n {
        let x = x_min + (x_max - x_min) * i as f64 / (n - 1) as f64;
        let near = crit.iter().any(|&c| (x - c).abs() < cfg.crit_eps);
        match zd_point(&u, t, x, s, Route::Rational, &cfg) {
            Ok(p) if !near => out.extend([x, p.value.re, p.value.im, p.modulus, p.ell as f64]),
            _ => out.extend([x, f64::NAN, f64::NAN, f64::NAN, f64::NAN]),
        }
    }
    out
}

/// `[y, γ_t(y)]` pairs, `γ_t(y) = y ∓ 2t|u₀(y)|²`.
#[wasm_bindgen]
pub fn gamma_curve(amp: f64, focusing: bool, t: f64, y_min: f64, y_max: f64, n: usize) -> Vec<f64> {
    let u = data(amp);
    let k = sign(focusing).pm() * 2.0 * t;
    let n = n.max(2);
    (0..n)
        .flat_map(|i| {
            let y = y_min + (y_max - y_min) * i as f64 / (n - 1) as f64;
            [y, y - k * u.eval_real(y).norm_sqr()]
        })
        .collect()
}

/// Real roots of `γ_t(y) = x`, sorted; empty if the root solve fails.
#[wasm_bindgen]
pub fn branch_roots(amp: f64, focusing: bool, t: f64, x: f64) -> Vec<f64> {
    branch_set(&data(amp), t, x, sign(focusing)).map(|b| b.real_roots).unwrap_or_default()
}

#[wasm_bindgen]
pub fn critical_points(amp: f64, focusing: bool, t: f64) -> Vec<f64> {
    let u = data(amp);
    critical_values(&u, t, sign(focusing), default_window(&u), CRIT_SCAN)
}

/// First time at which branches cross; `Infinity` if they never do.
#[wasm_bindgen]
pub fn shock_time(amp: f64, focusing: bool) -> f64 {
    let u = data(amp);
    shock(&u, sign(focusing), default_window(&u), DEFAULT_SCAN_PANELS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_layout_and_benchmark() {
        let c = zd_curve(1.0, true, 2.0, -3.0, 1.0, 3);
        assert_eq!(c.len(), 15);
        assert!((c[1] + 0.5).abs() < 1e-12 && c[2].abs() < 1e-12);
        assert_eq!(c[4], 1.0);
        assert_eq!(c[14], 0.0);
    }

    #[test]
    fn roots_and_shock() {
        let r = branch_roots(1.0, true, 2.0, -3.0);
        assert_eq!(r.len(), 3);
        assert!((r[1] + 1.0).abs() < 1e-10);
        assert!((shock_time(1.0, true) - 4.0 / (3.0 * 3f64.sqrt())).abs() < 1e-6);
        assert!(shock_time(1.0, false).is_finite());
        assert!(critical_points(1.0, true, 0.5).is_empty());
        assert_eq!(critical_points(1.0, true, 2.0).len(), 2);
    }

    #[test]
    fn gamma_matches_roots() {
        let g = gamma_curve(1.0, true, 2.0, -1.0, 1.0, 3);
        // γ₂(−1) = −1 − 4/2
        assert!((g[1] + 3.0).abs() < 1e-12);
        assert!((mass(2.0) - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    }
}
