//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::time::Instant;

use cmzd_core::branches::{branch_set, critical_values, default_window, shock_time, DEFAULT_SCAN_PANELS};
use cmzd_core::fit::aaa;
use cmzd_core::hardy::{make_rational, RationalHardyFunction, SignMode};
use cmzd_core::operator::{build_halfline, resolve_ueps_real, resolve_zd_operator};
use cmzd_core::poly::ComplexPolynomial;
use cmzd_core::sim::{epsilon_sweep, evolve, init_sim, GaussianTest, SweepConfig};
use cmzd_core::zdl::{
    burgers_residual, finite_rank_zd, zd_branch, zd_determinant, zd_field, zd_point, zd_rational,
    RationalData, Route, ZdConfig,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIGNS: [SignMode; 2] = [SignMode::Focusing, SignMode::Defocusing];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// The three data sets with one, two and three poles, all of mass below 2π.
fn test_data() -> Vec<RationalHardyFunction> {
    vec![
        RationalHardyFunction::figure1(),
        make_rational(
            ComplexPolynomial::new(vec![c(0.6, 0.0), c(0.4, -0.2)]),
            vec![c(0.5, -1.0), c(-1.0, -0.7)],
        )
        .unwrap(),
        make_rational(
            ComplexPolynomial::new(vec![c(0.5, 0.2), c(-0.3, 0.1), c(0.2, 0.0)]),
            vec![c(0.7, -1.0), c(-1.2, -0.6), c(0.1, -2.0)],
        )
        .unwrap(),
    ]
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let u = RationalHardyFunction::figure1();
    let sign = SignMode::Focusing;
    let cfg = ZdConfig::default();
    let target = c(-0.5, 0.0);
    let bs = branch_set(&u, 2.0, -3.0, sign).unwrap();

    let reps = 200;
    let start = Instant::now();
    let mut rat = C64::default();
    let mut det = C64::default();
    let mut fr = C64::default();
    for _ in 0..reps {
        let bs = branch_set(&u, 2.0, -3.0, sign).unwrap();
        rat = zd_rational(&u, &bs).unwrap().value;
        det = zd_determinant(&u, &bs).unwrap().value;
        fr = finite_rank_zd(&u, sign, &bs).unwrap().value;
    }
    let closed_ms = start.elapsed().as_secs_f64() * 1e3 / (3 * reps) as f64;
    let br = zd_branch(&RationalData::new(&u), &bs, sign, &cfg).unwrap().value;

    let start = Instant::now();
    let op = build_halfline(&u, 40.0, 4096).unwrap();
    let opv = resolve_zd_operator(&op, 2.0, -3.0, sign, 0.1).unwrap().value;
    let op_s = start.elapsed().as_secs_f64();

    let e = [
        (rat - target).norm(),
        (fr - target).norm(),
        (det - target).norm(),
        (br - target).norm(),
        (opv - target).norm() / 0.5,
    ];
    let pass = e[0] <= 1e-9
        && e[1] <= 1e-9
        && e[2] <= 1e-8
        && e[3] <= 1e-6
        && e[4] <= 1e-2
        && closed_ms < 1.0
        && op_s < 30.0;
    outcome(
        pass,
        format!(
            "ZD(2,-3) errors rational {:.1e}, finite_rank {:.1e}, determinant {:.1e}, branch {:.1e}, operator rel {:.1e}; closed form {:.3} ms/point, operator {:.1} s",
            e[0], e[1], e[2], e[3], e[4], closed_ms, op_s
        ),
    )
}

fn criterion_2() -> Outcome {
    let u = RationalHardyFunction::figure1();
    let sign = SignMode::Focusing;
    let bs = branch_set(&u, 2.0, -3.0, sign).unwrap();
    let s2 = 2f64.sqrt();
    let want = [-1.0 - s2, -1.0, -1.0 + s2];
    let e3 = if bs.real_roots.len() == 3 {
        bs.real_roots.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let bs1 = branch_set(&u, 2.0, 1.0, sign).unwrap();
    let e1 = if bs1.real_roots.len() == 1 && bs1.upper_roots.len() == 1 {
        let w = bs1.upper_roots[0];
        ((bs1.real_roots[0] - 1.8816).abs())
            .max((w.re + 0.4408).abs())
            .max((w.im.abs() - 1.5700).abs())
    } else {
        f64::INFINITY
    };

    let mut rng = ChaCha8Rng::seed_from_u64(20261019);
    let window = default_window(&u);
    let mut checked = 0usize;
    let mut odd = 0usize;
    let mut skipped = 0usize;
    while checked < 10_000 {
        let t = rng.gen_range(0.0..3.0);
        let x = rng.gen_range(-10.0..10.0);
        let sign = if rng.gen_bool(0.5) { SignMode::Focusing } else { SignMode::Defocusing };
        let crit = critical_values(&u, t, sign, window, 2000);
        if crit.iter().any(|&v| (x - v).abs() < 1e-4) {
            skipped += 1;
            continue;
        }
        checked += 1;
        if let Ok(b) = branch_set(&u, t, x, sign) {
            if b.real_roots.len() % 2 == 1 {
                odd += 1;
            }
        }
    }
    let pass = e3 <= 1e-10 && e1 <= 1e-3 && odd == checked;
    outcome(
        pass,
        format!(
            "(2,-3) roots err {e3:.1e}; (2,1) roots err {e1:.1e}; odd root count {odd}/{checked} random points ({skipped} near critical values skipped)"
        ),
    )
}

fn criterion_3() -> Outcome {
    let xs = linspace(-10.0, 10.0, 201);
    let cfg = ZdConfig::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for u in test_data() {
        for sign in SIGNS {
            for route in [Route::Rational, Route::Determinant, Route::FiniteRank, Route::BranchPhase] {
                for &x in &xs {
                    match zd_point(&u, 0.0, x, sign, route, &cfg) {
                        Ok(s) => worst = worst.max((s.value - u.eval_real(x)).norm()),
                        Err(_) => failures += 1,
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-10 && failures == 0,
        format!("max |ZD(0,x) - u0(x)| = {worst:.1e} over 3 data x 2 signs x 4 routes x 201 points, {failures} failures"),
    )
}

struct FieldStats {
    branch: f64,
    determinant: f64,
    max_modulus_excess: f64,
    l2_excess: f64,
    valid: usize,
    failures: usize,
    seconds: f64,
}

fn field_stats() -> FieldStats {
    let xs = linspace(-10.0, 10.0, 201);
    let cfg = ZdConfig::default();
    let start = Instant::now();
    let mut s = FieldStats {
        branch: 0.0,
        determinant: 0.0,
        max_modulus_excess: f64::NEG_INFINITY,
        l2_excess: f64::NEG_INFINITY,
        valid: 0,
        failures: 0,
        seconds: 0.0,
    };
    for u in test_data() {
        let linf = u.linf_norm();
        let l2 = u.l2_norm_sq().unwrap().sqrt();
        for sign in SIGNS {
            let rat = zd_field(&u, 2.0, &xs, sign, Route::Rational, &cfg);
            let det = zd_field(&u, 2.0, &xs, sign, Route::Determinant, &cfg);
            let br = zd_field(&u, 2.0, &xs, sign, Route::BranchPhase, &cfg);
            s.failures += rat.failures() + det.failures() + br.failures();
            for ((a, b), d) in rat.points.iter().zip(&br.points).zip(&det.points) {
                if let (Some(a), Some(b), Some(d)) = (a.sample(), b.sample(), d.sample()) {
                    s.valid += 1;
                    s.branch = s.branch.max((a.value - b.value).norm());
                    s.determinant = s.determinant.max((a.value - d.value).norm());
                }
            }
            for f in [&rat, &det, &br] {
                for p in f.valid() {
                    s.max_modulus_excess = s.max_modulus_excess.max(p.modulus - linf);
                }
                s.l2_excess = s.l2_excess.max(f.grid_l2_norm() - l2);
            }
        }
    }
    s.seconds = start.elapsed().as_secs_f64();
    s
}

fn criterion_4(s: &FieldStats) -> Outcome {
    outcome(
        s.branch <= 1e-6 && s.determinant <= 1e-8 && s.failures == 0 && s.seconds <= 60.0,
        format!(
            "t=2 fields: max |rational - branch| {:.1e}, max |rational - determinant| {:.1e} over {} valid points, {} failures, {:.1} s",
            s.branch, s.determinant, s.valid, s.failures, s.seconds
        ),
    )
}

fn criterion_5(s: &FieldStats) -> Outcome {
    outcome(
        s.max_modulus_excess <= 1e-9,
        format!("max (|ZD| - ||u0||_inf) = {:.2e}", s.max_modulus_excess),
    )
}

fn criterion_6(s: &FieldStats) -> Outcome {
    outcome(s.l2_excess <= 1e-3, format!("max (grid L2 norm - ||u0||_2) = {:.3e}", s.l2_excess))
}

fn criterion_7() -> Outcome {
    let fs = vec![
        RationalHardyFunction::figure1(),
        make_rational(ComplexPolynomial::from_real(&[1.0]), vec![c(1.0, -0.5)]).unwrap(),
        make_rational(ComplexPolynomial::new(vec![c(0.0, 1.0), c(2.0, 0.0)]), vec![c(-0.5, -1.0), c(1.5, -0.8)])
            .unwrap(),
        make_rational(
            ComplexPolynomial::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.5)]),
            vec![c(0.0, -1.5), c(2.0, -0.7), c(-1.0, -1.0)],
        )
        .unwrap(),
        make_rational(ComplexPolynomial::from_real(&[0.3, -1.0]), vec![c(0.2, -0.6), c(-0.4, -2.0)]).unwrap(),
    ];
    let zs = [c(0.0, 1.0), c(1.0, 1.0), c(-2.0, 0.5)];
    let coarse = build_halfline(&fs[0], 40.0, 4096).unwrap();
    let fine = build_halfline(&fs[0], 40.0, 8192).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for f in &fs {
        for &z in &zs {
            let exact = f.eval(z).unwrap();
            let e1 = (coarse.resolvent_identity(f, z) - exact).norm() / exact.norm();
            let e2 = (fine.resolvent_identity(f, z) - exact).norm() / exact.norm();
            worst = worst.max(e1);
            worst_ratio = worst_ratio.min(e1 / e2);
        }
    }
    outcome(
        worst <= 1e-3 && worst_ratio >= 1.8,
        format!("max rel error {worst:.2e} at M=4096, min error ratio M=4096/8192 {worst_ratio:.2}"),
    )
}

fn criterion_8() -> Outcome {
    let u = RationalHardyFunction::figure1();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for eps in [0.1, 0.2, 0.4] {
        let mut s = init_sim(&u, 80.0, 2048, eps, SignMode::Focusing, None).unwrap();
        evolve(&mut s, 1.0).unwrap();
        let m0 = s.initial_mass();
        let drift = s.mass_series.iter().map(|&(_, m)| (m / m0 - 1.0).abs()).fold(0.0, f64::max);
        worst = worst.max(drift);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs <= 300.0,
        format!("max relative mass drift {worst:.1e} over t in [0,1], eps in {{0.1,0.2,0.4}}, {secs:.1} s"),
    )
}

fn criterion_9() -> Outcome {
    let u = RationalHardyFunction::figure1();
    let (eps, t, sign) = (0.5, 0.5, SignMode::Focusing);
    let mut s = init_sim(&u, 320.0, 8192, eps, sign, None).unwrap();
    evolve(&mut s, t).unwrap();
    let xs = s.grid();
    let ue = s.physical();
    let pick: Vec<usize> = (0..xs.len()).filter(|&j| xs[j] >= -10.0 - 1e-9 && xs[j] <= 10.0 + 1e-9 && j % 16 == 0).collect();
    let op = build_halfline(&u, 40.0, 4096).unwrap();
    let op_vals: Vec<C64> = std::thread::scope(|sc| {
        let handles: Vec<_> = pick
            .chunks(pick.len().div_ceil(8))
            .map(|chunk| {
                let op = &op;
                let xs = &xs;
                sc.spawn(move || {
                    chunk
                        .iter()
                        .map(|&j| resolve_ueps_real(op, t, eps, xs[j], sign, 0.1).unwrap())
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let dx = xs[pick[1]] - xs[pick[0]];
    let dist = pick
        .iter()
        .zip(&op_vals)
        .map(|(&j, v)| (ue[j] - v).norm_sqr())
        .sum::<f64>()
        .mul_add(dx, 0.0)
        .sqrt();
    outcome(
        dist <= 1e-2,
        format!("grid L2 distance simulator vs operator {dist:.2e} on {} points of [-10,10], spacing {dx}", pick.len()),
    )
}

fn criterion_10() -> Outcome {
    let u = RationalHardyFunction::figure1();
    let tests = [
        GaussianTest { center: -2.0, width: 1.0 },
        GaussianTest { center: 0.0, width: 1.0 },
        GaussianTest { center: 1.5, width: 0.7 },
    ];
    let start = Instant::now();
    let rows = epsilon_sweep(&u, SignMode::Focusing, 1.0, &[0.4, 0.2, 0.1], &tests, &SweepConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let decreasing = (0..tests.len()).all(|i| rows.windows(2).all(|w| w[1].pairing_errors[i] < w[0].pairing_errors[i]));
    let table: Vec<String> = rows
        .iter()
        .map(|r| {
            let e: Vec<String> = r.pairing_errors.iter().map(|v| format!("{v:.2e}")).collect();
            format!("eps={}: [{}]", r.eps, e.join(", "))
        })
        .collect();
    outcome(decreasing && secs <= 900.0, format!("{}; {secs:.1} s", table.join("; ")))
}

fn criterion_11() -> Outcome {
    let u = RationalHardyFunction::figure1();
    let sign = SignMode::Focusing;
    let ts = shock_time(&u, sign, default_window(&u), DEFAULT_SCAN_PANELS);
    let exact = 4.0 / (3.0 * 3f64.sqrt());
    let xs = linspace(-4.0, 4.0, 41);
    let r1 = burgers_residual(&u, sign, 0.25, &xs, 1e-3, 1e-3).unwrap();
    let r2 = burgers_residual(&u, sign, 0.25, &xs, 5e-4, 5e-4).unwrap();
    let ratio = r1 / r2;
    outcome(
        (ts - exact).abs() <= 1e-4 && r1 <= 1e-4 && (3.5..=4.5).contains(&ratio),
        format!("t* = {ts:.8} (exact {exact:.8}); Burgers residual {r1:.2e} at h=1e-3, {r2:.2e} at h=5e-4, ratio {ratio:.2}"),
    )
}

fn criterion_12() -> Outcome {
    let u = RationalHardyFunction::figure1();
    let xs = linspace(-10.0, 10.0, 201);
    let field = zd_field(&u, 2.0, &xs, SignMode::Focusing, Route::Rational, &ZdConfig::default());
    let (px, pv): (Vec<f64>, Vec<C64>) = field.valid().map(|s| (s.x, s.value)).unzip();
    let fit = aaa(&px, &pv, 1e-10, 60).unwrap();
    let worst = px.iter().zip(&pv).map(|(&x, v)| (fit.eval(x) - v).norm()).fold(0.0, f64::max);
    // Off-sample diagnostic: the field is algebraic, with square-root branch
    // points at the critical values, so a rational fit is only an interpolant.
    let mid: Vec<f64> = px.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let held = mid
        .iter()
        .filter_map(|&x| {
            let bs = branch_set(&u, 2.0, x, SignMode::Focusing).ok()?;
            let v = zd_rational(&u, &bs).ok()?.value;
            Some((fit.eval(x) - v).norm())
        })
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-8 && px.len() > fit.support.len(),
        format!(
            "type ({0},{0}) barycentric fit with {1} support points matches {2} valid samples to {worst:.1e}; midpoint error {held:.1e}",
            fit.degree(),
            fit.support.len(),
            px.len()
        ),
    )
}

fn run(id: usize, f: impl FnOnce() -> Outcome + std::panic::UnwindSafe) -> bool {
    let start = Instant::now();
    let o = std::panic::catch_unwind(f).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    println!(
        "criterion {id:>2}: {} ({:.1} s) {}",
        if o.pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        o.detail
    );
    o.pass
}

fn main() {
    let mut ok = true;
    ok &= run(1, criterion_1);
    ok &= run(2, criterion_2);
    ok &= run(3, criterion_3);
    let stats = field_stats();
    ok &= run(4, || criterion_4(&stats));
    ok &= run(5, || criterion_5(&stats));
    ok &= run(6, || criterion_6(&stats));
    ok &= run(7, criterion_7);
    ok &= run(8, criterion_8);
    ok &= run(9, criterion_9);
    ok &= run(10, criterion_10);
    ok &= run(11, criterion_11);
    ok &= run(12, criterion_12);
    if !ok {
        std::process::exit(1);
    }
}
