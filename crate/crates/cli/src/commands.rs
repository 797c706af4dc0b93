//! The three subcommands. Each returns the process exit code.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use cmzd_core::branches::{branch_set, critical_values, default_window, shock_time};
use cmzd_core::operator::{build_halfline, resolve_zd_operator, HalfLineOperator};
use cmzd_core::sim::{epsilon_sweep, evolve, init_sim, write_checkpoint, SimError, SweepConfig};
use cmzd_core::zdl::{zd_point, Route};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::scenario::{ConfigInvalid, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;

pub const NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub t: f64,
    pub x: f64,
    pub re: Option<f64>,
    pub im: Option<f64>,
    pub modulus: Option<f64>,
    pub phase: Option<f64>,
    pub ell: Option<usize>,
    pub route: String,
    pub excluded_reason: String,
}

impl Row {
    fn value(&self) -> Option<C64> {
        Some(C64::new(self.re?, self.im?))
    }
}

fn sink(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn evaluate(
    sc: &Scenario,
    t: f64,
    x: f64,
    route: Route,
    crit: &[f64],
    op: Option<&HalfLineOperator>,
) -> (Row, bool) {
    let mut row = Row {
        t,
        x,
        re: None,
        im: None,
        modulus: None,
        phase: None,
        ell: None,
        route: route.as_str().to_string(),
        excluded_reason: String::new(),
    };
    let mut xe = x;
    if let Some(&c) = crit.iter().find(|&&c| (x - c).abs() < sc.zd.crit_eps) {
        if sc.nudge {
            xe = x + NUDGE;
            log::info!("t={t} x={x}: within {} of critical value {c}, nudged to {xe}", sc.zd.crit_eps);
            row.x = xe;
        } else {
            row.excluded_reason = format!("near critical value {c}");
            return (row, false);
        }
    }
    let result = match route {
        Route::Operator => match op {
            Some(op) => resolve_zd_operator(op, t, xe, sc.sign, sc.zd.operator_delta).map_err(|e| e.to_string()),
            None => Err("operator unavailable".to_string()),
        },
        _ => zd_point(&sc.u, t, xe, sc.sign, route, &sc.zd).map_err(|e| e.to_string()),
    };
    match result {
        Ok(s) => {
            row.re = Some(s.value.re);
            row.im = Some(s.value.im);
            row.modulus = Some(s.modulus);
            row.phase = Some(s.phase);
            row.ell = Some(s.ell);
            (row, false)
        }
        Err(e) => {
            row.excluded_reason = format!("error: {e}");
            (row, true)
        }
    }
}

/// Evaluates every requested route on the `(t, x)` grid and writes one CSV.
pub fn cmd_zd(sc: &Scenario) -> Result<i32, Box<dyn std::error::Error>> {
    let window = default_window(&sc.u);
    let op = if sc.routes.contains(&Route::Operator) {
        match build_halfline(&sc.u, sc.zd.operator_xi_max, sc.zd.operator_modes) {
            Ok(op) => Some(op),
            Err(e) => {
                eprintln!("operator route: {e}");
                return Ok(EXIT_CONFIG);
            }
        }
    } else {
        None
    };
    let mut rows: Vec<Row> = Vec::new();
    let mut failed = 0usize;
    for &t in &sc.ts {
        let crit = critical_values(&sc.u, t, sc.sign, window, sc.zd.n_scan);
        for &route in &sc.routes {
            let results: Vec<(Row, bool)> = sc
                .xs
                .par_iter()
                .map(|&x| evaluate(sc, t, x, route, &crit, op.as_ref()))
                .collect();
            for (row, err) in results {
                failed += err as usize;
                rows.push(row);
            }
        }
    }

    let mut w = csv::Writer::from_writer(sink(sc.out.as_deref())?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    if sc.all_routes {
        let per_route = sc.ts.len() * sc.xs.len();
        let (rat, rest) = rows.split_at(per_route);
        let mut summary = Vec::new();
        for (k, route) in sc.routes.iter().enumerate().skip(1) {
            let other = &rest[(k - 1) * per_route..k * per_route];
            let worst = rat
                .iter()
                .zip(other)
                .filter_map(|(a, b)| Some((a.value()? - b.value()?).norm()))
                .fold(0.0, f64::max);
            summary.push(format!("{} {worst:.3e}", route.as_str()));
        }
        eprintln!("max discrepancy vs rational: {}", summary.join(", "));
    }
    if failed > 0 {
        eprintln!("{failed} point(s) failed");
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

fn sim_exit(e: &SimError) -> i32 {
    match e {
        SimError::BoxTooSmall { .. }
        | SimError::FocusingMassExceeded(_)
        | SimError::TestFunctionLeavesBox { .. }
        | SimError::InvalidParameters(_) => EXIT_CONFIG,
        _ => EXIT_PARTIAL,
    }
}

/// Weak-pairing convergence table over the ε list.
pub fn cmd_sweep(sc: &Scenario) -> Result<i32, Box<dyn std::error::Error>> {
    if sc.eps_list.is_empty() {
        return Err(Box::new(ConfigInvalid::Other("sweep needs a non-empty --eps-list".into())));
    }
    if sc.ts.len() != 1 {
        return Err(Box::new(ConfigInvalid::Other("sweep takes a single --t".into())));
    }
    let t = sc.ts[0];
    let cfg = SweepConfig { length: sc.box_l, modes: sc.modes, dt: sc.dt };
    let start = Instant::now();
    let rows = match epsilon_sweep(&sc.u, sc.sign, t, &sc.eps_list, &sc.tests, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("sweep: {e}");
            return Ok(sim_exit(&e));
        }
    };

    let mut w = csv::Writer::from_writer(sink(sc.out.as_deref())?);
    let mut header = vec!["eps".to_string()];
    header.extend((1..=sc.tests.len()).map(|i| format!("pairing_error_{i}")));
    header.push("mass_drift".into());
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.eps.to_string()];
        rec.extend(r.pairing_errors.iter().map(|v| v.to_string()));
        rec.push(r.mass_drift.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    for r in &rows {
        eprintln!("eps={} wall time {:.2} s", r.eps, r.wall_time_s);
    }
    eprintln!("total {:.2} s", start.elapsed().as_secs_f64());

    if let Some(path) = &sc.checkpoint {
        let eps = *sc.eps_list.last().expect("non-empty");
        let mut s = init_sim(&sc.u, sc.box_l, sc.modes, eps, sc.sign, sc.dt)?;
        evolve(&mut s, t)?;
        write_checkpoint(&s, BufWriter::new(File::create(path)?))?;
    }

    if rows.iter().any(|r| r.mass_drift > 1e-6) {
        eprintln!("mass drift above 1e-6");
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct EllSegment {
    x_from: f64,
    x_to: f64,
    ell: usize,
}

#[derive(Debug, Serialize)]
struct ShockTime {
    t: f64,
    critical_values: Vec<f64>,
    ell_histogram: BTreeMap<usize, usize>,
    ell_profile: Vec<EllSegment>,
    excluded: usize,
}

#[derive(Debug, Serialize)]
struct ShockReport {
    version: &'static str,
    sign: String,
    t_star: Option<f64>,
    times: Vec<ShockTime>,
}

/// Shock time, critical values and the ℓ profile on the x grid.
pub fn cmd_shock(sc: &Scenario) -> Result<i32, Box<dyn std::error::Error>> {
    let window = default_window(&sc.u);
    let ts = shock_time(&sc.u, sc.sign, window, sc.zd.n_scan);
    let mut failed = 0usize;
    let mut times = Vec::new();
    for &t in &sc.ts {
        let crit = critical_values(&sc.u, t, sc.sign, window, sc.zd.n_scan);
        let ells: Vec<Option<usize>> = sc
            .xs
            .par_iter()
            .map(|&x| {
                if crit.iter().any(|&c| (x - c).abs() < sc.zd.crit_eps) {
                    return None;
                }
                branch_set(&sc.u, t, x, sc.sign).ok().filter(|b| !b.degenerate).map(|b| b.ell)
            })
            .collect();
        let mut hist = BTreeMap::new();
        let mut profile: Vec<EllSegment> = Vec::new();
        let mut excluded = 0;
        for (&x, ell) in sc.xs.iter().zip(&ells) {
            let Some(ell) = *ell else {
                excluded += 1;
                continue;
            };
            *hist.entry(ell).or_insert(0) += 1;
            match profile.last_mut() {
                Some(seg) if seg.ell == ell => seg.x_to = x,
                _ => profile.push(EllSegment { x_from: x, x_to: x, ell }),
            }
        }
        failed += ells
            .iter()
            .zip(&sc.xs)
            .filter(|(e, &x)| e.is_none() && !crit.iter().any(|&c| (x - c).abs() < sc.zd.crit_eps))
            .count();
        times.push(ShockTime { t, critical_values: crit, ell_histogram: hist, ell_profile: profile, excluded });
    }
    let report = ShockReport {
        version: env!("CARGO_PKG_VERSION"),
        sign: sc.sign.as_str().to_string(),
        t_star: ts.is_finite().then_some(ts),
        times,
    };
    let mut w = sink(sc.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}
