//! Scenario assembly from command-line flags and an optional key-value file.
//!
//! The config file holds one `key = value` per line, keys spelled like the
//! long flags without the dashes (`box-L = 80`). Blank lines and `#` comments
//! are ignored. Flags given on the command line win over the file.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use cmzd_core::hardy::{make_rational, RationalHardyFunction, SignMode};
use cmzd_core::poly::ComplexPolynomial;
use cmzd_core::sim::GaussianTest;
use cmzd_core::zdl::{Route, ZdConfig};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigInvalid {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("bad value for {key}: {reason}")]
    Value { key: String, reason: String },
    #[error("initial data: {0}")]
    Data(String),
    #[error("focusing data needs ||u0||^2 < 2*pi, got {0}")]
    FocusingMass(f64),
    #[error("{0}")]
    Other(String),
}

const KEYS: &[&str] = &[
    "preset", "u0-num", "u0-poles", "sign", "t", "x", "x-min", "x-max", "x-n", "route", "eps-list",
    "box-L", "modes", "dt", "out", "nudge", "tests", "checkpoint", "quad-tol", "operator-modes",
    "operator-xi-max", "operator-delta",
];

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Flat key-value config file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named initial datum; `figure1` is 1/(y+i).
    #[arg(long)]
    pub preset: Option<String>,
    /// Numerator coefficients, lowest degree first, as `re,im;re,im;...`.
    #[arg(long = "u0-num", allow_hyphen_values = true)]
    pub u0_num: Option<String>,
    /// Pole parameters p_k (poles at -conj(p_k), Im p_k < 0), as `re,im;...`.
    #[arg(long = "u0-poles", allow_hyphen_values = true)]
    pub u0_poles: Option<String>,
    #[arg(long)]
    pub sign: Option<String>,
    /// Comma-separated times.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Single abscissa, instead of a grid.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    #[arg(long = "x-min", allow_hyphen_values = true)]
    pub x_min: Option<String>,
    #[arg(long = "x-max", allow_hyphen_values = true)]
    pub x_max: Option<String>,
    #[arg(long = "x-n")]
    pub x_n: Option<String>,
    /// rational, determinant, finite_rank, branch, operator or all.
    #[arg(long)]
    pub route: Option<String>,
    /// Strictly descending, comma-separated.
    #[arg(long = "eps-list")]
    pub eps_list: Option<String>,
    #[arg(long = "box-L")]
    pub box_l: Option<String>,
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    /// Gaussian test functions as `center,width;...`.
    #[arg(long, allow_hyphen_values = true)]
    pub tests: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a simulator checkpoint of the last sweep run.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Shift near-critical abscissae by +1e-6 instead of excluding them.
    #[arg(long)]
    pub nudge: bool,
    #[arg(long = "quad-tol")]
    pub quad_tol: Option<String>,
    #[arg(long = "operator-modes")]
    pub operator_modes: Option<String>,
    #[arg(long = "operator-xi-max")]
    pub operator_xi_max: Option<String>,
    #[arg(long = "operator-delta")]
    pub operator_delta: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub u: RationalHardyFunction,
    pub sign: SignMode,
    pub ts: Vec<f64>,
    pub xs: Vec<f64>,
    pub routes: Vec<Route>,
    pub all_routes: bool,
    pub eps_list: Vec<f64>,
    pub box_l: f64,
    pub modes: usize,
    pub dt: Option<f64>,
    pub tests: Vec<GaussianTest>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub nudge: bool,
    pub zd: ZdConfig,
}

pub fn read_config(path: &Path) -> Result<HashMap<String, String>, ConfigInvalid> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigInvalid::Read { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<HashMap<String, String>, ConfigInvalid> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigInvalid::Syntax { line: i + 1 })?;
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigInvalid::UnknownKey(k));
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

fn bad(key: &str, reason: impl ToString) -> ConfigInvalid {
    ConfigInvalid::Value { key: key.into(), reason: reason.to_string() }
}

fn scalar<T: FromStr>(key: &str, s: &str) -> Result<T, ConfigInvalid>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| bad(key, e))
}

fn reals(key: &str, s: &str) -> Result<Vec<f64>, ConfigInvalid> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| scalar(key, p)).collect()
}

/// `re,im;re,im;...`, a bare `re` meaning a real entry.
pub fn complex_list(key: &str, s: &str) -> Result<Vec<C64>, ConfigInvalid> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let parts: Vec<&str> = p.split(',').collect();
            match parts.as_slice() {
                [re] => Ok(C64::new(scalar(key, re)?, 0.0)),
                [re, im] => Ok(C64::new(scalar(key, re)?, scalar(key, im)?)),
                _ => Err(bad(key, format!("'{p}' is not a re,im pair"))),
            }
        })
        .collect()
}

pub fn parse_route(s: &str) -> Result<(Vec<Route>, bool), ConfigInvalid> {
    if s.trim() == "all" {
        return Ok((vec![Route::Rational, Route::Determinant, Route::BranchPhase], true));
    }
    let r = Route::from_str(s.trim()).map_err(|e| bad("route", e))?;
    Ok((vec![r], false))
}

impl ScenarioArgs {
    fn lookup(&self, key: &str, file: &HashMap<String, String>) -> Option<String> {
        let cli = match key {
            "preset" => self.preset.clone(),
            "u0-num" => self.u0_num.clone(),
            "u0-poles" => self.u0_poles.clone(),
            "sign" => self.sign.clone(),
            "t" => self.t.clone(),
            "x" => self.x.clone(),
            "x-min" => self.x_min.clone(),
            "x-max" => self.x_max.clone(),
            "x-n" => self.x_n.clone(),
            "route" => self.route.clone(),
            "eps-list" => self.eps_list.clone(),
            "box-L" => self.box_l.clone(),
            "modes" => self.modes.clone(),
            "dt" => self.dt.clone(),
            "tests" => self.tests.clone(),
            "out" => self.out.as_ref().map(|p| p.display().to_string()),
            "checkpoint" => self.checkpoint.as_ref().map(|p| p.display().to_string()),
            "nudge" => self.nudge.then(|| "true".to_string()),
            "quad-tol" => self.quad_tol.clone(),
            "operator-modes" => self.operator_modes.clone(),
            "operator-xi-max" => self.operator_xi_max.clone(),
            "operator-delta" => self.operator_delta.clone(),
            _ => None,
        };
        cli.or_else(|| file.get(key).cloned())
    }

    pub fn resolve(&self) -> Result<Scenario, ConfigInvalid> {
        let file = match &self.config {
            Some(p) => read_config(p)?,
            None => HashMap::new(),
        };
        let get = |k: &str| self.lookup(k, &file);

        let u = match (get("preset"), get("u0-num"), get("u0-poles")) {
            (Some(p), None, None) if p == "figure1" => RationalHardyFunction::figure1(),
            (Some(p), None, None) => return Err(bad("preset", format!("unknown preset '{p}'"))),
            (None, Some(num), Some(poles)) => make_rational(
                ComplexPolynomial::new(complex_list("u0-num", &num)?),
                complex_list("u0-poles", &poles)?,
            )
            .map_err(|e| ConfigInvalid::Data(e.to_string()))?,
            (None, None, None) => {
                return Err(ConfigInvalid::Other("give --preset or both --u0-num and --u0-poles".into()))
            }
            _ => {
                return Err(ConfigInvalid::Other(
                    "--preset excludes --u0-num/--u0-poles, which must come together".into(),
                ))
            }
        };

        let sign = match get("sign") {
            Some(s) => SignMode::from_str(&s).map_err(|e| bad("sign", e))?,
            None => SignMode::Focusing,
        };
        if sign == SignMode::Focusing {
            let m = u.l2_norm_sq().map_err(|e| ConfigInvalid::Data(e.to_string()))?;
            if m >= 2.0 * PI {
                return Err(ConfigInvalid::FocusingMass(m));
            }
        }

        let ts = match get("t") {
            Some(s) => reals("t", &s)?,
            None => vec![0.0],
        };
        if ts.is_empty() || ts.iter().any(|t| !t.is_finite()) {
            return Err(bad("t", "need at least one finite time"));
        }

        let xs = match get("x") {
            Some(s) => reals("x", &s)?,
            None => {
                let lo: f64 = get("x-min").map(|s| scalar("x-min", &s)).transpose()?.unwrap_or(-10.0);
                let hi: f64 = get("x-max").map(|s| scalar("x-max", &s)).transpose()?.unwrap_or(10.0);
                let n: usize = get("x-n").map(|s| scalar("x-n", &s)).transpose()?.unwrap_or(201);
                if !(lo < hi) || n < 2 {
                    if n == 1 && lo.is_finite() {
                        vec![lo]
                    } else {
                        return Err(bad("x-min/x-max/x-n", format!("need x-min < x-max and x-n >= 2, got {lo}, {hi}, {n}")));
                    }
                } else {
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
                }
            }
        };
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(bad("x", "non-finite abscissa"));
        }

        let (routes, all_routes) = match get("route") {
            Some(s) => parse_route(&s)?,
            None => (vec![Route::Rational], false),
        };

        let eps_list = match get("eps-list") {
            Some(s) => reals("eps-list", &s)?,
            None => Vec::new(),
        };

        let tests = match get("tests") {
            Some(s) => complex_list("tests", &s)?
                .into_iter()
                .map(|c| GaussianTest { center: c.re, width: c.im })
                .collect(),
            None => vec![
                GaussianTest { center: -2.0, width: 1.0 },
                GaussianTest { center: 0.0, width: 1.0 },
                GaussianTest { center: 1.5, width: 0.7 },
            ],
        };
        if tests.iter().any(|g| !(g.width > 0.0)) {
            return Err(bad("tests", "widths must be positive"));
        }

        let mut zd = ZdConfig::default();
        if let Some(s) = get("quad-tol") {
            let tol: f64 = scalar("quad-tol", &s)?;
            zd.quad.abs_tol = tol;
            zd.quad.rel_tol = tol;
        }
        if let Some(s) = get("operator-modes") {
            zd.operator_modes = scalar("operator-modes", &s)?;
        }
        if let Some(s) = get("operator-xi-max") {
            zd.operator_xi_max = scalar("operator-xi-max", &s)?;
        }
        if let Some(s) = get("operator-delta") {
            zd.operator_delta = scalar("operator-delta", &s)?;
        }

        let nudge = match get("nudge") {
            Some(s) => scalar::<bool>("nudge", &s)?,
            None => false,
        };

        Ok(Scenario {
            u,
            sign,
            ts,
            xs,
            routes,
            all_routes,
            eps_list,
            box_l: get("box-L").map(|s| scalar("box-L", &s)).transpose()?.unwrap_or(80.0),
            modes: get("modes").map(|s| scalar("modes", &s)).transpose()?.unwrap_or(2048),
            dt: get("dt").map(|s| scalar("dt", &s)).transpose()?,
            tests,
            out: get("out").map(PathBuf::from),
            checkpoint: get("checkpoint").map(PathBuf::from),
            nudge,
            zd,
        })
    }
}
