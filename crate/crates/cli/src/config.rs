//! Experiment configuration: a TOML-syntax key/value file with dotted keys
//! (`coeffs.rho1 = 0.5`, or the same keys grouped under `[coeffs]`).
//!
//! Loading is strict: unknown keys are errors, and every violation found is
//! reported together.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fastvol::asymptotics::{validate_eps_grid, XLevel};
use fastvol::model::{
    CoefficientVector, InitialVolLaw, LevelFunction, MarketConfig, ScalingRegime, VolFunction, VolFunctionSpec,
};
use fastvol::sde::VolScheme;
use fastvol::{Coefficients64, Market64, Regime64, VolFunctions64};
use sha2::{Digest, Sha256};
use toml::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: i64 = 1;
/// Smallest `eps` allowed without `--deep`.
pub const DEEP_EPS: f64 = 0.025;

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub dx: f64,
    pub dt: f64,
    pub x_max: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub eps_grid: Vec<f64>,
    /// Horizon of each time-averaging replica.
    pub t_ergodic: f64,
    pub burn_in: Option<f64>,
    pub ergodic_dt: f64,
    pub replicas: usize,
    pub batches: usize,
    pub allow_unverified: bool,
    pub p: f64,
    pub n_paths: usize,
    pub x_levels: Vec<XLevel<f64>>,
    pub n_bootstrap: usize,
    pub limit_dt: f64,
    pub n_inner_grid: Vec<usize>,
    pub abs_slack: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub coeffs: Coefficients64,
    pub funcs: VolFunctions64,
    pub scheme: VolScheme,
    pub market: Market64,
    pub regime: Regime64,
    pub numerics: Numerics,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Hex SHA-256 of the resolved settings (defaults included, seed and
    /// output directory excluded).
    pub fn hash(&self) -> String {
        let mut text = String::new();
        let _ = write!(
            text,
            "{:?}\n{:?}\n{:?}\n{:?}\n{:?}\n{:?}",
            self.coeffs, self.funcs, self.scheme, self.market, self.regime, self.numerics
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Grids reaching below [`DEEP_EPS`] need an explicit opt-in.
    pub fn check_deep(&self, deep: bool) -> Result<(), CliError> {
        match self.numerics.eps_grid.last() {
            Some(&e) if e < DEEP_EPS * (1.0 - 1e-12) && !deep => Err(CliError::Validation(vec![format!(
                "numerics.eps_grid reaches eps = {e} < {DEEP_EPS}; pass --deep to run it"
            )])),
            _ => Ok(()),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Validation(vec![format!("syntax: {}", e.message())]))?;
    let mut flat = BTreeMap::new();
    flatten("", table, &mut flat);
    let mut r = Reader { map: flat, errors: Vec::new() };

    match r.take("schema") {
        None => r.errors.push("missing required key `schema`".into()),
        Some(Value::Integer(SCHEMA_VERSION)) => {}
        Some(v) => r.errors.push(format!("schema must be {SCHEMA_VERSION}, got {v}")),
    }
    let seed = r.opt_u64("seed");
    let output = r.opt_str("output").map(PathBuf::from);

    let raw = ["r", "rho1", "rho2", "kappa", "theta", "xi"].map(|k| r.f64_req(&format!("coeffs.{k}")));
    let [c_r, rho1, rho2, kappa, theta, xi] = raw.map(|x| x.unwrap_or(f64::NAN));
    let coeffs = CoefficientVector { r: c_r, rho1, rho2, kappa, theta, xi };
    let g = match r.str_or("model.g", "constant_one").as_str() {
        "constant_one" => VolFunction::ConstantOne,
        "cir_sqrt" => VolFunction::CirSqrt,
        "damped_sqrt" => VolFunction::DampedSqrt {
            c_g: r.f64_or("model.c_g", 0.5),
            steepness: r.f64_or("model.steepness", 1.0),
        },
        other => {
            r.errors.push(format!("model.g: unknown function `{other}` (constant_one, cir_sqrt, damped_sqrt)"));
            VolFunction::ConstantOne
        }
    };
    let h = match r.str_or("model.h", "identity").as_str() {
        "identity" => LevelFunction::Identity,
        "sqrt_abs" => LevelFunction::SqrtAbs,
        "bounded_sigmoid" => LevelFunction::BoundedSigmoid {
            h_min: r.f64_or("model.h_min", 0.1),
            h_max: r.f64_or("model.h_max", 0.5),
        },
        "constant" => LevelFunction::Constant(r.f64_req("model.h_level").unwrap_or(f64::NAN)),
        other => {
            r.errors.push(format!(
                "model.h: unknown function `{other}` (identity, sqrt_abs, bounded_sigmoid, constant)"
            ));
            LevelFunction::Identity
        }
    };
    let scheme = match r.opt_str("model.scheme").as_deref() {
        None if g == VolFunction::ConstantOne => VolScheme::ExactOu,
        None => VolScheme::default_for(&g),
        Some("euler") => VolScheme::Euler,
        Some("full_truncation_euler") => VolScheme::FullTruncationEuler,
        Some("exact_ou") => VolScheme::ExactOu,
        Some(other) => {
            r.errors.push(format!("model.scheme: unknown scheme `{other}`"));
            VolScheme::Euler
        }
    };
    let initial_vol = match r.take("model.initial_vol") {
        None => InitialVolLaw::Stationary,
        Some(Value::String(s)) if s == "stationary" => InitialVolLaw::Stationary,
        Some(v) => match as_f64(&v) {
            Some(x) => InitialVolLaw::Fixed(x),
            None => {
                r.errors.push(format!("model.initial_vol must be \"stationary\" or a number, got {v}"));
                InitialVolLaw::Stationary
            }
        },
    };
    let market = MarketConfig {
        rho3: r.f64_or("market.rho3", 0.0),
        beta: r.f64_or("market.beta", 0.5),
        initial_vol,
        horizon: r.f64_or("market.T", 1.0),
    };
    let regime = match r.str_or("regime.kind", "unscaled").as_str() {
        "unscaled" => ScalingRegime::Unscaled,
        "large_vol_of_vol" => ScalingRegime::LargeVolOfVol { epsilon: r.f64_req("regime.epsilon").unwrap_or(f64::NAN) },
        "small_vol_of_vol" => ScalingRegime::SmallVolOfVol { epsilon: r.f64_req("regime.epsilon").unwrap_or(f64::NAN) },
        other => {
            r.errors.push(format!(
                "regime.kind: unknown regime `{other}` (unscaled, large_vol_of_vol, small_vol_of_vol)"
            ));
            ScalingRegime::Unscaled
        }
    };

    let x_levels = match r.take("numerics.x_levels") {
        None => vec![XLevel::LimitMedianAtHalfHorizon],
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|v| match v {
                Value::String(s) if s == "median" => Some(XLevel::LimitMedianAtHalfHorizon),
                v => match as_f64(v) {
                    Some(x) => Some(XLevel::Fixed(x)),
                    None => {
                        r.errors.push(format!("numerics.x_levels: expected \"median\" or a number, got {v}"));
                        None
                    }
                },
            })
            .collect(),
        Some(v) => {
            r.errors.push(format!("numerics.x_levels must be an array, got {v}"));
            Vec::new()
        }
    };
    let numerics = Numerics {
        dx: r.f64_or("numerics.dx", 0.02),
        dt: r.f64_or("numerics.dt", 1e-3),
        x_max: r.f64_or("numerics.x_max", 10.0),
        n_outer: r.usize_or("numerics.n_outer", 200),
        n_inner: r.usize_or("numerics.n_inner", 500),
        eps_grid: r.f64_list_or("numerics.eps_grid", &[0.2, 0.1, 0.05, 0.025]),
        t_ergodic: r.f64_or("numerics.T", 500.0),
        burn_in: r.opt_f64("numerics.burn_in"),
        ergodic_dt: r.f64_or("numerics.ergodic_dt", 0.01),
        replicas: r.usize_or("numerics.replicas", 256),
        batches: r.usize_or("numerics.batches", 50),
        allow_unverified: r.bool_or("numerics.allow_unverified", false),
        p: r.f64_or("numerics.p", 2.0),
        n_paths: r.usize_or("numerics.n_paths", 10_000),
        x_levels,
        n_bootstrap: r.usize_or("numerics.n_bootstrap", 200),
        limit_dt: r.f64_or("numerics.limit_dt", 1e-3),
        n_inner_grid: r.usize_list_or("numerics.n_inner_grid", &[100, 1000, 10_000]),
        abs_slack: r.f64_or("numerics.abs_slack", 2e-3),
        eta: r.f64_or("numerics.eta", 1e-6),
    };

    let mut errors = r.finish();
    errors.extend(coefficient_violations(&raw));
    let funcs = VolFunctionSpec { g, h };
    push_err(&mut errors, funcs.validate());
    push_err(&mut errors, regime.validate());
    push_err(&mut errors, market.validate());
    push_err(&mut errors, market.check_regime(&regime));
    push_err(&mut errors, regime.check_dt(numerics.dt));
    push_err(&mut errors, validate_eps_grid(&numerics.eps_grid));
    if scheme == VolScheme::ExactOu && g != VolFunction::ConstantOne {
        errors.push(format!("model.scheme exact_ou needs g = constant_one, got {}", g.name()));
    }
    for (name, v) in [
        ("numerics.dx", numerics.dx),
        ("numerics.dt", numerics.dt),
        ("numerics.x_max", numerics.x_max),
        ("numerics.T", numerics.t_ergodic),
        ("numerics.ergodic_dt", numerics.ergodic_dt),
        ("numerics.limit_dt", numerics.limit_dt),
        ("numerics.eta", numerics.eta),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            errors.push(format!("{name} must be > 0, got {v}"));
        }
    }
    if let Some(b) = numerics.burn_in {
        if !(b >= 0.0 && b < numerics.t_ergodic) {
            errors.push(format!("numerics.burn_in must lie in [0, numerics.T), got {b}"));
        }
    }
    if numerics.n_outer < 2 {
        errors.push("numerics.n_outer must be >= 2".into());
    }
    for (name, v) in [
        ("numerics.n_inner", numerics.n_inner),
        ("numerics.replicas", numerics.replicas),
        ("numerics.batches", numerics.batches),
        ("numerics.n_paths", numerics.n_paths),
    ] {
        if v == 0 {
            errors.push(format!("{name} must be >= 1"));
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    Ok(ExperimentConfig {
        coeffs,
        funcs,
        scheme,
        market,
        regime,
        numerics,
        seed,
        output,
    })
}

/// Checks each given coefficient `(r, rho1, rho2, kappa, theta, xi)` on its
/// own against an otherwise valid vector, so every bad field is reported.
fn coefficient_violations(raw: &[Option<f64>; 6]) -> Vec<String> {
    let base = CoefficientVector { r: 0.0, rho1: 0.0, rho2: 0.0, kappa: 1.0, theta: 0.0, xi: 0.0 };
    let set: [fn(&mut Coefficients64, f64); 6] = [
        |c, x| c.r = x,
        |c, x| c.rho1 = x,
        |c, x| c.rho2 = x,
        |c, x| c.kappa = x,
        |c, x| c.theta = x,
        |c, x| c.xi = x,
    ];
    raw.iter()
        .zip(set)
        .filter_map(|(x, f)| {
            let mut probe = base;
            f(&mut probe, (*x)?);
            probe.validate().err().map(|e| e.to_string())
        })
        .collect()
}

fn push_err(errors: &mut Vec<String>, r: fastvol::Result<()>) {
    if let Err(e) = r {
        errors.push(e.to_string());
    }
}

fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            v => {
                out.insert(key, v);
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

struct Reader {
    map: BTreeMap<String, Value>,
    errors: Vec<String>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn finish(self) -> Vec<String> {
        let mut errors = self.errors;
        errors.extend(self.map.keys().map(|k| format!("unknown key `{k}`")));
        errors
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        let v = self.take(key)?;
        let x = as_f64(&v);
        if x.is_none() {
            self.errors.push(format!("{key} must be a number, got {v}"));
        }
        x
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        self.opt_f64(key).unwrap_or(default)
    }

    fn f64_req(&mut self, key: &str) -> Option<f64> {
        if !self.map.contains_key(key) {
            self.errors.push(format!("missing required key `{key}`"));
        }
        self.opt_f64(key)
    }

    fn opt_u64(&mut self, key: &str) -> Option<u64> {
        match self.take(key)? {
            Value::Integer(i) if i >= 0 => Some(i as u64),
            v => {
                self.errors.push(format!("{key} must be a nonnegative integer, got {v}"));
                None
            }
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> usize {
        self.opt_u64(key).map(|x| x as usize).unwrap_or(default)
    }

    fn bool_or(&mut self, key: &str, default: bool) -> bool {
        match self.take(key) {
            None => default,
            Some(Value::Boolean(b)) => b,
            Some(v) => {
                self.errors.push(format!("{key} must be true or false, got {v}"));
                default
            }
        }
    }

    fn opt_str(&mut self, key: &str) -> Option<String> {
        match self.take(key)? {
            Value::String(s) => Some(s),
            v => {
                self.errors.push(format!("{key} must be a string, got {v}"));
                None
            }
        }
    }

    fn str_or(&mut self, key: &str, default: &str) -> String {
        self.opt_str(key).unwrap_or_else(|| default.to_string())
    }

    fn list_or<X: Clone>(&mut self, key: &str, default: &[X], conv: impl Fn(&Value) -> Option<X>) -> Vec<X> {
        match self.take(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => {
                let parsed: Option<Vec<X>> = items.iter().map(&conv).collect();
                parsed.unwrap_or_else(|| {
                    self.errors.push(format!("{key} has an entry of the wrong type"));
                    default.to_vec()
                })
            }
            Some(v) => {
                self.errors.push(format!("{key} must be an array, got {v}"));
                default.to_vec()
            }
        }
    }

    fn f64_list_or(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        self.list_or(key, default, as_f64)
    }

    fn usize_list_or(&mut self, key: &str, default: &[usize]) -> Vec<usize> {
        self.list_or(key, default, |v| match v {
            Value::Integer(i) if *i > 0 => Some(*i as usize),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema = 1\n[coeffs]\nr = 0.05\nrho1 = 0.5\nrho2 = 0.5\nkappa = 2\ntheta = 0.3\nxi = 0.5\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.scheme, VolScheme::ExactOu);
        assert_eq!(c.numerics.eps_grid, vec![0.2, 0.1, 0.05, 0.025]);
        assert_eq!(c.market.beta, 0.5);
        assert_eq!(c.regime, ScalingRegime::Unscaled);
    }

    #[test]
    fn hash_ignores_seed_but_not_numbers() {
        let a = parse_config(MINIMAL).unwrap();
        let b = parse_config(&format!("seed = 9\n{MINIMAL}")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse_config(&MINIMAL.replace("theta = 0.3", "theta = 0.31")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
