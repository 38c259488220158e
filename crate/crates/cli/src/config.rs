use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use curveforge::{Expr, TorusGrid};

/// Largest total number of grid points accepted for one time slice.
pub const MAX_POINTS: usize = 1 << 21;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid {}: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

/// Everything a run depends on. Unused fields stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub preset: Option<String>,
    pub mode: Option<String>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub kappa: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub t0: Option<f64>,
    pub s: Option<usize>,
    pub k: Option<usize>,
    pub d_bound: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub adaptive: bool,
    pub rtilde: Option<String>,
    pub phi: Option<String>,
    pub psi: Option<String>,
    pub r_g: Option<String>,
    /// Conformal factor of a curved base metric.
    pub base_conformal: Option<String>,
    /// Field under study for `energy-report`.
    pub u: Option<String>,
    pub v: Option<String>,
    pub resolutions: Vec<usize>,
    pub bisect: bool,
    pub linear: Option<crate::LinearProblem>,
    /// Random Picard starting iterate.
    pub seed: Option<u64>,
    pub out: PathBuf,
}

fn positive(field: &'static str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(ConfigError::new(field, format!("{x} is not a positive number")))
        }
        _ => Ok(()),
    }
}

/// An input is a file when the path exists, an expression otherwise.
pub fn check_input(field: &'static str, src: &Option<String>) -> Result<(), ConfigError> {
    let Some(src) = src else { return Ok(()) };
    if Path::new(src).is_file() {
        return Ok(());
    }
    let e = Expr::parse(src).map_err(|e| ConfigError::new(field, e.to_string()))?;
    if e.arity().1 > 1 {
        return Err(ConfigError::new(field, "only the time variable t is available"));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(m) = self.m {
            if !(1..=3).contains(&m) {
                return Err(ConfigError::new("m", format!("{m} is outside 1..=3")));
            }
        }
        if let Some(n) = self.n {
            if n < 4 || n % 2 != 0 {
                return Err(ConfigError::new("N", format!("{n} is not an even number ≥ 4")));
            }
            let total = n.checked_pow(self.m.unwrap_or(1) as u32).unwrap_or(usize::MAX);
            if total > MAX_POINTS {
                return Err(ConfigError::new("N", format!("N^m = {total} exceeds {MAX_POINTS}")));
            }
        }
        if let (Some(kappa), Some(n)) = (self.kappa, self.n) {
            if kappa == 0 || 2 * kappa >= n {
                return Err(ConfigError::new("kappa", format!("{kappa} must lie in 1..{}", n / 2)));
            }
        }
        positive("dt", self.dt)?;
        positive("T", self.t_end)?;
        positive("t0", self.t0)?;
        positive("D", self.d_bound)?;
        positive("tol", self.tol)?;
        if let (Some(t0), Some(t)) = (self.t0, self.t_end) {
            if t0 > t {
                return Err(ConfigError::new("t0", format!("{t0} exceeds T = {t}")));
            }
        }
        if let (Some(dt), Some(t)) = (self.dt, self.t0.or(self.t_end)) {
            if dt > t / 4.0 {
                return Err(ConfigError::new("dt", format!("{dt} leaves fewer than 4 steps")));
            }
        }
        if let (Some(s), Some(m)) = (self.s, self.m) {
            if s < m / 2 + 2 {
                return Err(ConfigError::new("s", format!("{s} is below ⌊m/2⌋ + 2 = {}", m / 2 + 2)));
            }
        }
        if let (Some(s), Some(n)) = (self.s, self.n) {
            if s + 1 > n / 2 {
                return Err(ConfigError::new("s", format!("H^{} is not resolved with N = {n}", s + 1)));
            }
        }
        if self.max_iters.is_some_and(|i| i < 2) {
            return Err(ConfigError::new("max-iters", "must be at least 2"));
        }
        if let Some(mode) = &self.mode {
            if mode != "local" && mode != "small-data" {
                return Err(ConfigError::new("mode", format!("'{mode}' is not local or small-data")));
            }
        }
        if let Some(r) = self.resolutions.iter().find(|&&r| r < 8 || r % 2 != 0) {
            return Err(ConfigError::new("resolutions", format!("{r} is not an even number ≥ 8")));
        }
        check_input("rtilde", &self.rtilde)?;
        check_input("phi", &self.phi)?;
        check_input("psi", &self.psi)?;
        check_input("rg", &self.r_g)?;
        check_input("u", &self.u)?;
        check_input("v", &self.v)?;
        if let Some(src) = &self.base_conformal {
            Expr::parse(src).map_err(|e| ConfigError::new("base-conformal", e.to_string()))?;
        }
        if let Some(p) = &self.linear {
            p.validate()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid, ConfigError> {
        let (m, n) = (self.m.unwrap_or(1), self.n.unwrap_or(32));
        TorusGrid::new(m, n).map_err(|e| ConfigError::new("N", e.to_string()))
    }
}
