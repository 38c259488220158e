use serde::{Deserialize, Serialize};

use curveforge::Expr;

use crate::config::{ConfigError, RunConfig};

fn one() -> usize {
    1
}
fn thirty_two() -> usize {
    32
}
fn eight() -> usize {
    8
}
fn step() -> f64 {
    1e-3
}
fn unit() -> f64 {
    1.0
}
fn zero() -> String {
    "0".into()
}
fn one_expr() -> String {
    "1".into()
}
fn max_error() -> f64 {
    1e-6
}

/// Linear problem `u_tt + a u_t = αΔu + <∇β,∇u> + γu + f` read from TOML.
/// Coefficients are expressions in `x…` and `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProblem {
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default = "thirty_two", rename = "N")]
    pub n: usize,
    #[serde(default = "eight")]
    pub kappa: usize,
    #[serde(default = "step")]
    pub dt: f64,
    #[serde(default = "unit", rename = "T")]
    pub t_end: f64,
    #[serde(default = "zero")]
    pub a: String,
    #[serde(default = "one_expr")]
    pub alpha: String,
    #[serde(default = "zero")]
    pub beta: String,
    #[serde(default = "zero")]
    pub gamma: String,
    #[serde(default = "zero")]
    pub f: String,
    #[serde(default = "zero")]
    pub phi: String,
    #[serde(default = "zero")]
    pub psi: String,
    /// Known solution to compare against.
    pub exact: Option<String>,
    #[serde(default = "max_error")]
    pub max_error: f64,
    /// Enables cutoff doubling until the H¹ gap falls below `tol`.
    pub tol: Option<f64>,
}

impl LinearProblem {
    pub fn standing_wave() -> Self {
        Self {
            m: 1,
            n: 32,
            kappa: 4,
            dt: 1e-3,
            t_end: 1.0,
            a: zero(),
            alpha: one_expr(),
            beta: zero(),
            gamma: zero(),
            f: zero(),
            phi: "sin(x)".into(),
            psi: zero(),
            exact: Some("cos(t)*sin(x)".into()),
            max_error: 1e-6,
            tol: None,
        }
    }

    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn expressions(&self) -> [(&'static str, &str); 8] {
        [
            ("a", &self.a),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("f", &self.f),
            ("phi", &self.phi),
            ("psi", &self.psi),
            ("exact", self.exact.as_deref().unwrap_or("0")),
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let cfg = RunConfig {
            m: Some(self.m),
            n: Some(self.n),
            kappa: Some(self.kappa),
            dt: Some(self.dt),
            t_end: Some(self.t_end),
            tol: self.tol,
            ..Default::default()
        };
        cfg.validate()?;
        for (name, src) in self.expressions() {
            Expr::parse(src).map_err(|e| ConfigError::new(name, e.to_string()))?;
        }
        if !(self.max_error > 0.0) {
            return Err(ConfigError::new("max_error", "must be positive"));
        }
        Ok(())
    }
}
