//! Energy functionals of the evolution equation and the integrated
//! Gronwall check along a trajectory.
//!
//! With `v` the frozen coefficient field,
//!
//! ```text
//! E₁⁽ˡ⁾ = ½∫ |∇ˡu|² + m e^{2(m+1)v} |∇ˡ⁻¹u_t|²
//! E₂⁽ˡ⁾ = ½∫ e^{−2(m+1)v} |∇ˡu|² + m |∇ˡ⁻¹u_t|²
//! E_s   = Σ_{l=1}^{s} (E₁⁽ˡ⁾ + E₂⁽ˡ⁾) + ½∫ u²
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridField, SpaceTimeField};
use crate::norms::{sobolev_norm, tensor_norm_sq};
use crate::time::{d1, time_derivative};

/// Offset in the denominator of the Gronwall rate.
pub const RATE_EPS: f64 = 1e-14;
/// Relative slack on the fitted rate in the integrated check.
pub const GRONWALL_SLACK: f64 = 1.05;

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::param("m", "must be positive"));
    }
    Ok(())
}

/// `(E₁⁽ˡ⁾, E₂⁽ˡ⁾)` from `u`, `u_t` and `v` at one instant.
pub fn energy_components_at(
    u: &GridField,
    ut: &GridField,
    v: &GridField,
    l: usize,
    m: usize,
) -> Result<(f64, f64)> {
    check_m(m)?;
    u.grid().check_same(ut.grid())?;
    u.grid().check_same(v.grid())?;
    if l == 0 || l > u.grid().max_order() {
        return Err(Error::param(
            "l",
            format!("{l} is outside 1..={}", u.grid().max_order()),
        ));
    }
    let gu = tensor_norm_sq(u, l)?;
    let gut = tensor_norm_sq(ut, l - 1)?;
    let c = 2.0 * (m + 1) as f64;
    let mf = m as f64;
    let (mut e1, mut e2) = (0.0, 0.0);
    for ((a, b), w) in gu.samples().iter().zip(gut.samples()).zip(v.samples()) {
        e1 += a + mf * (c * w).exp() * b;
        e2 += (-c * w).exp() * a + mf * b;
    }
    let dv = u.grid().cell_volume();
    Ok((0.5 * e1 * dv, 0.5 * e2 * dv))
}

/// As [`energy_components_at`] at time node `node`, with `u_t` from the
/// time stencils.
pub fn energy_components(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    l: usize,
    m: usize,
    node: usize,
) -> Result<(f64, f64)> {
    u.check_compatible(v)?;
    let ut = time_derivative(u, 1)?;
    energy_components_at(u.node(node), ut.node(node), v.node(node), l, m)
}

pub fn total_energy_at(
    u: &GridField,
    ut: &GridField,
    v: &GridField,
    s: usize,
    m: usize,
) -> Result<f64> {
    if s == 0 {
        return Err(Error::param("s", "must be at least 1"));
    }
    let mut total = 0.5 * u.inner(u)?;
    for l in 1..=s {
        let (e1, e2) = energy_components_at(u, ut, v, l, m)?;
        total += e1 + e2;
    }
    Ok(total)
}

pub fn total_energy(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    s: usize,
    m: usize,
    node: usize,
) -> Result<f64> {
    u.check_compatible(v)?;
    let ut = time_derivative(u, 1)?;
    total_energy_at(u.node(node), ut.node(node), v.node(node), s, m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    /// `‖u‖_{H^s} + ‖u_t‖_{H^{s−1}}`.
    pub lhs: f64,
    pub sqrt_energy: f64,
    pub ratio: Option<f64>,
    /// Upper bound on `ratio` given `‖v‖_{C⁰}`.
    pub bound: f64,
}

/// Bound on `(‖u‖_{H^s} + ‖u_t‖_{H^{s−1}})/√E_s` when `|v| ≤ v_sup`:
/// `E_s ≥ ½‖u‖²_{H^s} + ½m(1+c)‖u_t‖²_{H^{s−1}}` with `c = e^{−2(m+1)v_sup}`,
/// and Cauchy-Schwarz gives `√(2 + 2/(m(1+c)))`.
pub fn bridge_bound(m: usize, v_sup: f64) -> f64 {
    let c = (-2.0 * (m + 1) as f64 * v_sup).exp();
    (2.0 + 2.0 / (m as f64 * (1.0 + c))).sqrt()
}

pub fn norm_energy_bridge_at(
    u: &GridField,
    ut: &GridField,
    v: &GridField,
    s: usize,
    m: usize,
) -> Result<BridgeReport> {
    let e = total_energy_at(u, ut, v, s, m)?;
    let lhs = sobolev_norm(u, s)? + sobolev_norm(ut, s - 1)?;
    let sqrt_energy = e.sqrt();
    let ratio = if sqrt_energy > 0.0 {
        Some(lhs / sqrt_energy)
    } else if lhs > 0.0 {
        return Err(Error::EnergyNormMismatch { lhs });
    } else {
        None
    };
    Ok(BridgeReport {
        lhs,
        sqrt_energy,
        ratio,
        bound: bridge_bound(m, v.max_abs()),
    })
}

pub fn norm_energy_bridge(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    s: usize,
    m: usize,
    node: usize,
) -> Result<BridgeReport> {
    u.check_compatible(v)?;
    let ut = time_derivative(u, 1)?;
    norm_energy_bridge_at(u.node(node), ut.node(node), v.node(node), s, m)
}

/// `A_s = sup_t ‖R̃(t)‖_{H^{s−1}} + ‖R_g‖_{H^{s−1}}`.
pub fn data_quantity_as(rtilde: &SpaceTimeField, r_g: &GridField, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::param("s", "must be at least 1"));
    }
    let mut sup: f64 = 0.0;
    for node in rtilde.nodes() {
        sup = sup.max(sobolev_norm(node, s - 1)?);
    }
    Ok(sup + sobolev_norm(r_g, s - 1)?)
}

/// Energy values at every node of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    /// `e1[j][l-1] = E₁⁽ˡ⁾(t_j)`.
    pub e1: Vec<Vec<f64>>,
    pub e2: Vec<Vec<f64>>,
    pub es: Vec<f64>,
    pub sqrt_es: Vec<f64>,
    pub a_s: f64,
}

impl EnergyTrace {
    /// A trace holding only `√E_s`, e.g. for synthetic checks.
    pub fn from_sqrt(times: Vec<f64>, sqrt_es: Vec<f64>, a_s: f64) -> Self {
        let es = sqrt_es.iter().map(|v| v * v).collect();
        Self {
            e1: vec![Vec::new(); times.len()],
            e2: vec![Vec::new(); times.len()],
            times,
            es,
            sqrt_es,
            a_s,
        }
    }

    pub fn s(&self) -> usize {
        self.e1.first().map_or(0, Vec::len)
    }

    pub fn sup_sqrt(&self) -> f64 {
        self.sqrt_es.iter().copied().fold(0.0, f64::max)
    }

    /// First time at which `√E_s` reaches twice its initial value.
    pub fn doubling_time(&self) -> Option<f64> {
        let start = *self.sqrt_es.first()?;
        if start <= 0.0 {
            return None;
        }
        self.times
            .iter()
            .zip(&self.sqrt_es)
            .find(|(_, &v)| v >= 2.0 * start)
            .map(|(&t, _)| t)
    }
}

/// The trace of `u` with coefficient field `v`; `ut` is the time derivative
/// of `u` on the same nodes.
pub fn energy_trace(
    u: &SpaceTimeField,
    ut: &SpaceTimeField,
    v: &SpaceTimeField,
    s: usize,
    m: usize,
    a_s: f64,
) -> Result<EnergyTrace> {
    u.check_compatible(ut)?;
    u.check_compatible(v)?;
    if s == 0 {
        return Err(Error::param("s", "must be at least 1"));
    }
    let nt = u.len_time();
    let mut trace = EnergyTrace {
        times: u.times().to_vec(),
        e1: Vec::with_capacity(nt),
        e2: Vec::with_capacity(nt),
        es: Vec::with_capacity(nt),
        sqrt_es: Vec::with_capacity(nt),
        a_s,
    };
    for j in 0..nt {
        let (un, utn, vn) = (u.node(j), ut.node(j), v.node(j));
        let mut e1 = Vec::with_capacity(s);
        let mut e2 = Vec::with_capacity(s);
        let mut total = 0.5 * un.inner(un)?;
        for l in 1..=s {
            let (a, b) = energy_components_at(un, utn, vn, l, m)?;
            total += a + b;
            e1.push(a);
            e2.push(b);
        }
        trace.e1.push(e1);
        trace.e2.push(e2);
        trace.es.push(total);
        trace.sqrt_es.push(total.sqrt());
    }
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallVerdict {
    /// Fitted rate, clamped at zero.
    pub lambda: f64,
    pub pass: bool,
    /// Smallest `bound(t) − √E_s(t)` over the nodes.
    pub margin: f64,
    /// Running maximum of the node rates.
    pub running_lambda: Vec<f64>,
}

/// Fits `Λ = max [d/dt √E_s]/(A_s + √E_s + δ)` over interior nodes and
/// checks `√E_s(t) ≤ (√E_s(0) + A_s) e^{1.05 Λ t} − A_s` at every node.
pub fn gronwall_check(trace: &EnergyTrace, a_s: f64) -> Result<GronwallVerdict> {
    let nt = trace.times.len();
    if nt < 3 || trace.sqrt_es.len() != nt {
        return Err(Error::TooFewNodes { needed: 3, got: nt });
    }
    let dt = (trace.times[nt - 1] - trace.times[0]) / (nt - 1) as f64;
    let mut deriv = vec![0.0; nt];
    d1(&trace.sqrt_es, dt, &mut deriv);
    let mut running = Vec::with_capacity(nt);
    let mut lambda: f64 = 0.0;
    for j in 0..nt {
        if j > 0 && j < nt - 1 {
            let rate = deriv[j] / (a_s + trace.sqrt_es[j] + RATE_EPS);
            lambda = lambda.max(rate);
        }
        running.push(lambda);
    }
    let t0 = trace.times[0];
    let start = trace.sqrt_es[0] + a_s;
    let mut margin = f64::INFINITY;
    for (t, v) in trace.times.iter().zip(&trace.sqrt_es) {
        let bound = start * (GRONWALL_SLACK * lambda * (t - t0)).exp() - a_s;
        margin = margin.min(bound - v);
    }
    let tol = 1e-12 * (start + trace.sqrt_es.iter().copied().fold(0.0, f64::max));
    Ok(GronwallVerdict {
        lambda,
        pass: margin >= -tol,
        margin,
        running_lambda: running,
    })
}

/// Columns `t, E1_1..E1_s, E2_1..E2_s, E_s, sqrt_E_s, lambda`.
pub fn write_trace_csv(
    trace: &EnergyTrace,
    verdict: &GronwallVerdict,
    mut w: impl Write,
) -> Result<()> {
    let s = trace.s();
    let mut header = vec!["t".to_string()];
    header.extend((1..=s).map(|l| format!("E1_{l}")));
    header.extend((1..=s).map(|l| format!("E2_{l}")));
    header.extend(["E_s", "sqrt_E_s", "lambda"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for j in 0..trace.times.len() {
        let mut row = vec![format!("{:e}", trace.times[j])];
        row.extend(trace.e1[j].iter().map(|v| format!("{v:e}")));
        row.extend(trace.e2[j].iter().map(|v| format!("{v:e}")));
        row.push(format!("{:e}", trace.es[j]));
        row.push(format!("{:e}", trace.sqrt_es[j]));
        row.push(format!("{:e}", verdict.running_lambda[j]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
