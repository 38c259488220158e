//! Picard iteration for the nonlinear evolution equation (`n = 1`, flat
//! torus base)
//!
//! ```text
//! R̃ = e^{−2u}R_g + 2e^{−2u}Δu − 2m e^{2mu}u_tt − (m²+m+2)e^{−2u}|∇u|²
//!     − m(3m+1)e^{2mu}u_t²,
//! ```
//!
//! written as `m u_tt − e^{−2(m+1)u}Δu = F(u, u)` with
//!
//! ```text
//! F(u,v) = ½[−e^{−2mv}R̃ + e^{−2(m+1)v}R_g − (m²+m+2)e^{−2(m+1)v}<∇v,∇u>
//!           − m(3m+1) v_t u_t].
//! ```
//!
//! Each step freezes `v = u_n` and solves the linear equation for
//! `u_{n+1}` with [`crate::galerkin`], after dividing by `m`. The drift
//! `e^{−2(m+1)v}∇v` equals `−∇(e^{−2(m+1)v})/(2(m+1))`, so it fits the
//! `<∇β, ∇u>` slot with `β = (m²+m+2)/(4m(m+1)) e^{−2(m+1)v}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::curvature::{scalar_from_jet, CurvatureJet};
use crate::energy::{energy_trace, gronwall_check, total_energy_at, EnergyTrace, GronwallVerdict};
use crate::error::{Error, Result};
use crate::galerkin::{solve_fixed, steady, GalerkinBasis, LinearCoefficients, LinearSolution};
use crate::grid::{GridField, SpaceTimeField, TorusGrid};
use crate::random::{band_limited, rng};
use crate::spectral::{grad_dot, gradient, laplacian, resample};
use crate::time::time_derivative;

/// Contraction ratio treated as a stall by the adaptive window.
pub const STALL_RATIO: f64 = 0.95;
/// Iteration gap beyond which the iteration is declared divergent.
pub const DIVERGENCE_GAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Local,
    SmallData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub m: usize,
    /// Requested smoothness; `s` defaults to `⌊m/2 + k + 1⌋`.
    pub k: usize,
    pub s: usize,
    /// `None` selects `2√2(1 + √E_s(0)) + 1`.
    pub d_bound: Option<f64>,
    pub t0: f64,
    pub min_t0: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub adaptive: bool,
    pub kappa: usize,
    pub dt: f64,
    /// Start from a random band-limited field instead of `u₁ = 0`.
    pub seed: Option<u64>,
    pub seed_amplitude: f64,
    /// Solve again at `Δt/2` to measure the residual floor.
    pub residual_check: bool,
    /// Overrides `10 ×` the measured floor.
    pub residual_threshold: Option<f64>,
}

pub fn default_s(m: usize, k: usize) -> usize {
    m / 2 + k + 1
}

impl PicardConfig {
    pub fn new(m: usize, t0: f64) -> Self {
        let k = 2;
        Self {
            m,
            k,
            s: default_s(m, k),
            d_bound: None,
            t0,
            min_t0: t0 / 64.0,
            max_iters: 40,
            tol: 1e-8,
            adaptive: false,
            kappa: 8,
            dt: 1e-3,
            seed: None,
            seed_amplitude: 1e-2,
            residual_check: true,
            residual_threshold: None,
        }
    }

    pub fn validate(&self, grid: &TorusGrid) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m", "must be positive"));
        }
        if grid.dim() != self.m {
            return Err(Error::param(
                "m",
                format!("{} does not match the {}-dimensional grid", self.m, grid.dim()),
            ));
        }
        if self.s < self.m / 2 + 2 {
            return Err(Error::param(
                "s",
                format!("{} is below ⌊m/2⌋ + 2 = {}", self.s, self.m / 2 + 2),
            ));
        }
        if self.s + 1 > grid.max_order() {
            return Err(Error::param("s", "H^{s+1} is not resolved by the grid"));
        }
        if let Some(d) = self.d_bound {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::param("D", "must be positive"));
            }
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::param("t0", "must be positive"));
        }
        if !(self.min_t0 > 0.0 && self.min_t0 <= self.t0) {
            return Err(Error::param("min_t0", "must lie in (0, t0]"));
        }
        if self.max_iters < 2 {
            return Err(Error::param("max_iters", "must be at least 2"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if !(self.dt > 0.0) || self.dt > self.t0 / 4.0 {
            return Err(Error::param("dt", "must be positive and at most t0/4"));
        }
        if 2 * self.kappa >= grid.points_per_axis() || self.kappa == 0 {
            return Err(Error::param(
                "kappa",
                format!("must lie in 1..{}", grid.points_per_axis() / 2),
            ));
        }
        if self.seed.is_some() && !(self.seed_amplitude > 0.0) {
            return Err(Error::param("seed_amplitude", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowOutcome {
    #[default]
    Running,
    Converged,
    Stalled,
    BoundViolated,
    Diverged,
    MaxIters,
}

/// Iteration history on one time window `[0, t₀]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub t0: f64,
    /// `d_n = sup_t ‖u_{n+1} − u_n‖_{H^s} + sup_t ‖(u_{n+1} − u_n)_t‖_{H^{s−1}}`.
    pub gaps: Vec<f64>,
    /// `d_{n+1}/d_n`.
    pub ratios: Vec<f64>,
    /// `sup_t √E_s` of each new iterate, with the previous one frozen.
    pub energy_sup: Vec<f64>,
    /// `sup_t (‖u_{n+1}‖_{H^{s+1}} + ‖(u_{n+1})_t‖_{H^s})`.
    pub bound_norms: Vec<f64>,
    pub outcome: WindowOutcome,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub windows: Vec<WindowReport>,
    pub d_bound: f64,
    pub e_s0: f64,
    pub s: usize,
    pub k: usize,
    /// `k ≥ 2`, the smoothness needed by the local existence argument.
    pub k_local_ok: bool,
    /// `k > m/2 + 3`, the smoothness assumed by the main local theorem.
    pub k_theorem_ok: bool,
    /// Every iterate following one within `D` also stayed within `D`.
    pub bound_propagation: bool,
    /// `R²` of a least-squares fit of `ln d_n` against `n` on the final window.
    pub geometric_r2: Option<f64>,
    pub converged: bool,
}

impl IterationReport {
    pub fn t0_history(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.t0).collect()
    }

    pub fn last(&self) -> Option<&WindowReport> {
        self.windows.last()
    }

    pub fn gaps(&self) -> &[f64] {
        self.last().map_or(&[], |w| &w.gaps)
    }

    pub fn ratios(&self) -> &[f64] {
        self.last().map_or(&[], |w| &w.ratios)
    }

    pub fn iterations(&self) -> usize {
        self.gaps().len()
    }
}

/// `R²` of the least-squares line through `(n, ln d_n)` over nonzero gaps.
pub fn geometric_fit_r2(gaps: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0)
        .map(|(i, &d)| (i as f64, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    if pts.len() == 2 {
        return Some(1.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if syy == 0.0 {
        return Some(1.0);
    }
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    Some(1.0 - ss_res / syy)
}

/// Pointwise `F(u, v)` from samples of `u, u_t, v, v_t` at one instant.
pub fn rhs_f_at(
    u: &GridField,
    ut: &GridField,
    v: &GridField,
    vt: &GridField,
    rtilde: &GridField,
    r_g: &GridField,
    m: usize,
) -> Result<GridField> {
    let grid = *u.grid();
    for f in [ut, v, vt, rtilde, r_g] {
        grid.check_same(f.grid())?;
    }
    let mf = m as f64;
    let drift = grad_dot(v, u)?;
    let mut out = vec![0.0; grid.len()];
    for (p, o) in out.iter_mut().enumerate() {
        let vp = v.samples()[p];
        let e1 = (-2.0 * (mf + 1.0) * vp).exp();
        *o = 0.5
            * (-(-2.0 * mf * vp).exp() * rtilde.samples()[p] + e1 * r_g.samples()[p]
                - (mf * mf + mf + 2.0) * e1 * drift.samples()[p]
                - mf * (3.0 * mf + 1.0) * vt.samples()[p] * ut.samples()[p]);
    }
    GridField::new(grid, out)
}

/// `F(u, v)` on every node, with time derivatives from the stencils.
pub fn rhs_f(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    rtilde: &SpaceTimeField,
    r_g: &GridField,
    m: usize,
) -> Result<SpaceTimeField> {
    u.check_compatible(v)?;
    u.check_compatible(rtilde)?;
    let ut = time_derivative(u, 1)?;
    let vt = time_derivative(v, 1)?;
    let nodes = (0..u.len_time())
        .map(|j| rhs_f_at(u.node(j), ut.node(j), v.node(j), vt.node(j), rtilde.node(j), r_g, m))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(u.times().to_vec(), nodes)
}

/// Coefficients of the linear step frozen at `v = u_n` with velocity `v_t`.
///
/// The drift in `F` only involves `e^{−2(m+1)v}∇v`, which equals
/// `−∇(e^{−2(m+1)v})/(2(m+1))`, so it fits the `⟨∇β, ∇u⟩` slot of the linear
/// operator with `β` a multiple of `e^{−2(m+1)v}`. [`linearization_defect`]
/// checks the mapping before every solve.
pub fn linearize_with_velocity(
    v: &SpaceTimeField,
    vt: &SpaceTimeField,
    rtilde: &SpaceTimeField,
    r_g: &GridField,
    m: usize,
) -> Result<LinearCoefficients> {
    v.check_compatible(vt)?;
    v.check_compatible(rtilde)?;
    v.grid().check_same(r_g.grid())?;
    if m == 0 {
        return Err(Error::param("m", "must be positive"));
    }
    let mf = m as f64;
    let c = 2.0 * (mf + 1.0);
    let beta_c = (mf * mf + mf + 2.0) / (4.0 * mf * (mf + 1.0));
    let a = vt.map_nodes(|g| g.scale((3.0 * mf + 1.0) / 2.0))?;
    let alpha = v.map_nodes(|g| g.map(|x| (-c * x).exp() / mf))?;
    let beta = v.map_nodes(|g| g.map(|x| beta_c * (-c * x).exp()))?;
    let gamma = SpaceTimeField::zeros(*v.grid(), vec![v.t_start(), v.t_end()])?;
    let f = v.zip_nodes(rtilde, |vn, rn| {
        let mut out = vec![0.0; vn.grid().len()];
        for (p, o) in out.iter_mut().enumerate() {
            let x = vn.samples()[p];
            *o = (-(-2.0 * mf * x).exp() * rn.samples()[p] + (-c * x).exp() * r_g.samples()[p])
                / (2.0 * mf);
        }
        GridField::new(*vn.grid(), out)
    })?;
    LinearCoefficients::with_auto_bound(a, alpha, beta, gamma, f)
}

/// [`linearize_with_velocity`] with `(u_n)_t` from the time stencils.
pub fn linearize_step(
    un: &SpaceTimeField,
    rtilde: &SpaceTimeField,
    r_g: &GridField,
    m: usize,
) -> Result<LinearCoefficients> {
    let vt = time_derivative(un, 1)?;
    linearize_with_velocity(un, &vt, rtilde, r_g, m)
}

/// `u_tt + a u_t − (αΔu + <∇β,∇u> + γu) − f` at node `node` of the
/// coefficient fields.
pub fn apply_linear_operator(
    coeffs: &LinearCoefficients,
    node: usize,
    u: &GridField,
    ut: &GridField,
    utt: &GridField,
) -> Result<GridField> {
    let a = coeffs.a.node(node);
    let alpha = coeffs.alpha.node(node);
    let beta = coeffs.beta.node(node);
    let gamma = coeffs.gamma.interpolate(coeffs.alpha.times()[node]);
    let f = coeffs.f.node(node);
    let lap = laplacian(u);
    let drift = grad_dot(beta, u)?;
    let mut out = vec![0.0; u.grid().len()];
    for (p, o) in out.iter_mut().enumerate() {
        *o = utt.samples()[p] + a.samples()[p] * ut.samples()[p]
            - (alpha.samples()[p] * lap.samples()[p]
                + drift.samples()[p]
                + gamma.samples()[p] * u.samples()[p])
            - f.samples()[p];
    }
    GridField::new(*u.grid(), out)
}

/// Substitutes `u_n = 0.1 sin(x₁) cos t` and `u = 0.2 cos(x₁) + 0.1 sin(2x₁) t²`
/// into both forms of the linear step and returns the largest pointwise
/// mismatch of `m·(operator)` against `m u_tt − e^{−2(m+1)u_n}Δu − F(u, u_n)`.
pub fn linearization_defect(m: usize) -> Result<f64> {
    let grid = TorusGrid::new(m, 32)?;
    let times: Vec<f64> = (0..5).map(|j| 0.2 * j as f64).collect();
    let v = SpaceTimeField::from_fn(grid, times.clone(), |x, t| 0.1 * x[0].sin() * t.cos())?;
    let vt = SpaceTimeField::from_fn(grid, times.clone(), |x, t| -0.1 * x[0].sin() * t.sin())?;
    let rtilde = SpaceTimeField::from_fn(grid, times.clone(), |x, t| 0.5 * (x[0] + t).cos())?;
    let r_g = GridField::from_fn(grid, |x| 0.1 * x[0].cos())?;
    let coeffs = linearize_with_velocity(&v, &vt, &rtilde, &r_g, m)?;
    let mf = m as f64;
    let mut worst: f64 = 0.0;
    for (j, &t) in times.iter().enumerate() {
        let u = GridField::from_fn(grid, |x| 0.2 * x[0].cos() + 0.1 * (2.0 * x[0]).sin() * t * t)?;
        let ut = GridField::from_fn(grid, |x| 0.2 * (2.0 * x[0]).sin() * t)?;
        let utt = GridField::from_fn(grid, |x| 0.2 * (2.0 * x[0]).sin())?;
        let op = apply_linear_operator(&coeffs, j, &u, &ut, &utt)?;
        let f = rhs_f_at(&u, &ut, v.node(j), vt.node(j), rtilde.node(j), &r_g, m)?;
        let lap = laplacian(&u);
        for p in 0..grid.len() {
            let e = (-2.0 * (mf + 1.0) * v.node(j).samples()[p]).exp();
            let direct = mf * utt.samples()[p] - e * lap.samples()[p] - f.samples()[p];
            worst = worst.max((mf * op.samples()[p] - direct).abs());
        }
    }
    Ok(worst)
}

/// Right side of the curvature equation minus `R̃` at one instant, from
/// samples of `u`, `u_t`, `u_tt`.
pub fn residual_at(
    u: &GridField,
    ut: &GridField,
    utt: &GridField,
    rtilde: &GridField,
    r_g: &GridField,
    m: usize,
) -> Result<GridField> {
    let grid = *u.grid();
    for f in [ut, utt, rtilde, r_g] {
        grid.check_same(f.grid())?;
    }
    let lap = laplacian(u);
    let grad = gradient(u);
    let mut out = vec![0.0; grid.len()];
    for (p, o) in out.iter_mut().enumerate() {
        let jet = CurvatureJet {
            u: u.samples()[p],
            lap_g: lap.samples()[p],
            grad_g_sq: grad.iter().map(|g| g.samples()[p].powi(2)).sum(),
            lap_h: utt.samples()[p],
            grad_h_sq: ut.samples()[p].powi(2),
            r_g: r_g.samples()[p],
            r_h: 0.0,
        };
        *o = scalar_from_jet(m, 1, &jet) - rtilde.samples()[p];
    }
    GridField::new(grid, out)
}

/// Residual of the curvature equation on the interior time nodes, with
/// central differences in time and spectral derivatives in space.
pub fn residual(
    u: &SpaceTimeField,
    rtilde: &SpaceTimeField,
    r_g: &GridField,
    m: usize,
) -> Result<SpaceTimeField> {
    u.check_compatible(rtilde)?;
    let nt = u.len_time();
    if nt < 4 {
        return Err(Error::TooFewNodes { needed: 4, got: nt });
    }
    let ut = time_derivative(u, 1)?;
    let utt = time_derivative(u, 2)?;
    let nodes = (1..nt - 1)
        .map(|j| residual_at(u.node(j), ut.node(j), utt.node(j), rtilde.node(j), r_g, m))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(u.times()[1..nt - 1].to_vec(), nodes)
}

/// An iterate in grid and mode coordinates.
#[derive(Clone, Debug)]
struct Iterate {
    u: SpaceTimeField,
    ut: SpaceTimeField,
    eta: Vec<DVector<f64>>,
    eta_t: Vec<DVector<f64>>,
}

impl Iterate {
    fn from_solution(sol: &LinearSolution) -> Self {
        Self {
            u: sol.u.clone(),
            ut: sol.ut.clone(),
            eta: sol.trajectory.eta.clone(),
            eta_t: sol.trajectory.eta_t.clone(),
        }
    }

    fn seed(grid: TorusGrid, times: &[f64], basis: &GalerkinBasis, cfg: &PicardConfig) -> Result<Self> {
        let field = match cfg.seed {
            None => GridField::zeros(grid),
            Some(seed) => {
                let band = cfg.kappa.min(3);
                band_limited(grid, band, 2.0, cfg.seed_amplitude, &mut rng(seed))?
            }
        };
        let eta0 = basis.project(&field)?;
        let nt = times.len();
        Ok(Self {
            u: SpaceTimeField::new(times.to_vec(), vec![field; nt])?,
            ut: SpaceTimeField::zeros(grid, times.to_vec())?,
            eta: vec![eta0; nt],
            eta_t: vec![DVector::zeros(basis.len()); nt],
        })
    }

    fn bound_norm(&self, basis: &GalerkinBasis, s: usize) -> f64 {
        self.eta
            .iter()
            .zip(&self.eta_t)
            .map(|(e, et)| basis.sobolev_norm_sq(e, s + 1).sqrt() + basis.sobolev_norm_sq(et, s).sqrt())
            .fold(0.0, f64::max)
    }

    fn gap(&self, other: &Iterate, basis: &GalerkinBasis, s: usize) -> f64 {
        let sup = |a: &[DVector<f64>], b: &[DVector<f64>], order: usize| {
            a.iter()
                .zip(b)
                .map(|(x, y)| basis.sobolev_norm_sq(&(x - y), order).sqrt())
                .fold(0.0, f64::max)
        };
        sup(&self.eta, &other.eta, s) + sup(&self.eta_t, &other.eta_t, s - 1)
    }
}

/// `2√2(1 + √E_s(0)) + 1` with `E_s(0)` from `u = φ, u_t = ψ, v = φ`.
pub fn default_d_bound(phi: &GridField, psi: &GridField, s: usize, m: usize) -> Result<(f64, f64)> {
    let e0 = total_energy_at(phi, psi, phi, s, m)?;
    Ok((2.0 * 2f64.sqrt() * (1.0 + e0.sqrt()) + 1.0, e0))
}

fn uniform_nodes(t0: f64, dt: f64) -> Vec<f64> {
    let steps = ((t0 / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t0 / steps as f64;
    (0..=steps).map(|j| j as f64 * h).collect()
}

fn on_nodes(field: &SpaceTimeField, times: &[f64]) -> Result<SpaceTimeField> {
    let t_end = *times.last().unwrap();
    if field.t_start() > 1e-12 || field.t_end() < t_end - 1e-9 * t_end.max(1.0) {
        return Err(Error::param(
            "rtilde",
            format!(
                "covers [{}, {}], not [0, {t_end}]",
                field.t_start(),
                field.t_end()
            ),
        ));
    }
    SpaceTimeField::new(
        times.to_vec(),
        times.iter().map(|&t| field.interpolate(t)).collect(),
    )
}

struct WindowRun {
    report: WindowReport,
    last: Option<(Iterate, Iterate, LinearSolution)>,
}

#[allow(clippy::too_many_arguments)]
fn run_window(
    rtilde: &SpaceTimeField,
    phi: &GridField,
    psi: &GridField,
    r_g: &GridField,
    cfg: &PicardConfig,
    t0: f64,
    dt: f64,
    d_bound: f64,
    propagation: &mut bool,
) -> Result<WindowRun> {
    let grid = *phi.grid();
    let times = uniform_nodes(t0, dt);
    let rt = on_nodes(rtilde, &times)?;
    let basis = GalerkinBasis::new(grid, cfg.kappa)?;
    let mut prev = Iterate::seed(grid, &times, &basis, cfg)?;
    let mut prev_within = prev.bound_norm(&basis, cfg.s) <= d_bound;
    let mut report = WindowReport {
        t0,
        ..Default::default()
    };
    let mut stalls = 0;
    let mut last = None;
    for _ in 0..cfg.max_iters {
        let coeffs = linearize_with_velocity(&prev.u, &prev.ut, &rt, r_g, cfg.m)?;
        let sol = match solve_fixed(&coeffs, phi, psi, cfg.kappa, t0, dt) {
            Ok(sol) => sol,
            Err(Error::NonFinite { .. }) | Err(Error::StabilityBound { .. }) => {
                report.outcome = WindowOutcome::Diverged;
                return Ok(WindowRun { report, last });
            }
            Err(e) => return Err(e),
        };
        let next = Iterate::from_solution(&sol);
        let d = next.gap(&prev, &basis, cfg.s);
        let bound = next.bound_norm(&basis, cfg.s);
        let energy = energy_trace(&next.u, &next.ut, &prev.u, cfg.s, cfg.m, 0.0)?;
        if let Some(&p) = report.gaps.last() {
            report.ratios.push(if p > 0.0 { d / p } else { 0.0 });
        }
        report.gaps.push(d);
        report.bound_norms.push(bound);
        report.energy_sup.push(energy.sup_sqrt());
        let within = bound <= d_bound;
        if prev_within && !within {
            *propagation = false;
        }
        prev_within = within;
        last = Some((next.clone(), prev, sol));

        if !d.is_finite() || d > DIVERGENCE_GAP {
            report.outcome = WindowOutcome::Diverged;
            return Ok(WindowRun { report, last });
        }
        if d < cfg.tol {
            report.outcome = WindowOutcome::Converged;
            return Ok(WindowRun { report, last });
        }
        if !within && cfg.adaptive {
            report.outcome = WindowOutcome::BoundViolated;
            return Ok(WindowRun { report, last });
        }
        match report.ratios.last() {
            Some(&r) if r >= STALL_RATIO => stalls += 1,
            _ => stalls = 0,
        }
        if stalls >= 2 && cfg.adaptive {
            report.outcome = WindowOutcome::Stalled;
            return Ok(WindowRun { report, last });
        }
        prev = next;
    }
    report.outcome = WindowOutcome::MaxIters;
    Ok(WindowRun { report, last })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualCheck {
    /// Largest residual at `Δt`.
    pub max: f64,
    /// Largest residual of the `Δt/2` solve.
    pub max_refined: f64,
    /// `(4/3)|r(Δt) − r(Δt/2)|`: the second-order part of `r(Δt)`.
    pub floor: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct NonlinearSolution {
    pub u: SpaceTimeField,
    pub ut: SpaceTimeField,
    /// `R̃` on the solution nodes.
    pub rtilde: SpaceTimeField,
    pub residual: SpaceTimeField,
    pub residual_max: f64,
    pub residual_check: Option<ResidualCheck>,
    pub report: IterationReport,
    pub energy: EnergyTrace,
    pub gronwall: GronwallVerdict,
    pub t0: f64,
    pub dt: f64,
}

impl NonlinearSolution {
    /// `sup_t (‖u‖_{H^s} + ‖u_t‖_{H^{s−1}})`.
    pub fn sup_norm(&self, s: usize) -> Result<f64> {
        let mut best: f64 = 0.0;
        for (u, ut) in self.u.nodes().iter().zip(self.ut.nodes()) {
            best = best.max(crate::norms::sobolev_norm(u, s)? + crate::norms::sobolev_norm(ut, s - 1)?);
        }
        Ok(best)
    }
}

fn check_inputs(
    rtilde: &SpaceTimeField,
    phi: &GridField,
    psi: &GridField,
    r_g: &GridField,
    cfg: &PicardConfig,
) -> Result<()> {
    let grid = phi.grid();
    for g in [psi.grid(), r_g.grid(), rtilde.grid()] {
        grid.check_same(g)?;
    }
    cfg.validate(grid)
}

fn iterate_windows(
    rtilde: &SpaceTimeField,
    phi: &GridField,
    psi: &GridField,
    r_g: &GridField,
    cfg: &PicardConfig,
    dt: f64,
    report: &mut IterationReport,
) -> Result<(f64, Iterate, Iterate)> {
    let mut t0 = cfg.t0;
    let mut propagation = true;
    loop {
        let run = run_window(rtilde, phi, psi, r_g, cfg, t0, dt, report.d_bound, &mut propagation)?;
        let outcome = run.report.outcome;
        report.windows.push(run.report);
        report.bound_propagation = propagation;
        if outcome == WindowOutcome::Converged {
            let (next, prev, _) = run.last.expect("a converged window has iterates");
            report.converged = true;
            report.geometric_r2 = geometric_fit_r2(report.gaps());
            return Ok((t0, next, prev));
        }
        report.geometric_r2 = geometric_fit_r2(report.gaps());
        let half = t0 / 2.0;
        if !cfg.adaptive || half < cfg.min_t0 || half < 4.0 * dt {
            return Err(Error::PicardFailure {
                reason: format!("{outcome:?} on [0, {t0}]"),
                report: Box::new(report.clone()),
            });
        }
        t0 = half;
    }
}

/// Solves on `[0, t₀]` from data `(φ, ψ)`. With `adaptive` set the window
/// is halved whenever the contraction stalls, the iterates leave the
/// `D`-ball, or `max_iters` is reached.
pub fn picard_solve(
    rtilde: &SpaceTimeField,
    phi: &GridField,
    psi: &GridField,
    r_g: &GridField,
    cfg: &PicardConfig,
) -> Result<NonlinearSolution> {
    check_inputs(rtilde, phi, psi, r_g, cfg)?;
    let defect = linearization_defect(cfg.m)?;
    if defect > 1e-10 {
        return Err(Error::PicardFailure {
            reason: format!("linear step does not reproduce the equation ({defect:e})"),
            report: Box::default(),
        });
    }
    let (d_auto, e_s0) = default_d_bound(phi, psi, cfg.s, cfg.m)?;
    let mut report = IterationReport {
        d_bound: cfg.d_bound.unwrap_or(d_auto),
        e_s0,
        s: cfg.s,
        k: cfg.k,
        k_local_ok: cfg.k >= 2,
        k_theorem_ok: cfg.k as f64 > cfg.m as f64 / 2.0 + 3.0,
        bound_propagation: true,
        ..Default::default()
    };
    let (t0, next, _) = iterate_windows(rtilde, phi, psi, r_g, cfg, cfg.dt, &mut report)?;
    finish(rtilde, phi, psi, r_g, cfg, report, t0, next)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    rtilde: &SpaceTimeField,
    phi: &GridField,
    psi: &GridField,
    r_g: &GridField,
    cfg: &PicardConfig,
    report: IterationReport,
    t0: f64,
    sol: Iterate,
) -> Result<NonlinearSolution> {
    let rt = on_nodes(rtilde, sol.u.times())?;
    let res = residual(&sol.u, &rt, r_g, cfg.m)?;
    let residual_max = res.max_abs();
    let s = cfg.s;
    let a_s = crate::energy::data_quantity_as(&rt, r_g, s)?;
    let energy = energy_trace(&sol.u, &sol.ut, &sol.u, s, cfg.m, a_s)?;
    let gronwall = gronwall_check(&energy, a_s)?;
    let dt = sol.u.uniform_step().unwrap_or(cfg.dt);
    let residual_check = if cfg.residual_check {
        let mut fine_cfg = cfg.clone();
        fine_cfg.t0 = t0;
        fine_cfg.adaptive = false;
        let mut scratch = report.clone();
        scratch.windows.clear();
        let (_, fine, _) = iterate_windows(rtilde, phi, psi, r_g, &fine_cfg, dt / 2.0, &mut scratch)?;
        let rt_fine = on_nodes(rtilde, fine.u.times())?;
        let max_refined = residual(&fine.u, &rt_fine, r_g, cfg.m)?.max_abs();
        let floor = (residual_max - max_refined).abs() * 4.0 / 3.0;
        let threshold = cfg.residual_threshold.unwrap_or(10.0 * floor);
        Some(ResidualCheck {
            max: residual_max,
            max_refined,
            floor,
            threshold,
            pass: residual_max <= threshold,
        })
    } else {
        None
    };
    Ok(NonlinearSolution {
        u: sol.u,
        ut: sol.ut,
        rtilde: rt,
        residual: res,
        residual_max,
        residual_check,
        report,
        energy,
        gronwall,
        t0,
        dt,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallDataReport {
    /// `sup_t (‖u‖_{H^s} + ‖u_t‖_{H^{s−1}})`.
    pub sup_norm: f64,
    pub d_bound: f64,
    pub within_d: bool,
    pub sup_sqrt_energy: f64,
    /// `sup √E_s ≤ D/(2√2)`.
    pub energy_within: bool,
}

/// Zero data, `R_g = 0`, the whole interval `[0, T]` with no windowing.
pub fn small_data_solve(
    rtilde: &SpaceTimeField,
    t_end: f64,
    cfg: &PicardConfig,
) -> Result<(NonlinearSolution, SmallDataReport)> {
    let grid = *rtilde.grid();
    let zero = GridField::zeros(grid);
    let mut cfg = cfg.clone();
    cfg.t0 = t_end;
    cfg.min_t0 = t_end;
    cfg.adaptive = false;
    let sol = picard_solve(rtilde, &zero, &zero, &zero, &cfg)?;
    let d = sol.report.d_bound;
    let sup_norm = sol.sup_norm(cfg.s)?;
    let sup_sqrt_energy = sol.energy.sup_sqrt();
    let rep = SmallDataReport {
        sup_norm,
        d_bound: d,
        within_d: sup_norm <= d,
        sup_sqrt_energy,
        energy_within: sup_sqrt_energy <= d / (2.0 * 2f64.sqrt()),
    };
    Ok((sol, rep))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub converged: Vec<f64>,
    pub failed: Vec<f64>,
    /// Largest amplitude observed to converge.
    pub epsilon: f64,
    /// Smallest amplitude observed to fail.
    pub failing: Option<f64>,
    /// Every converged amplitude lies below every failed one.
    pub monotone: bool,
}

fn small_data_ok(rtilde: &SpaceTimeField, t_end: f64, cfg: &PicardConfig) -> Result<bool> {
    match small_data_solve(rtilde, t_end, cfg) {
        Ok((_, rep)) => Ok(rep.within_d),
        Err(Error::PicardFailure { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Brackets the largest convergent amplitude of `amplitude · shape`:
/// grows `hi` by `4×` from `lo` until a run fails (up to `cap`), then
/// bisects geometrically `steps` times.
pub fn small_data_threshold(
    shape: &SpaceTimeField,
    t_end: f64,
    cfg: &PicardConfig,
    lo: f64,
    cap: f64,
    steps: usize,
) -> Result<ThresholdReport> {
    let mut cfg = cfg.clone();
    cfg.residual_check = false;
    let scaled = |a: f64| shape.map_nodes(|g| g.scale(a));
    let mut rep = ThresholdReport {
        converged: Vec::new(),
        failed: Vec::new(),
        epsilon: 0.0,
        failing: None,
        monotone: true,
    };
    let record = |a: f64, ok: bool, rep: &mut ThresholdReport| {
        if ok {
            rep.converged.push(a);
        } else {
            rep.failed.push(a);
        }
    };
    let ok = small_data_ok(&scaled(lo)?, t_end, &cfg)?;
    record(lo, ok, &mut rep);
    if !ok {
        rep.failing = Some(lo);
        return Ok(rep);
    }
    let (mut good, mut bad) = (lo, None);
    let mut a = lo;
    while a < cap {
        a = (a * 4.0).min(cap);
        let ok = small_data_ok(&scaled(a)?, t_end, &cfg)?;
        record(a, ok, &mut rep);
        if ok {
            good = a;
        } else {
            bad = Some(a);
            break;
        }
    }
    if let Some(mut b) = bad {
        for _ in 0..steps {
            let mid = (good * b).sqrt();
            let ok = small_data_ok(&scaled(mid)?, t_end, &cfg)?;
            record(mid, ok, &mut rep);
            if ok {
                good = mid;
            } else {
                b = mid;
            }
        }
        rep.failing = Some(b);
    }
    rep.epsilon = good;
    let max_ok = rep.converged.iter().copied().fold(0.0, f64::max);
    let min_bad = rep.failed.iter().copied().fold(f64::INFINITY, f64::min);
    rep.monotone = max_ok < min_bad;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    pub kappa: usize,
    pub dt: f64,
    /// `(pair label, max |u_a − u_b|)` over common nodes.
    pub gaps: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub levels: Vec<ProbeLevel>,
    pub max_gap: f64,
    /// Each pair gap at the finer level is no larger than at the coarser
    /// one, or lies below `noise_floor`.
    pub shrinking: bool,
    pub noise_floor: f64,
    pub diverged: Vec<String>,
}

/// Upsamples both fields to the finer grid and compares them on the
/// time nodes of the coarser one.
pub fn c0_gap(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    let n = a.grid().points_per_axis().max(b.grid().points_per_axis());
    let (coarse, fine) = if a.len_time() <= b.len_time() { (a, b) } else { (b, a) };
    let mut worst: f64 = 0.0;
    for (j, &t) in coarse.times().iter().enumerate() {
        let x = resample(coarse.node(j), n)?;
        let y = resample(&fine.interpolate(t), n)?;
        worst = worst.max(x.sub(&y)?.max_abs());
    }
    Ok(worst)
}

fn solve_variant(
    rtilde: &SpaceTimeField,
    phi: &GridField,
    psi: &GridField,
    r_g: &GridField,
    cfg: &PicardConfig,
) -> Result<SpaceTimeField> {
    let n = phi.grid().points_per_axis();
    let mut need = n;
    while 2 * cfg.kappa >= need {
        need *= 2;
    }
    let sol = if need == n {
        picard_solve(rtilde, phi, psi, r_g, cfg)?
    } else {
        let rt = rtilde.map_nodes(|g| resample(g, need))?;
        picard_solve(&rt, &resample(phi, need)?, &resample(psi, need)?, &resample(r_g, need)?, cfg)?
    };
    Ok(sol.u)
}

/// Re-solves with doubled cutoff, halved step and a random Picard seed at
/// two base resolutions (`Δt` and `Δt/2`) and compares all variants.
pub fn uniqueness_probe(
    rtilde: &SpaceTimeField,
    phi: &GridField,
    psi: &GridField,
    r_g: &GridField,
    cfg: &PicardConfig,
    seed: u64,
) -> Result<UniquenessReport> {
    let mut base = cfg.clone();
    base.residual_check = false;
    base.seed = None;
    let noise_floor = 10.0 * cfg.tol;
    let mut report = UniquenessReport {
        levels: Vec::new(),
        max_gap: 0.0,
        shrinking: true,
        noise_floor,
        diverged: Vec::new(),
    };
    for level in 0..2 {
        let mut b = base.clone();
        b.dt = base.dt / 2f64.powi(level);
        let mut wide = b.clone();
        wide.kappa *= 2;
        let mut fine = b.clone();
        fine.dt /= 2.0;
        let mut seeded = b.clone();
        seeded.seed = Some(seed);
        let mut sols = Vec::new();
        for (label, c) in [("base", &b), ("kappa2", &wide), ("dt2", &fine), ("seed", &seeded)] {
            match solve_variant(rtilde, phi, psi, r_g, c) {
                Ok(u) => sols.push((label, u)),
                Err(Error::PicardFailure { .. }) => report.diverged.push(format!("{label}@{level}")),
                Err(e) => return Err(e),
            }
        }
        let mut gaps = Vec::new();
        for i in 0..sols.len() {
            for j in i + 1..sols.len() {
                let g = c0_gap(&sols[i].1, &sols[j].1)?;
                report.max_gap = report.max_gap.max(g);
                gaps.push((format!("{}-{}", sols[i].0, sols[j].0), g));
            }
        }
        report.levels.push(ProbeLevel {
            kappa: b.kappa,
            dt: b.dt,
            gaps,
        });
    }
    if let [coarse, fine] = &report.levels[..] {
        for (label, g) in &fine.gaps {
            if let Some((_, g0)) = coarse.gaps.iter().find(|(l, _)| l == label) {
                if *g > *g0 && *g > noise_floor {
                    report.shrinking = false;
                }
            }
        }
    }
    if !report.diverged.is_empty() {
        report.shrinking = false;
    }
    Ok(report)
}

/// `R̃` held constant in time.
pub fn steady_rtilde(rtilde: &GridField, t_end: f64) -> Result<SpaceTimeField> {
    steady(rtilde, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    #[test]
    fn default_s_and_validation() {
        assert_eq!(default_s(1, 2), 3);
        assert_eq!(default_s(3, 2), 4);
        let g = g1(32);
        let mut cfg = PicardConfig::new(1, 0.5);
        assert!(cfg.validate(&g).is_ok());
        cfg.s = 1;
        assert!(matches!(cfg.validate(&g), Err(Error::InvalidParameter { name: "s", .. })));
        let mut cfg = PicardConfig::new(1, 0.5);
        cfg.kappa = 16;
        assert!(matches!(cfg.validate(&g), Err(Error::InvalidParameter { name: "kappa", .. })));
        let mut cfg = PicardConfig::new(2, 0.5);
        cfg.s = 3;
        assert!(matches!(cfg.validate(&g), Err(Error::InvalidParameter { name: "m", .. })));
    }

    #[test]
    fn f_vanishes_for_zero_inputs() {
        let g = g1(16);
        let z = GridField::zeros(g);
        assert_eq!(rhs_f_at(&z, &z, &z, &z, &z, &z, 1).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn f_with_zero_v_is_half_the_curvature_gap() {
        let g = g1(16);
        let z = GridField::zeros(g);
        let u = GridField::from_fn(g, |x| x[0].sin()).unwrap();
        let rt = GridField::from_fn(g, |x| 0.3 * x[0].cos()).unwrap();
        let rg = GridField::constant(g, 0.2).unwrap();
        let f = rhs_f_at(&u, &u, &z, &z, &rt, &rg, 2).unwrap();
        let expect = rg.sub(&rt).unwrap().scale(0.5).unwrap();
        assert!(f.sub(&expect).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn zero_iterate_coefficients() {
        let g = g1(16);
        let times = vec![0.0, 0.1, 0.2, 0.3];
        let z = SpaceTimeField::zeros(g, times.clone()).unwrap();
        let rt = SpaceTimeField::from_fn(g, times, |x, _| x[0].sin()).unwrap();
        let rg = GridField::constant(g, 0.4).unwrap();
        for m in [1usize, 2, 3] {
            let c = linearize_step(&z, &rt, &rg, m).unwrap();
            let mf = m as f64;
            assert_eq!(c.a.max_abs(), 0.0);
            assert!((c.alpha.node(1).samples()[3] - 1.0 / mf).abs() < 1e-15);
            let beta = (mf * mf + mf + 2.0) / (4.0 * mf * (mf + 1.0));
            assert!((c.beta.node(2).samples()[5] - beta).abs() < 1e-15);
            let f = c.f.node(0).samples()[4];
            let x = g.coords(4)[0];
            assert!((f - (0.4 - x.sin()) / (2.0 * mf)).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_step_reproduces_the_equation() {
        for m in 1..=3 {
            assert!(linearization_defect(m).unwrap() < 1e-10);
        }
    }

    #[test]
    fn geometric_fit() {
        let gaps: Vec<f64> = (0..6).map(|i| 0.3f64.powi(i)).collect();
        assert!((geometric_fit_r2(&gaps).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(geometric_fit_r2(&[1.0]), None);
        assert!(geometric_fit_r2(&[1.0, 1e-3, 1.0, 1e-3]).unwrap() < 0.5);
    }

    #[test]
    fn zero_problem_converges_immediately() {
        let g = g1(16);
        let z = GridField::zeros(g);
        let rt = steady(&z, 0.5).unwrap();
        let mut cfg = PicardConfig::new(1, 0.5);
        cfg.kappa = 4;
        cfg.dt = 0.01;
        let sol = picard_solve(&rt, &z, &z, &z, &cfg).unwrap();
        assert_eq!(sol.u.max_abs(), 0.0);
        assert_eq!(sol.report.gaps(), &[0.0]);
        assert!(sol.report.converged);
        assert_eq!(sol.residual_max, 0.0);
        assert!(sol.residual_check.unwrap().pass);
        assert!(sol.gronwall.pass);
    }

    #[test]
    fn residual_of_an_exact_solution_is_tautologically_zero() {
        let g = g1(16);
        let times: Vec<f64> = (0..11).map(|j| j as f64 * 0.05).collect();
        let u = SpaceTimeField::from_fn(g, times.clone(), |x, t| 0.2 * x[0].sin() * t.sin()).unwrap();
        let ut = time_derivative(&u, 1).unwrap();
        let utt = time_derivative(&u, 2).unwrap();
        let z = GridField::zeros(g);
        for j in 0..times.len() {
            let rt = residual_at(u.node(j), ut.node(j), utt.node(j), &z, &z, 1).unwrap();
            let r = residual_at(u.node(j), ut.node(j), utt.node(j), &rt, &z, 1).unwrap();
            assert!(r.max_abs() < 1e-12);
        }
    }

    #[test]
    fn c0_gap_of_identical_fields_is_zero() {
        let g = g1(16);
        let a = SpaceTimeField::from_fn(g, vec![0.0, 0.5, 1.0], |x, t| t * x[0].cos()).unwrap();
        let times: Vec<f64> = (0..5).map(|j| j as f64 * 0.25).collect();
        let b = SpaceTimeField::from_fn(g, times, |x, t| t * x[0].cos()).unwrap();
        let b = b.map_nodes(|f| resample(f, 32)).unwrap();
        assert!(c0_gap(&a, &b).unwrap() < 1e-14);
    }

    #[test]
    fn rtilde_must_cover_the_window() {
        let g = g1(16);
        let z = GridField::zeros(g);
        let rt = steady(&z, 0.2).unwrap();
        let mut cfg = PicardConfig::new(1, 0.5);
        cfg.dt = 0.01;
        cfg.kappa = 4;
        assert!(matches!(
            picard_solve(&rt, &z, &z, &z, &cfg),
            Err(Error::InvalidParameter { name: "rtilde", .. })
        ));
    }
}
