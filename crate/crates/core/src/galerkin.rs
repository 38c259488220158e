//! Fourier-Galerkin solver for the linear hyperbolic equation
//!
//! ```text
//! u_tt + a u_t − (α Δu + <∇β, ∇u> + γ u) = f   on Tᵐ × [0, T̂],
//! u(·,0) = φ,  u_t(·,0) = ψ.
//! ```
//!
//! The solution is expanded in the real orthonormal Fourier modes with
//! `|k|_∞ ≤ κ`; the projected second-order ODE system is advanced with
//! classical RK4.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bracket, GridField, SpaceTimeField, TorusGrid};
use crate::spectral::{gradient, resample};
use crate::time::d1;

/// Stability constant in `Δt ≤ c/(√L κ)`.
pub const C_STAB: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeKind {
    Constant,
    Cos,
    Sin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub k: Vec<i64>,
    pub kind: ModeKind,
}

impl Mode {
    pub fn eigenvalue(&self) -> f64 {
        self.k.iter().map(|v| (v * v) as f64).sum()
    }
}

/// Real orthonormal Fourier modes with `|k|_∞ ≤ κ`, sampled on a grid.
///
/// Modes are ordered by `|k|²`, then lexicographically in `k`, with the
/// cosine before the sine. On `T¹` this is `1/√(2π), cos x/√π, sin x/√π,
/// cos 2x/√π, …`.
#[derive(Clone, Debug)]
pub struct GalerkinBasis {
    grid: TorusGrid,
    kappa: usize,
    modes: Vec<Mode>,
    eigenvalues: DVector<f64>,
    values: DMatrix<f64>,
    grads: Vec<DMatrix<f64>>,
}

fn upper_half(k: &[i64]) -> bool {
    k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

impl GalerkinBasis {
    pub fn new(grid: TorusGrid, kappa: usize) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::param("kappa", "cutoff must be positive"));
        }
        if 2 * kappa >= grid.points_per_axis() {
            return Err(Error::param(
                "kappa",
                format!(
                    "cutoff {kappa} needs more than {} points per axis",
                    2 * kappa
                ),
            ));
        }
        let m = grid.dim();
        let side = 2 * kappa + 1;
        let mut modes = Vec::new();
        for flat in 0..side.pow(m as u32) {
            let mut rest = flat;
            let mut k = vec![0i64; m];
            for a in (0..m).rev() {
                k[a] = (rest % side) as i64 - kappa as i64;
                rest /= side;
            }
            if k.iter().all(|&v| v == 0) {
                modes.push(Mode { k, kind: ModeKind::Constant });
            } else if upper_half(&k) {
                modes.push(Mode { k: k.clone(), kind: ModeKind::Cos });
                modes.push(Mode { k, kind: ModeKind::Sin });
            }
        }
        modes.sort_by(|a, b| {
            a.eigenvalue()
                .total_cmp(&b.eigenvalue())
                .then_with(|| a.k.cmp(&b.k))
                .then_with(|| (a.kind as u8).cmp(&(b.kind as u8)))
        });

        let npts = grid.len();
        let nm = modes.len();
        let vol = grid.volume();
        let mut values = DMatrix::zeros(npts, nm);
        let mut grads = vec![DMatrix::zeros(npts, nm); m];
        for p in 0..npts {
            let x = grid.coords(p);
            for (i, mode) in modes.iter().enumerate() {
                let phase: f64 = mode.k.iter().zip(&x).map(|(&k, &xa)| k as f64 * xa).sum();
                let (val, dval) = match mode.kind {
                    ModeKind::Constant => (1.0 / vol.sqrt(), 0.0),
                    ModeKind::Cos => {
                        let c = (2.0 / vol).sqrt();
                        (c * phase.cos(), -c * phase.sin())
                    }
                    ModeKind::Sin => {
                        let c = (2.0 / vol).sqrt();
                        (c * phase.sin(), c * phase.cos())
                    }
                };
                values[(p, i)] = val;
                for (a, g) in grads.iter_mut().enumerate() {
                    g[(p, i)] = mode.k[a] as f64 * dval;
                }
            }
        }
        let eigenvalues = DVector::from_iterator(nm, modes.iter().map(Mode::eigenvalue));
        Ok(Self {
            grid,
            kappa,
            modes,
            eigenvalues,
            values,
            grads,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn index_of(&self, mode: &Mode) -> Option<usize> {
        self.modes.iter().position(|m| m == mode)
    }

    pub fn mode_field(&self, i: usize) -> GridField {
        GridField::new(self.grid, self.values.column(i).iter().copied().collect())
            .expect("basis samples are finite")
    }

    /// `(w_i, w_j)` by grid quadrature.
    pub fn gram(&self) -> DMatrix<f64> {
        self.values.tr_mul(&self.values) * self.grid.cell_volume()
    }

    /// `(f, w_j)` for every mode.
    pub fn project(&self, f: &GridField) -> Result<DVector<f64>> {
        self.grid.check_same(f.grid())?;
        let s = DVector::from_column_slice(f.samples());
        Ok(self.values.tr_mul(&s) * self.grid.cell_volume())
    }

    /// `Σ η_i w_i` sampled on the grid.
    pub fn reconstruct(&self, eta: &DVector<f64>) -> GridField {
        let s = &self.values * eta;
        GridField::new(self.grid, s.iter().copied().collect()).expect("finite coefficients")
    }

    /// `‖Σ η_i w_i‖²_{H^s} = Σ_i (Σ_{j≤s} λ_i^j) η_i²`.
    pub fn sobolev_norm_sq(&self, eta: &DVector<f64>, s: usize) -> f64 {
        eta.iter()
            .zip(self.eigenvalues.iter())
            .map(|(e, &l)| (0..=s).map(|j| l.powi(j as i32)).sum::<f64>() * e * e)
            .sum()
    }

    /// Largest stable step for a given ellipticity bound.
    pub fn stability_bound(&self, ell: f64) -> f64 {
        C_STAB / (ell.sqrt() * self.kappa as f64)
    }
}

/// The coefficient fields of the linear equation together with the
/// ellipticity bound `L`, `1/L ≤ α ≤ L`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCoefficients {
    pub a: SpaceTimeField,
    pub alpha: SpaceTimeField,
    pub beta: SpaceTimeField,
    pub gamma: SpaceTimeField,
    pub f: SpaceTimeField,
    ell: f64,
}

/// A field held constant on `[0, t_end]`.
pub fn steady(field: &GridField, t_end: f64) -> Result<SpaceTimeField> {
    SpaceTimeField::new(vec![0.0, t_end], vec![field.clone(), field.clone()])
}

fn alpha_range(alpha: &SpaceTimeField) -> (f64, f64) {
    alpha
        .nodes()
        .iter()
        .flat_map(|n| n.samples().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

impl LinearCoefficients {
    pub fn new(
        a: SpaceTimeField,
        alpha: SpaceTimeField,
        beta: SpaceTimeField,
        gamma: SpaceTimeField,
        f: SpaceTimeField,
        ell: f64,
    ) -> Result<Self> {
        let grid = *alpha.grid();
        for field in [&a, &beta, &gamma, &f] {
            grid.check_same(field.grid())?;
        }
        if !(ell >= 1.0) || !ell.is_finite() {
            return Err(Error::param("L", format!("{ell} must be finite and at least 1")));
        }
        let (lo, hi) = alpha_range(&alpha);
        if lo * ell < 1.0 - 4.0 * f64::EPSILON || hi > ell {
            return Err(Error::param(
                "alpha",
                format!("range [{lo}, {hi}] is outside [1/L, L] with L = {ell}"),
            ));
        }
        Ok(Self {
            a,
            alpha,
            beta,
            gamma,
            f,
            ell,
        })
    }

    /// As [`new`](Self::new) with the tightest `L` for the given `α`.
    pub fn with_auto_bound(
        a: SpaceTimeField,
        alpha: SpaceTimeField,
        beta: SpaceTimeField,
        gamma: SpaceTimeField,
        f: SpaceTimeField,
    ) -> Result<Self> {
        let (lo, hi) = alpha_range(&alpha);
        if !(lo > 0.0) {
            return Err(Error::param("alpha", format!("minimum {lo} is not positive")));
        }
        let ell = hi.max(1.0 / lo).max(1.0);
        Self::new(a, alpha, beta, gamma, f, ell)
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn grid(&self) -> &TorusGrid {
        self.alpha.grid()
    }

    fn fields(&self) -> [&SpaceTimeField; 5] {
        [&self.a, &self.alpha, &self.beta, &self.gamma, &self.f]
    }

    /// Latest time covered by every coefficient field.
    pub fn t_end(&self) -> f64 {
        self.fields().iter().map(|f| f.t_end()).fold(f64::INFINITY, f64::min)
    }

    fn covers(&self, t_end: f64) -> Result<()> {
        let start = self.fields().iter().map(|f| f.t_start()).fold(f64::NEG_INFINITY, f64::max);
        if start > 1e-12 || self.t_end() < t_end - 1e-9 * t_end.max(1.0) {
            return Err(Error::param(
                "t_end",
                format!(
                    "coefficients cover [{start}, {}], not [0, {t_end}]",
                    self.t_end()
                ),
            ));
        }
        Ok(())
    }

    fn resampled(&self, n: usize) -> Result<Self> {
        let r = |f: &SpaceTimeField| f.map_nodes(|g| resample(g, n));
        Ok(Self {
            a: r(&self.a)?,
            alpha: r(&self.alpha)?,
            beta: r(&self.beta)?,
            gamma: r(&self.gamma)?,
            f: r(&self.f)?,
            ell: self.ell,
        })
    }
}

/// `B_ij = (a w_i, w_j)`, `A_ij = (αλ_i w_i − <∇β,∇w_i> − γ w_i, w_j)` and
/// `f_j = (f, w_j)`, so that `η″_j + Σ_i B_ij η′_i + Σ_i A_ij η_i = f_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeMatrices {
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub forcing: DVector<f64>,
}

fn weighted(basis: &GalerkinBasis, cols: &DMatrix<f64>, weight: &[f64]) -> DMatrix<f64> {
    let mut scaled = cols.clone();
    for (p, mut row) in scaled.row_iter_mut().enumerate() {
        row *= weight[p];
    }
    scaled.tr_mul(&basis.values) * basis.grid.cell_volume()
}

fn damping_matrix(basis: &GalerkinBasis, a: &GridField) -> DMatrix<f64> {
    weighted(basis, &basis.values, a.samples())
}

fn alpha_matrix(basis: &GalerkinBasis, alpha: &GridField) -> DMatrix<f64> {
    let mut cols = basis.values.clone();
    for (i, mut c) in cols.column_iter_mut().enumerate() {
        c *= basis.eigenvalues[i];
    }
    weighted(basis, &cols, alpha.samples())
}

fn beta_matrix(basis: &GalerkinBasis, beta: &GridField) -> DMatrix<f64> {
    let n = basis.len();
    let mut out = DMatrix::zeros(n, n);
    for (g, db) in basis.grads.iter().zip(gradient(beta)) {
        out -= weighted(basis, g, db.samples());
    }
    out
}

fn gamma_matrix(basis: &GalerkinBasis, gamma: &GridField) -> DMatrix<f64> {
    -weighted(basis, &basis.values, gamma.samples())
}

/// Assembles the projected system at time `t`, with coefficients
/// interpolated linearly between their time nodes.
pub fn build_ode_rhs(
    coeffs: &LinearCoefficients,
    basis: &GalerkinBasis,
    t: f64,
) -> Result<OdeMatrices> {
    basis.grid.check_same(coeffs.grid())?;
    let stiffness = alpha_matrix(basis, &coeffs.alpha.interpolate(t))
        + beta_matrix(basis, &coeffs.beta.interpolate(t))
        + gamma_matrix(basis, &coeffs.gamma.interpolate(t));
    Ok(OdeMatrices {
        damping: damping_matrix(basis, &coeffs.a.interpolate(t)),
        stiffness,
        forcing: basis.project(&coeffs.f.interpolate(t))?,
    })
}

/// Node-wise values linear in time.
#[derive(Clone, Debug)]
struct Series<T> {
    times: Vec<f64>,
    values: Vec<T>,
}

impl<T> Series<T>
where
    T: Clone + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    fn build(field: &SpaceTimeField, f: impl Fn(&GridField) -> Result<T>) -> Result<Self> {
        Ok(Self {
            times: field.times().to_vec(),
            values: field.nodes().iter().map(f).collect::<Result<_>>()?,
        })
    }

    fn at(&self, t: f64) -> T {
        let (i, w) = bracket(&self.times, t);
        if w == 0.0 {
            self.values[i].clone()
        } else {
            self.values[i].clone() * (1.0 - w) + self.values[i + 1].clone() * w
        }
    }
}

/// The projected system with every coefficient contribution assembled
/// once per coefficient time node.
#[derive(Clone, Debug)]
pub struct OdeSystem<'a> {
    basis: &'a GalerkinBasis,
    ell: f64,
    damping: Series<DMatrix<f64>>,
    alpha: Series<DMatrix<f64>>,
    beta: Series<DMatrix<f64>>,
    gamma: Series<DMatrix<f64>>,
    forcing: Series<DVector<f64>>,
}

impl<'a> OdeSystem<'a> {
    pub fn new(coeffs: &LinearCoefficients, basis: &'a GalerkinBasis) -> Result<Self> {
        basis.grid.check_same(coeffs.grid())?;
        Ok(Self {
            basis,
            ell: coeffs.ell,
            damping: Series::build(&coeffs.a, |g| Ok(damping_matrix(basis, g)))?,
            alpha: Series::build(&coeffs.alpha, |g| Ok(alpha_matrix(basis, g)))?,
            beta: Series::build(&coeffs.beta, |g| Ok(beta_matrix(basis, g)))?,
            gamma: Series::build(&coeffs.gamma, |g| Ok(gamma_matrix(basis, g)))?,
            forcing: Series::build(&coeffs.f, |g| basis.project(g))?,
        })
    }

    pub fn basis(&self) -> &GalerkinBasis {
        self.basis
    }

    pub fn matrices(&self, t: f64) -> OdeMatrices {
        OdeMatrices {
            damping: self.damping.at(t),
            stiffness: self.alpha.at(t) + self.beta.at(t) + self.gamma.at(t),
            forcing: self.forcing.at(t),
        }
    }

    /// `η″ = f − Bᵀη′ − Aᵀη`.
    pub fn acceleration(&self, t: f64, eta: &DVector<f64>, eta_t: &DVector<f64>) -> DVector<f64> {
        let m = self.matrices(t);
        m.forcing - m.damping.tr_mul(eta_t) - m.stiffness.tr_mul(eta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinState {
    pub eta: DVector<f64>,
    pub eta_t: DVector<f64>,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    /// `‖φ − P_κ φ‖_{L²}`.
    pub phi_tail: f64,
    pub psi_tail: f64,
}

pub fn project_initial_data(
    phi: &GridField,
    psi: &GridField,
    basis: &GalerkinBasis,
) -> Result<(GalerkinState, ProjectionReport)> {
    let eta = basis.project(phi)?;
    let eta_t = basis.project(psi)?;
    let tail = |f: &GridField, c: &DVector<f64>| -> Result<f64> {
        Ok(f.sub(&basis.reconstruct(c))?.l2_norm())
    };
    let report = ProjectionReport {
        phi_tail: tail(phi, &eta)?,
        psi_tail: tail(psi, &eta_t)?,
    };
    Ok((GalerkinState { eta, eta_t, t: 0.0 }, report))
}

/// Mode coefficients at uniform time nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub eta: Vec<DVector<f64>>,
    pub eta_t: Vec<DVector<f64>>,
    /// Evaluated from the ODE at each node.
    pub eta_tt: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    fn fields(&self, basis: &GalerkinBasis, which: &[DVector<f64>]) -> Result<SpaceTimeField> {
        SpaceTimeField::new(
            self.times.clone(),
            which.iter().map(|c| basis.reconstruct(c)).collect(),
        )
    }
}

/// Classical RK4 for `(η, η′)` on `[state.t, t_end]`. The step is reduced
/// to divide the interval evenly; a requested step above the stability
/// bound is refused.
pub fn integrate(
    system: &OdeSystem<'_>,
    state: &GalerkinState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let bound = system.basis.stability_bound(system.ell);
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StabilityBound { dt, bound });
    }
    let span = t_end - state.t;
    if !(span > 0.0) {
        return Err(Error::param("t_end", "must exceed the start time"));
    }
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut eta = state.eta.clone();
    let mut eta_t = state.eta_t.clone();
    let mut out = Trajectory {
        times: Vec::with_capacity(steps + 1),
        eta: Vec::with_capacity(steps + 1),
        eta_t: Vec::with_capacity(steps + 1),
        eta_tt: Vec::with_capacity(steps + 1),
    };
    let acc = |t: f64, x: &DVector<f64>, v: &DVector<f64>| system.acceleration(t, x, v);
    for step in 0..=steps {
        let t = state.t + step as f64 * h;
        let a0 = acc(t, &eta, &eta_t);
        out.times.push(t);
        out.eta.push(eta.clone());
        out.eta_t.push(eta_t.clone());
        out.eta_tt.push(a0.clone());
        if step == steps {
            break;
        }
        let k1x = eta_t.clone();
        let k1v = a0;
        let x2 = &eta + &k1x * (h / 2.0);
        let v2 = &eta_t + &k1v * (h / 2.0);
        let k2v = acc(t + h / 2.0, &x2, &v2);
        let x3 = &eta + &v2 * (h / 2.0);
        let v3 = &eta_t + &k2v * (h / 2.0);
        let k3v = acc(t + h / 2.0, &x3, &v3);
        let x4 = &eta + &v3 * h;
        let v4 = &eta_t + &k3v * h;
        let k4v = acc(t + h, &x4, &v4);
        eta += (k1x + (&v2 + &v3) * 2.0 + &v4) * (h / 6.0);
        eta_t += (k1v + (k2v + k3v) * 2.0 + k4v) * (h / 6.0);
        if eta.iter().chain(eta_t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: step + 1 });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub u: SpaceTimeField,
    pub ut: SpaceTimeField,
    pub basis: GalerkinBasis,
    pub trajectory: Trajectory,
    pub dt: f64,
    pub projection: ProjectionReport,
    /// `(κ, gap to the previous cutoff)` for every cutoff after the first.
    pub gaps: Vec<(usize, f64)>,
}

impl LinearSolution {
    pub fn kappa(&self) -> usize {
        self.basis.kappa()
    }

    pub fn gap(&self) -> Option<f64> {
        self.gaps.last().map(|g| g.1)
    }

    pub fn utt(&self) -> Result<SpaceTimeField> {
        self.trajectory.fields(&self.basis, &self.trajectory.eta_tt)
    }
}

/// One Galerkin solve at a fixed cutoff.
pub fn solve_fixed(
    coeffs: &LinearCoefficients,
    phi: &GridField,
    psi: &GridField,
    kappa: usize,
    t_end: f64,
    dt: f64,
) -> Result<LinearSolution> {
    coeffs.covers(t_end)?;
    let basis = GalerkinBasis::new(*coeffs.grid(), kappa)?;
    let system = OdeSystem::new(coeffs, &basis)?;
    let (state, projection) = project_initial_data(phi, psi, &basis)?;
    let trajectory = integrate(&system, &state, t_end, dt)?;
    let u = trajectory.fields(&basis, &trajectory.eta)?;
    let ut = trajectory.fields(&basis, &trajectory.eta_t)?;
    let dt = trajectory.dt();
    Ok(LinearSolution {
        u,
        ut,
        basis,
        trajectory,
        dt,
        projection,
        gaps: Vec::new(),
    })
}

/// `max_t ‖u_fine − u_coarse‖_{H^s}` measured in mode space.
pub fn trajectory_gap(
    coarse: &LinearSolution,
    fine: &LinearSolution,
    s: usize,
) -> Result<f64> {
    if coarse.trajectory.times.len() != fine.trajectory.times.len() {
        return Err(Error::GridMismatch("trajectories use different steps".into()));
    }
    let map: Vec<Option<usize>> = fine
        .basis
        .modes()
        .iter()
        .map(|m| coarse.basis.index_of(m))
        .collect();
    let mut worst: f64 = 0.0;
    for (ec, ef) in coarse.trajectory.eta.iter().zip(&fine.trajectory.eta) {
        let diff = DVector::from_iterator(
            ef.len(),
            map.iter()
                .enumerate()
                .map(|(i, c)| ef[i] - c.map_or(0.0, |c| ec[c])),
        );
        worst = worst.max(fine.basis.sobolev_norm_sq(&diff, s).sqrt());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearOptions {
    pub t_end: f64,
    pub dt: f64,
    pub tol: f64,
    pub kappa0: usize,
    pub max_doublings: u32,
}

impl LinearOptions {
    pub fn new(t_end: f64, dt: f64, tol: f64, kappa0: usize) -> Self {
        Self {
            t_end,
            dt,
            tol,
            kappa0,
            max_doublings: 6,
        }
    }
}

/// Solves at cutoffs `κ₀, 2κ₀, …` until two consecutive solutions differ by
/// less than `tol` in `C⁰([0,T̂], H¹)`, and returns the finer one. Fields
/// are trigonometrically resampled when a cutoff outgrows the grid.
pub fn solve_linear(
    coeffs: &LinearCoefficients,
    phi: &GridField,
    psi: &GridField,
    opts: &LinearOptions,
) -> Result<LinearSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let mut gaps = Vec::new();
    let mut prev: Option<LinearSolution> = None;
    let mut kappa = opts.kappa0;
    for _ in 0..=opts.max_doublings {
        let n0 = coeffs.grid().points_per_axis();
        let mut n = n0;
        while 2 * kappa >= n {
            n *= 2;
        }
        let sol = if n == n0 {
            solve_fixed(coeffs, phi, psi, kappa, opts.t_end, opts.dt)?
        } else {
            let c = coeffs.resampled(n)?;
            solve_fixed(&c, &resample(phi, n)?, &resample(psi, n)?, kappa, opts.t_end, opts.dt)?
        };
        if let Some(p) = prev {
            let gap = trajectory_gap(&p, &sol, 1)?;
            gaps.push((kappa, gap));
            if gap < opts.tol {
                return Ok(LinearSolution { gaps, ..sol });
            }
        }
        prev = Some(sol);
        kappa *= 2;
    }
    Err(Error::LinearNonConvergence {
        gaps: gaps.iter().map(|g| g.1).collect(),
        reason: format!(
            "no agreement below {} up to cutoff {}",
            opts.tol,
            kappa / 2
        ),
    })
}

/// Measured sides of the a priori estimate of order `N ≥ 2`:
///
/// ```text
/// sup_t Σ_{i≤N} ‖∂ᵢ_t u‖²_{H^{N−i}}
///   ≤ C (‖φ‖²_{H^N} + ‖ψ‖²_{H^{N−1}} + ‖f(0)‖²_{H^{N−2}}
///        + ∫ Σ_{1≤i≤N−1} ‖∂ᵢ_t f‖²_{H^{N−i−1}} dτ).
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub order: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs/rhs`, or `None` when both vanish.
    pub ratio: Option<f64>,
}

fn coefficient_derivative(series: &[DVector<f64>], dt: f64) -> Vec<DVector<f64>> {
    let n = series[0].len();
    let nt = series.len();
    let mut out = vec![DVector::zeros(n); nt];
    let mut line = vec![0.0; nt];
    let mut d = vec![0.0; nt];
    for i in 0..n {
        for (j, v) in series.iter().enumerate() {
            line[j] = v[i];
        }
        d1(&line, dt, &mut d);
        for (j, o) in out.iter_mut().enumerate() {
            o[i] = d[j];
        }
    }
    out
}

pub fn apriori_report(
    sol: &LinearSolution,
    phi: &GridField,
    psi: &GridField,
    f: &SpaceTimeField,
    order: usize,
) -> Result<AprioriReport> {
    if !(2..=4).contains(&order) {
        return Err(Error::param("order", format!("{order} is outside 2..=4")));
    }
    let tr = &sol.trajectory;
    let basis = &sol.basis;
    let mut derivs = vec![tr.eta.clone(), tr.eta_t.clone(), tr.eta_tt.clone()];
    while derivs.len() <= order {
        let next = coefficient_derivative(derivs.last().unwrap(), tr.dt());
        derivs.push(next);
    }
    let mut lhs: f64 = 0.0;
    for j in 0..tr.times.len() {
        let total: f64 = (0..=order)
            .map(|i| basis.sobolev_norm_sq(&derivs[i][j], order - i))
            .sum();
        lhs = lhs.max(total);
    }

    let on_nodes = |g: &GridField| -> Result<GridField> {
        if g.grid() == basis.grid() {
            Ok(g.clone())
        } else {
            resample(g, basis.grid().points_per_axis())
        }
    };
    let nodes = tr
        .times
        .iter()
        .map(|&t| on_nodes(&f.interpolate(t)))
        .collect::<Result<Vec<_>>>()?;
    let f_nodes = SpaceTimeField::new(tr.times.clone(), nodes)?;
    use crate::norms::sobolev_norm_sq;
    let mut rhs = sobolev_norm_sq(phi, order)?
        + sobolev_norm_sq(psi, order - 1)?
        + sobolev_norm_sq(f_nodes.node(0), order - 2)?;
    let dt = tr.dt();
    let mut dtf = f_nodes.clone();
    for i in 1..order {
        dtf = crate::time::time_derivative(&dtf, 1)?;
        let vals = dtf
            .nodes()
            .iter()
            .map(|g| sobolev_norm_sq(g, order - i - 1))
            .collect::<Result<Vec<_>>>()?;
        let n = vals.len();
        rhs += dt * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[n - 1]));
    }
    let ratio = if lhs == 0.0 && rhs == 0.0 {
        None
    } else {
        Some(lhs / rhs)
    };
    Ok(AprioriReport {
        order,
        lhs,
        rhs,
        ratio,
    })
}
