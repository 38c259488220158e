use std::fs::File;
use std::io::{BufWriter, Write};

use serde_json::json;

use curveforge::curvature::study::{scalar_curvature_study, ConvergenceRow, CurvatureCase};
use curveforge::energy::{data_quantity_as, energy_trace, gronwall_check, write_trace_csv};
use curveforge::galerkin::{solve_fixed, solve_linear, LinearCoefficients, LinearOptions};
use curveforge::io::write_spacetime_csv;
use curveforge::norms::sup_sobolev;
use curveforge::picard::{
    default_s, picard_solve, small_data_solve, small_data_threshold, NonlinearSolution, PicardConfig,
};
use curveforge::time::time_derivative;
use curveforge::{Error, Expr, SpaceTimeField, TorusGrid};

use crate::config::{ConfigError, RunConfig};
use crate::inputs::{grid_field, nodes, spacetime_field};
use crate::record::{RunRecord, Verdict};

#[derive(Debug)]
pub enum CmdError {
    Config(ConfigError),
    Compute(Error),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e)
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => CmdError::Config(ConfigError::new(name, reason)),
            e => CmdError::Compute(e),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Compute(Error::Io(e))
    }
}

pub type CmdResult = Result<(), CmdError>;

pub(crate) fn write_file(
    cfg: &RunConfig,
    rec: &mut RunRecord,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> curveforge::Result<()>,
) -> CmdResult {
    std::fs::create_dir_all(&cfg.out)?;
    let mut w = BufWriter::new(File::create(cfg.out.join(name))?);
    body(&mut w)?;
    w.flush()?;
    rec.files.push(name.to_string());
    Ok(())
}

pub(crate) fn write_rows(cfg: &RunConfig, rec: &mut RunRecord, name: &str, rows: &[ConvergenceRow]) -> CmdResult {
    write_file(cfg, rec, name, |w| {
        writeln!(w, "N,identity,max_error,ratio")?;
        for r in rows {
            let ratio = r.ratio.map_or(String::new(), |q| format!("{q:e}"));
            writeln!(w, "{},{},{:e},{}", r.points, r.identity, r.max_error, ratio)?;
        }
        Ok(())
    })
}

pub fn verify_curvature(cfg: &RunConfig, rec: &mut RunRecord) -> CmdResult {
    let preset = cfg.preset.as_deref().unwrap_or("sine-m1");
    let mut case = match preset {
        "flat-zero" => CurvatureCase::flat_zero(1, 1),
        "sine-m1" => CurvatureCase::sine(1, 1),
        "general-n" => CurvatureCase::sine(2, 2),
        other => {
            return Err(ConfigError::new(
                "preset",
                format!("'{other}' is not flat-zero, sine-m1 or general-n"),
            )
            .into())
        }
    };
    if let Some(src) = &cfg.base_conformal {
        case.phi = Some(Expr::parse(src).map_err(|e| ConfigError::new("base-conformal", e.to_string()))?);
        case.label.push_str("-curved");
    }
    let resolutions = if cfg.resolutions.is_empty() {
        vec![32, 64, 128]
    } else {
        cfg.resolutions.clone()
    };
    let rows = scalar_curvature_study(&case, &resolutions)?;
    write_rows(cfg, rec, "curvature.csv", &rows)?;
    if preset == "flat-zero" {
        let worst = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
        rec.verdict(Verdict::new("flat-zero exact", worst <= 1e-8, format!("max error {worst:.2e}")));
    } else {
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        rec.verdict(Verdict::new(
            "halving ratios >= 3",
            !ratios.is_empty() && lo >= 3.0,
            format!("ratios in [{lo:.3}, {hi:.3}]"),
        ));
    }
    rec.diagnostics = json!({ "case": case.label, "rows": rows });
    Ok(())
}

pub fn solve_linear_cmd(cfg: &RunConfig, rec: &mut RunRecord) -> CmdResult {
    let p = cfg
        .linear
        .clone()
        .ok_or_else(|| ConfigError::new("config", "give --config or --preset"))?;
    let grid = TorusGrid::new(p.m, p.n).map_err(|e| ConfigError::new("N", e.to_string()))?;
    let times = nodes(p.t_end, p.dt);
    let field = |name: &'static str, src: &str| spacetime_field(name, Some(src), grid, &times);
    let coeffs = LinearCoefficients::with_auto_bound(
        field("a", &p.a)?,
        field("alpha", &p.alpha)?,
        field("beta", &p.beta)?,
        field("gamma", &p.gamma)?,
        field("f", &p.f)?,
    )?;
    let phi = grid_field("phi", Some(&p.phi), grid)?;
    let psi = grid_field("psi", Some(&p.psi), grid)?;
    let sol = match p.tol {
        Some(tol) => solve_linear(&coeffs, &phi, &psi, &LinearOptions::new(p.t_end, p.dt, tol, p.kappa))?,
        None => solve_fixed(&coeffs, &phi, &psi, p.kappa, p.t_end, p.dt)?,
    };
    write_file(cfg, rec, "solution.csv", |w| write_spacetime_csv(&sol.u, w))?;
    let mut error = None;
    if let Some(src) = &p.exact {
        let exact = spacetime_field("exact", Some(src), *sol.u.grid(), sol.u.times())?;
        let err = sol.u.sub(&exact)?.max_abs();
        rec.verdict(Verdict::new(
            "exact solution",
            err <= p.max_error,
            format!("C0 error {err:.3e} (limit {:.1e})", p.max_error),
        ));
        error = Some(err);
    } else {
        rec.verdict(Verdict::new("solved", true, format!("kappa {}", sol.kappa())));
    }
    rec.diagnostics = json!({
        "kappa": sol.kappa(),
        "dt": sol.dt,
        "gaps": sol.gaps,
        "projection": sol.projection,
        "error": error,
    });
    Ok(())
}

fn picard_config(cfg: &RunConfig, grid: &TorusGrid, t0: f64) -> Result<PicardConfig, CmdError> {
    let m = cfg.m.unwrap_or(1);
    let mut pc = PicardConfig::new(m, t0);
    if let Some(k) = cfg.k {
        pc.k = k;
    }
    pc.s = cfg.s.unwrap_or(default_s(m, pc.k));
    pc.d_bound = cfg.d_bound;
    if let Some(tol) = cfg.tol {
        pc.tol = tol;
    }
    if let Some(it) = cfg.max_iters {
        pc.max_iters = it;
    }
    pc.adaptive = cfg.adaptive;
    pc.kappa = cfg.kappa.unwrap_or(8.min(grid.points_per_axis() / 2 - 1));
    pc.dt = cfg.dt.unwrap_or(1e-2);
    pc.seed = cfg.seed;
    pc.validate(grid)?;
    Ok(pc)
}

fn record_solution(cfg: &RunConfig, rec: &mut RunRecord, sol: &NonlinearSolution) -> CmdResult {
    write_file(cfg, rec, "solution.csv", |w| write_spacetime_csv(&sol.u, w))?;
    write_file(cfg, rec, "residual.csv", |w| write_spacetime_csv(&sol.residual, w))?;
    write_file(cfg, rec, "energy.csv", |w| write_trace_csv(&sol.energy, &sol.gronwall, w))?;
    rec.verdict(Verdict::new(
        "converged",
        sol.report.converged,
        format!(
            "{} iterations on [0, {}], last gap {:.2e}",
            sol.report.iterations(),
            sol.t0,
            sol.report.gaps().last().copied().unwrap_or(0.0)
        ),
    ));
    if let Some(c) = &sol.residual_check {
        rec.verdict(Verdict::new(
            "residual",
            c.pass,
            format!("max {:.3e}, threshold {:.3e} (floor {:.3e})", c.max, c.threshold, c.floor),
        ));
    }
    rec.verdict(Verdict::new(
        "gronwall",
        sol.gronwall.pass,
        format!("lambda {:.4}, margin {:.3e}", sol.gronwall.lambda, sol.gronwall.margin),
    ));
    Ok(())
}

pub fn solve(cfg: &RunConfig, rec: &mut RunRecord) -> CmdResult {
    let grid = cfg.grid()?;
    let t_end = cfg.t_end.unwrap_or(1.0);
    let small = cfg.mode.as_deref() == Some("small-data");
    let t0 = if small { t_end } else { cfg.t0.unwrap_or(t_end) };
    let pc = picard_config(cfg, &grid, t0)?;
    let times = nodes(t0, pc.dt / 4.0);
    let rtilde = spacetime_field("rtilde", cfg.rtilde.as_deref(), grid, &times)?;
    let outcome = if small {
        for (name, given) in [("phi", &cfg.phi), ("psi", &cfg.psi), ("rg", &cfg.r_g)] {
            if given.is_some() {
                return Err(ConfigError::new(name, "small-data mode uses zero data on a flat torus").into());
            }
        }
        small_data_solve(&rtilde, t_end, &pc).map(|(sol, rep)| (sol, Some(rep)))
    } else {
        let phi = grid_field("phi", cfg.phi.as_deref(), grid)?;
        let psi = grid_field("psi", cfg.psi.as_deref(), grid)?;
        let r_g = grid_field("rg", cfg.r_g.as_deref(), grid)?;
        picard_solve(&rtilde, &phi, &psi, &r_g, &pc).map(|sol| (sol, None))
    };
    let (sol, small_rep) = match outcome {
        Ok(x) => x,
        Err(Error::PicardFailure { reason, report }) => {
            rec.partial = true;
            rec.diagnostics = json!({
                "iterations": report,
                "t0_history": report.t0_history(),
                "failed_amplitude": small.then(|| sup_sobolev(&rtilde, pc.s - 1).ok()),
            });
            return Err(Error::PicardFailure { reason, report }.into());
        }
        Err(e) => return Err(e.into()),
    };
    record_solution(cfg, rec, &sol)?;
    let mut threshold = None;
    if let Some(rep) = &small_rep {
        rec.verdict(Verdict::new(
            "sup norm within D",
            rep.within_d,
            format!("{:.3e} <= {:.3}", rep.sup_norm, rep.d_bound),
        ));
        rec.verdict(Verdict::new(
            "energy within D/(2 sqrt 2)",
            rep.energy_within,
            format!("{:.3e} <= {:.3}", rep.sup_sqrt_energy, rep.d_bound / (2.0 * 2f64.sqrt())),
        ));
        if cfg.bisect {
            let t = small_data_threshold(&rtilde, t_end, &pc, 1.0, 1e4, 6)?;
            let norm = sup_sobolev(&rtilde, m_half_k(&pc))?;
            rec.verdict(Verdict::new(
                "monotone bracket",
                t.monotone,
                format!("epsilon = {:.4} x input ({:.3e} in H^{})", t.epsilon, t.epsilon * norm, m_half_k(&pc)),
            ));
            threshold = Some(json!({ "bracket": t, "input_norm": norm, "epsilon_norm": t.epsilon * norm }));
        }
    }
    rec.diagnostics = json!({
        "iterations": sol.report,
        "t0_history": sol.report.t0_history(),
        "t0": sol.t0,
        "dt": sol.dt,
        "residual_max": sol.residual_max,
        "residual_check": sol.residual_check,
        "energy": sol.energy,
        "gronwall": sol.gronwall,
        "small_data": small_rep,
        "threshold": threshold,
    });
    Ok(())
}

/// `⌊m/2 + k⌋`, the smoothness in which the data size is measured.
fn m_half_k(pc: &PicardConfig) -> usize {
    pc.m / 2 + pc.k
}

pub fn energy_report(cfg: &RunConfig, rec: &mut RunRecord) -> CmdResult {
    let grid = cfg.grid()?;
    let m = cfg.m.unwrap_or(1);
    let s = cfg.s.unwrap_or(default_s(m, cfg.k.unwrap_or(2)));
    let times = nodes(cfg.t_end.unwrap_or(1.0), cfg.dt.unwrap_or(1e-2));
    let u = spacetime_field("u", cfg.u.as_deref(), grid, &times)?;
    let v: SpaceTimeField = match &cfg.v {
        Some(src) => spacetime_field("v", Some(src), grid, u.times())?,
        None => u.clone(),
    };
    let ut = time_derivative(&u, 1)?;
    let rtilde = spacetime_field("rtilde", cfg.rtilde.as_deref(), grid, u.times())?;
    let r_g = grid_field("rg", cfg.r_g.as_deref(), grid)?;
    let a_s = data_quantity_as(&rtilde, &r_g, s)?;
    let trace = energy_trace(&u, &ut, &v, s, m, a_s)?;
    let verdict = gronwall_check(&trace, a_s)?;
    write_file(cfg, rec, "energy.csv", |w| write_trace_csv(&trace, &verdict, w))?;
    rec.verdict(Verdict::new(
        "gronwall",
        verdict.pass,
        format!("lambda {:.4}, sup sqrt(E_s) {:.3e}", verdict.lambda, trace.sup_sqrt()),
    ));
    rec.diagnostics = json!({
        "s": s,
        "a_s": a_s,
        "sup_sqrt_energy": trace.sup_sqrt(),
        "doubling_time": trace.doubling_time(),
        "lambda": verdict.lambda,
        "margin": verdict.margin,
    });
    Ok(())
}
