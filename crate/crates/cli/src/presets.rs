//! End-to-end experiments behind `curveforge reproduce`.

use serde_json::json;

use curveforge::curvature::study::{scalar_curvature_study, CurvatureCase};
use curveforge::curvature::{scalar_from_jet, CurvatureJet};
use curveforge::picard::{picard_solve, small_data_solve, small_data_threshold, uniqueness_probe, PicardConfig};
use curveforge::{GridField, SpaceTimeField, TorusGrid};

use crate::commands::{write_file, write_rows, CmdResult};
use crate::config::{ConfigError, RunConfig};
use crate::record::{RunRecord, Verdict};

pub const PRESETS: [&str; 4] = ["sec3-derivation", "thm11-local", "thm12-smalldata", "prop63-uniqueness"];

/// `u★ = 0.2 sin(x) sin(t)` on `T¹ × [0, 0.5]` and the `R̃` it induces,
/// sampled every `1e-3`.
pub fn manufactured() -> (SpaceTimeField, GridField, GridField, GridField) {
    let g = TorusGrid::new(1, 32).expect("static grid");
    let times: Vec<f64> = (0..=500).map(|j| j as f64 * 1e-3).collect();
    let rt = SpaceTimeField::from_fn(g, times, |x, t| {
        let (s, c) = (x[0].sin(), x[0].cos());
        let jet = CurvatureJet {
            u: 0.2 * s * t.sin(),
            lap_g: -0.2 * s * t.sin(),
            grad_g_sq: (0.2 * c * t.sin()).powi(2),
            lap_h: -0.2 * s * t.sin(),
            grad_h_sq: (0.2 * s * t.cos()).powi(2),
            r_g: 0.0,
            r_h: 0.0,
        };
        scalar_from_jet(1, 1, &jet)
    })
    .expect("finite samples");
    let psi = GridField::from_fn(g, |x| 0.2 * x[0].sin()).expect("finite samples");
    (rt, GridField::zeros(g), psi, GridField::zeros(g))
}

pub fn manufactured_config(dt: f64) -> PicardConfig {
    let mut cfg = PicardConfig::new(1, 0.5);
    cfg.dt = dt;
    cfg.kappa = 8;
    cfg
}

/// `R̃ = 1e-3 sin(x) sin(t)` on `T¹ × [0, 1]`.
pub fn small_data() -> SpaceTimeField {
    let g = TorusGrid::new(1, 32).expect("static grid");
    let times: Vec<f64> = (0..=1000).map(|j| j as f64 * 1e-3).collect();
    SpaceTimeField::from_fn(g, times, |x, t| 1e-3 * x[0].sin() * t.sin()).expect("finite samples")
}

pub fn small_data_config() -> PicardConfig {
    let mut cfg = PicardConfig::new(1, 1.0);
    cfg.dt = 1e-2;
    cfg.kappa = 8;
    cfg
}

pub fn reproduce(cfg: &RunConfig, rec: &mut RunRecord) -> CmdResult {
    match cfg.preset.as_deref() {
        Some("sec3-derivation") => derivation(cfg, rec),
        Some("thm11-local") => local(cfg, rec),
        Some("thm12-smalldata") => small(cfg, rec),
        Some("prop63-uniqueness") => uniqueness(rec),
        other => Err(ConfigError::new(
            "preset",
            format!("{other:?} is not one of {}", PRESETS.join(", ")),
        )
        .into()),
    }
}

fn derivation(cfg: &RunConfig, rec: &mut RunRecord) -> CmdResult {
    let mut all = Vec::new();
    for (m, n) in [(1, 1), (2, 1), (2, 2)] {
        let rows = scalar_curvature_study(&CurvatureCase::sine(m, n), &[32, 64, 128])?;
        let scalar: Vec<_> = rows.iter().filter(|r| r.identity.ends_with("/scalar")).collect();
        let lo = scalar.iter().filter_map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let last = scalar.last().map_or(f64::NAN, |r| r.max_error);
        rec.verdict(Verdict::new(
            format!("m={m} n={n}"),
            lo >= 3.0 && last <= 1e-3,
            format!("min ratio {lo:.3}, gap at N=128 {last:.3e} (limit 1e-3)"),
        ));
        all.extend(rows);
    }
    write_rows(cfg, rec, "curvature.csv", &all)?;
    rec.diagnostics = json!({ "rows": all });
    Ok(())
}

fn local(cfg: &RunConfig, rec: &mut RunRecord) -> CmdResult {
    let (rt, phi, psi, rg) = manufactured();
    let sol = picard_solve(&rt, &phi, &psi, &rg, &manufactured_config(1e-3))?;
    let exact = SpaceTimeField::from_fn(*phi.grid(), sol.u.times().to_vec(), |x, t| 0.2 * x[0].sin() * t.sin())?;
    let err = sol.u.sub(&exact)?.max_abs();
    let max_ratio = sol.report.ratios().iter().copied().fold(0.0, f64::max);
    let r2 = sol.report.geometric_r2.unwrap_or(0.0);
    write_file(cfg, rec, "solution.csv", |w| curveforge::io::write_spacetime_csv(&sol.u, w))?;
    rec.verdict(Verdict::new("recovery", err <= 1e-4, format!("C0 error {err:.3e} (limit 1e-4)")));
    rec.verdict(Verdict::new(
        "contraction",
        max_ratio < 1.0 && r2 > 0.95,
        format!("max ratio {max_ratio:.3}, geometric fit R2 {r2:.4}"),
    ));
    rec.verdict(Verdict::new("gronwall", sol.gronwall.pass, format!("lambda {:.4}", sol.gronwall.lambda)));
    rec.diagnostics = json!({ "error": err, "iterations": sol.report, "residual_check": sol.residual_check });
    Ok(())
}

fn small(cfg: &RunConfig, rec: &mut RunRecord) -> CmdResult {
    let rt = small_data();
    let pc = small_data_config();
    let (sol, rep) = small_data_solve(&rt, 1.0, &pc)?;
    let check = sol.residual_check.clone().expect("residual check is on");
    write_file(cfg, rec, "solution.csv", |w| curveforge::io::write_spacetime_csv(&sol.u, w))?;
    rec.verdict(Verdict::new(
        "full interval",
        sol.report.converged && sol.report.windows.len() == 1,
        format!("{} iterations on [0, {}]", sol.report.iterations(), sol.t0),
    ));
    rec.verdict(Verdict::new(
        "residual",
        check.pass,
        format!("{:.3e} <= 10 x floor = {:.3e}", check.max, check.threshold),
    ));
    rec.verdict(Verdict::new(
        "energy bound",
        rep.energy_within && rep.within_d,
        format!("sup sqrt(E_s) {:.3e}, sup norm {:.3e}, D {:.3}", rep.sup_sqrt_energy, rep.sup_norm, rep.d_bound),
    ));
    rec.verdict(Verdict::new("gronwall", sol.gronwall.pass, format!("lambda {:.4}", sol.gronwall.lambda)));
    let bracket = small_data_threshold(&rt, 1.0, &pc, 1.0, 1e4, 6)?;
    rec.verdict(Verdict::new(
        "amplitude bracket",
        bracket.monotone && bracket.epsilon >= 1.0,
        format!(
            "converges up to {:.3e} sin(x) sin(t), fails at {}",
            1e-3 * bracket.epsilon,
            bracket.failing.map_or("no tested amplitude".into(), |a| format!("{:.3e}", 1e-3 * a))
        ),
    ));
    rec.diagnostics = json!({ "small_data": rep, "residual_check": check, "bracket": bracket });
    Ok(())
}

fn uniqueness(rec: &mut RunRecord) -> CmdResult {
    let (rt, phi, psi, rg) = manufactured();
    let a = uniqueness_probe(&rt, &phi, &psi, &rg, &manufactured_config(1e-2), 7)?;
    let zero = GridField::zeros(*phi.grid());
    let b = uniqueness_probe(&small_data(), &zero, &zero, &zero, &small_data_config(), 11)?;
    for (name, r) in [("manufactured", &a), ("small-data", &b)] {
        rec.verdict(Verdict::new(
            name,
            r.max_gap < 1e-4 && r.shrinking && r.diverged.is_empty(),
            format!("max pairwise gap {:.3e}, shrinking {}", r.max_gap, r.shrinking),
        ));
    }
    rec.diagnostics = json!({ "manufactured": a, "small_data": b });
    Ok(())
}
