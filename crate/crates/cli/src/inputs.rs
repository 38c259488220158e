//! Field inputs given as an expression or a field file.

use std::path::Path;

use curveforge::io::{load_grid, load_spacetime};
use curveforge::{Expr, GridField, SpaceTimeField, TorusGrid};

use crate::config::ConfigError;

fn check_grid(field: &'static str, want: TorusGrid, got: &TorusGrid) -> Result<(), ConfigError> {
    if *got != want {
        return Err(ConfigError::new(
            field,
            format!(
                "file holds a {}-dimensional grid with N = {}, expected {} and {}",
                got.dim(),
                got.points_per_axis(),
                want.dim(),
                want.points_per_axis()
            ),
        ));
    }
    Ok(())
}

fn parse(field: &'static str, src: &str) -> Result<Expr, ConfigError> {
    Expr::parse(src).map_err(|e| ConfigError::new(field, e.to_string()))
}

pub fn grid_field(field: &'static str, src: Option<&str>, grid: TorusGrid) -> Result<GridField, ConfigError> {
    let Some(src) = src else {
        return Ok(GridField::zeros(grid));
    };
    let f = if Path::new(src).is_file() {
        load_grid(Path::new(src)).map_err(|e| ConfigError::new(field, e.to_string()))?
    } else {
        let e = parse(field, src)?;
        GridField::from_fn(grid, |x| e.eval(x, &[])).map_err(|e| ConfigError::new(field, e.to_string()))?
    };
    check_grid(field, grid, f.grid())?;
    Ok(f)
}

/// Samples an expression on `times`, or loads a file as is.
pub fn spacetime_field(
    field: &'static str,
    src: Option<&str>,
    grid: TorusGrid,
    times: &[f64],
) -> Result<SpaceTimeField, ConfigError> {
    let wrap = |e: curveforge::Error| ConfigError::new(field, e.to_string());
    let Some(src) = src else {
        return SpaceTimeField::zeros(grid, times.to_vec()).map_err(wrap);
    };
    let u = if Path::new(src).is_file() {
        load_spacetime(Path::new(src)).map_err(wrap)?
    } else {
        let e = parse(field, src)?;
        SpaceTimeField::from_fn(grid, times.to_vec(), |x, t| e.eval_xt(x, t)).map_err(wrap)?
    };
    check_grid(field, grid, u.grid())?;
    Ok(u)
}

/// `0, h, …, t_end` with `h ≤ dt` dividing `t_end`.
pub fn nodes(t_end: f64, dt: f64) -> Vec<f64> {
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    (0..=steps).map(|j| t_end * j as f64 / steps as f64).collect()
}
