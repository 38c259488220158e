//! Finite differences in time for [`SpaceTimeField`]s.

use crate::error::{Error, Result};
use crate::grid::{GridField, SpaceTimeField};

/// Second-order first derivative of uniformly spaced node values: central
/// in the interior, one-sided three-point stencils at both ends.
pub(crate) fn d1(values: &[f64], dt: f64, out: &mut [f64]) {
    let n = values.len();
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
    for j in 1..n - 1 {
        out[j] = (values[j + 1] - values[j - 1]) / (2.0 * dt);
    }
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt);
}

/// Second-order second derivative; four-point one-sided stencils at the ends.
pub(crate) fn d2(values: &[f64], dt: f64, out: &mut [f64]) {
    let n = values.len();
    let h2 = dt * dt;
    out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
    for j in 1..n - 1 {
        out[j] = (values[j + 1] - 2.0 * values[j] + values[j - 1]) / h2;
    }
    out[n - 1] =
        (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) / h2;
}

fn apply_stencil(u: &SpaceTimeField, order: usize) -> Result<SpaceTimeField> {
    let dt = u.uniform_step().ok_or(Error::NonUniformTime)?;
    let nt = u.len_time();
    let npts = u.grid().len();
    let mut out = vec![vec![0.0; npts]; nt];
    let mut line = vec![0.0; nt];
    let mut d = vec![0.0; nt];
    for p in 0..npts {
        for (j, node) in u.nodes().iter().enumerate() {
            line[j] = node.samples()[p];
        }
        if order == 1 {
            d1(&line, dt, &mut d);
        } else {
            d2(&line, dt, &mut d);
        }
        for j in 0..nt {
            out[j][p] = d[j];
        }
    }
    let nodes = out
        .into_iter()
        .map(|s| GridField::new(*u.grid(), s))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(u.times().to_vec(), nodes)
}

/// `∂_t^order u` on the same nodes. Orders above two are built from the
/// first- and second-order stencils.
pub fn time_derivative(u: &SpaceTimeField, order: usize) -> Result<SpaceTimeField> {
    if order == 0 {
        return Ok(u.clone());
    }
    let needed = order + 2;
    if u.len_time() < needed {
        return Err(Error::TooFewNodes {
            needed,
            got: u.len_time(),
        });
    }
    let mut cur = apply_stencil(u, if order % 2 == 0 { 2 } else { 1 })?;
    let mut done = if order % 2 == 0 { 2 } else { 1 };
    while done < order {
        cur = apply_stencil(&cur, 2)?;
        done += 2;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::spectral::gradient;

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 16).unwrap()
    }

    #[test]
    fn linear_in_time_is_exact() {
        let times = SpaceTimeField::uniform_times(0.0, 0.1, 6);
        let u = SpaceTimeField::from_fn(grid(), times, |x, t| t * x[0].sin()).unwrap();
        let ut = time_derivative(&u, 1).unwrap();
        for node in ut.nodes() {
            let exact = GridField::from_fn(grid(), |x| x[0].sin()).unwrap();
            assert!(node.sub(&exact).unwrap().max_abs() < 1e-13);
        }
    }

    #[test]
    fn constant_in_time_gives_zero() {
        let times = SpaceTimeField::uniform_times(0.0, 0.25, 5);
        let u = SpaceTimeField::from_fn(grid(), times, |x, _| x[0].cos()).unwrap();
        for order in 1..=3 {
            assert!(time_derivative(&u, order).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_in_time_is_second_order() {
        let err = |nt: usize| {
            let dt = 1.0 / (nt - 1) as f64;
            let times = SpaceTimeField::uniform_times(0.0, dt, nt);
            let u = SpaceTimeField::from_fn(grid(), times.clone(), |x, t| t.cos() * x[0].sin())
                .unwrap();
            let exact =
                SpaceTimeField::from_fn(grid(), times, |x, t| -t.sin() * x[0].sin()).unwrap();
            time_derivative(&u, 1).unwrap().sub(&exact).unwrap().max_abs()
        };
        let ratio = err(21) / err(41);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn too_few_nodes() {
        let u = SpaceTimeField::zeros(grid(), vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            time_derivative(&u, 2),
            Err(Error::TooFewNodes { needed: 4, got: 3 })
        ));
        assert!(time_derivative(&u, 1).is_ok());
    }

    #[test]
    fn time_and_space_derivatives_commute() {
        let times = SpaceTimeField::uniform_times(0.0, 0.05, 11);
        let u = SpaceTimeField::from_fn(grid(), times, |x, t| (2.0 * t).sin() * (x[0] + t).cos())
            .unwrap();
        let dx_then_dt = time_derivative(
            &u.map_nodes(|f| Ok(gradient(f).remove(0))).unwrap(),
            1,
        )
        .unwrap();
        let dt_then_dx = time_derivative(&u, 1)
            .unwrap()
            .map_nodes(|f| Ok(gradient(f).remove(0)))
            .unwrap();
        assert!(dx_then_dt.sub(&dt_then_dx).unwrap().max_abs() < 1e-12);
    }
}
