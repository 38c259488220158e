use approx::assert_relative_eq;
use proptest::prelude::*;

use curveforge::curvature::{assemble_deformed_metric, DeformationField, ProductGrid, ProductManifoldSpec};
use curveforge::energy::{norm_energy_bridge_at, total_energy_at};
use curveforge::galerkin::{solve_fixed, LinearCoefficients};
use curveforge::picard::{residual_at, rhs_f_at};
use curveforge::random::{band_limited, rng};
use curveforge::spectral::{forward_transform, gradient, inverse_transform, laplacian};
use curveforge::time::time_derivative;
use curveforge::{GridField, SpaceTimeField, TorusGrid};

fn field(grid: TorusGrid, band: usize, amplitude: f64, seed: u64) -> GridField {
    band_limited(grid, band, 1.0, amplitude, &mut rng(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_and_round_trip(seed in any::<u64>(), dim in 1usize..=2, band in 1usize..6) {
        let g = TorusGrid::new(dim, 16).unwrap();
        let f = field(g, band.min(7), 1.0, seed);
        let spec = forward_transform(&f);
        let l2 = f.l2_norm().powi(2);
        prop_assert!((l2 - spec.energy()).abs() <= 1e-10 * l2);
        prop_assert!(inverse_transform(&spec).sub(&f).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn time_and_space_derivatives_commute(seed in any::<u64>()) {
        let g = TorusGrid::new(1, 16).unwrap();
        let a = field(g, 4, 1.0, seed);
        let b = field(g, 4, 1.0, seed ^ 1);
        let times: Vec<f64> = (0..9).map(|j| j as f64 * 0.1).collect();
        let u = SpaceTimeField::new(
            times.clone(),
            times.iter().map(|t| a.scale(t.cos()).unwrap().add(&b.scale(t * t).unwrap()).unwrap()).collect(),
        )
        .unwrap();
        let ut = time_derivative(&u, 1).unwrap();
        let grad_u = SpaceTimeField::new(times.clone(), u.nodes().iter().map(|n| gradient(n).remove(0)).collect()).unwrap();
        let lhs = time_derivative(&grad_u, 1).unwrap();
        for j in 0..times.len() {
            let rhs = gradient(ut.node(j)).remove(0);
            prop_assert!(lhs.node(j).sub(&rhs).unwrap().max_abs() <= 1e-10);
        }
    }

    #[test]
    fn energy_is_nonnegative_and_quadratic(seed in any::<u64>(), m in 1usize..=3, c in -3.0f64..3.0, s in 1usize..=3) {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = field(g, 4, 0.5, seed);
        let ut = field(g, 4, 0.5, seed.wrapping_add(1));
        let v = field(g, 3, 0.4, seed.wrapping_add(2));
        let e = total_energy_at(&u, &ut, &v, s, m).unwrap();
        prop_assert!(e >= 0.0);
        let ec = total_energy_at(&u.scale(c).unwrap(), &ut.scale(c).unwrap(), &v, s, m).unwrap();
        assert_relative_eq!(ec, c * c * e, max_relative = 1e-12, epsilon = 1e-300);
    }

    #[test]
    fn bridge_ratio_is_within_bound(seed in any::<u64>(), m in 1usize..=3, s in 1usize..=3, amp in 0.01f64..1.5) {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = field(g, 5, 1.0, seed);
        let ut = field(g, 5, 1.0, seed.wrapping_add(7));
        let v = field(g, 3, amp, seed.wrapping_add(9));
        let rep = norm_energy_bridge_at(&u, &ut, &v, s, m).unwrap();
        prop_assert!(rep.ratio.unwrap() <= rep.bound * (1.0 + 1e-12));
    }

    #[test]
    fn deformation_preserves_volume(seed in any::<u64>(), m in 1usize..=2, n in 1usize..=2, amp in 0.0f64..2.0) {
        let grid = ProductGrid::uniform(m, n, 6, 1.0).unwrap();
        let mut r = rng(seed);
        let samples: Vec<f64> = (0..grid.len()).map(|_| amp * (2.0 * rand::Rng::gen::<f64>(&mut r) - 1.0)).collect();
        let u = DeformationField::from_samples(&grid, samples).unwrap();
        let k = assemble_deformed_metric(&ProductManifoldSpec::flat(grid.clone()), &u).unwrap();
        for p in 0..grid.len() {
            prop_assert!((k.metric().det(p) - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn two_forms_of_the_equation_agree(seed in any::<u64>(), m in 1usize..=2) {
        let g = TorusGrid::new(m, 16).unwrap();
        let u = field(g, 3, 0.5, seed);
        let ut = field(g, 3, 0.5, seed.wrapping_add(1));
        let utt = field(g, 3, 0.5, seed.wrapping_add(2));
        let rtilde = field(g, 3, 1.0, seed.wrapping_add(3));
        let r_g = field(g, 3, 0.5, seed.wrapping_add(4));
        let f = rhs_f_at(&u, &ut, &u, &ut, &rtilde, &r_g, m).unwrap();
        let res = residual_at(&u, &ut, &utt, &rtilde, &r_g, m).unwrap();
        let lap = laplacian(&u);
        let mf = m as f64;
        for p in 0..g.len() {
            let x = u.samples()[p];
            let lhs = mf * utt.samples()[p] - (-2.0 * (mf + 1.0) * x).exp() * lap.samples()[p] - f.samples()[p];
            prop_assert!((lhs + (-2.0 * mf * x).exp() / 2.0 * res.samples()[p]).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn galerkin_solution_is_linear_in_the_data(seed in any::<u64>(), c in -2.0f64..2.0) {
        let g = TorusGrid::new(1, 16).unwrap();
        let times = vec![0.0, 0.1, 0.2];
        let st = |s: u64, amp: f64| {
            let f = field(g, 3, amp, s);
            SpaceTimeField::new(times.clone(), vec![f.clone(), f.scale(0.5).unwrap(), f]).unwrap()
        };
        let a = st(seed, 0.3);
        let alpha = st(seed ^ 2, 0.2).map_nodes(|n| n.map(|x| 1.0 + x)).unwrap();
        let beta = st(seed ^ 3, 0.1);
        let gamma = st(seed ^ 4, 0.1);
        let (f1, f2) = (st(seed ^ 5, 1.0), st(seed ^ 6, 1.0));
        let (p1, p2) = (field(g, 3, 1.0, seed ^ 7), field(g, 3, 1.0, seed ^ 8));
        let (q1, q2) = (field(g, 3, 1.0, seed ^ 9), field(g, 3, 1.0, seed ^ 10));
        let solve = |f: SpaceTimeField, p: &GridField, q: &GridField| {
            let coeffs = LinearCoefficients::with_auto_bound(a.clone(), alpha.clone(), beta.clone(), gamma.clone(), f).unwrap();
            solve_fixed(&coeffs, p, q, 4, 0.2, 0.01).unwrap().u
        };
        let u1 = solve(f1.clone(), &p1, &q1);
        let u2 = solve(f2.clone(), &p2, &q2);
        let f12 = f1.zip_nodes(&f2, |x, y| x.add(&y.scale(c)?)).unwrap();
        let u12 = solve(f12, &p1.add(&p2.scale(c).unwrap()).unwrap(), &q1.add(&q2.scale(c).unwrap()).unwrap());
        let combo = u1.zip_nodes(&u2, |x, y| x.add(&y.scale(c)?)).unwrap();
        let scale = 1.0 + combo.max_abs();
        prop_assert!(u12.sub(&combo).unwrap().max_abs() <= 1e-11 * scale);
    }
}
