use std::sync::Arc;

use approx::assert_relative_eq;
use fbmcf::monitors::interior_density_value;
use fbmcf::{AnalyticSurface, GraphSurface, Grid, SupportPatch, Vec3};
use proptest::prelude::*;

fn curved() -> SupportPatch {
    SupportPatch::paraboloid(0.5, 1.0).unwrap()
}

fn chart_point() -> impl Strategy<Value = [f64; 3]> {
    (-0.4..0.4f64, -0.3..0.3f64, -0.4..0.4f64).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection_is_an_involution(y in chart_point()) {
        let p = curved();
        let x = p.tubular_map(y).unwrap();
        let back = p.reflect(&p.reflect(&x).unwrap()).unwrap();
        prop_assert!((back - x).norm() < 1e-10);
    }

    #[test]
    fn reflection_flips_the_normal_coordinate(y in chart_point()) {
        let p = curved();
        let x = p.tubular_map(y).unwrap();
        let mirrored = p.tubular_map([y[0], -y[1], y[2]]).unwrap();
        prop_assert!((p.reflect(&x).unwrap() - mirrored).norm() < 1e-10);
    }

    #[test]
    fn chart_inverse_round_trip(y in chart_point()) {
        let p = curved();
        let x = p.tubular_map(y).unwrap();
        let c = p.chart_coordinates(&x).unwrap();
        for k in 0..3 {
            prop_assert!((c[k] - y[k]).abs() < 1e-9);
        }
        let proj = p.project_and_distance(&x).unwrap();
        prop_assert!((proj.distance - y[1]).abs() < 1e-9);
    }

    #[test]
    fn chart_is_scale_covariant(y in chart_point(), lambda in 0.2..3.0f64) {
        let p = curved();
        let scaled = p.rescaled(&Vec3::zeros(), lambda);
        let a = p.tubular_map(y).unwrap() / lambda;
        let b = scaled.tubular_map([y[0] / lambda, y[1] / lambda, y[2] / lambda]).unwrap();
        prop_assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
        prop_assert!((scaled.kappa() - lambda * p.kappa()).abs() < 1e-15);
    }

    #[test]
    fn christoffel_symbols_match_metric_differences(y in chart_point()) {
        let p = curved();
        let mc = p.pullback_metric_connection(y).unwrap();
        let d = 1e-5;
        let mut dh = [nalgebra::Matrix3::<f64>::zeros(); 3];
        for (l, dl) in dh.iter_mut().enumerate() {
            let mut yp = y;
            let mut ym = y;
            yp[l] += d;
            ym[l] -= d;
            let hp = p.pullback_metric_connection(yp).unwrap().metric;
            let hm = p.pullback_metric_connection(ym).unwrap().metric;
            *dl = (hp - hm) / (2.0 * d);
        }
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut g = 0.0;
                    for l in 0..3 {
                        g += 0.5 * mc.inverse[(k, l)] * (dh[i][(j, l)] + dh[j][(i, l)] - dh[l][(i, j)]);
                    }
                    prop_assert!((g - mc.christoffel[k][i][j]).abs() < 1e-6, "Γ^{}_{}{}: {} vs {}", k, i, j, g, mc.christoffel[k][i][j]);
                }
            }
        }
    }

    #[test]
    fn rescaling_composes(lambda in 0.1..2.0f64, mu in 0.1..2.0f64, px in -0.2..0.2f64) {
        let grid = Arc::new(Grid::half_disk(0.5, 1.0 / 16.0).unwrap());
        let s = GraphSurface::from_fn(grid, Arc::new(SupportPatch::flat()), 0.0, |a, b| 0.3 * a * a + 0.1 * b * b).unwrap().samples().unwrap();
        let p = Vec3::new(px, 0.0, 0.1);
        let twice = s.transformed(&p, lambda).transformed(&Vec3::zeros(), mu);
        let once = s.transformed(&p, lambda * mu);
        for (a, b) in twice.points.iter().zip(&once.points) {
            prop_assert!((a.point.position - b.point.position).amax() <= 1e-12 * (1.0 + b.point.position.amax()));
            prop_assert!((a.point.mean_curvature - b.point.mean_curvature).abs() <= 1e-12 * (1.0 + b.point.mean_curvature.abs()));
        }
    }

    #[test]
    fn density_is_scale_invariant(lambda in 0.3..3.0f64, tau in 0.01..0.1f64) {
        let c = Vec3::new(0.1, -0.2, 0.3);
        let p = Vec3::new(0.0, 0.1, 0.0);
        let r = 0.5;
        let src = AnalyticSurface::sphere(c, r).unwrap();
        let frame = AnalyticSurface::sphere((c - p) / lambda, r / lambda).unwrap();
        let a = interior_density_value(&src, 0.0, &p, tau, 2.0).unwrap();
        let b = interior_density_value(&frame, 0.0, &Vec3::zeros(), tau / (lambda * lambda), 2.0 / lambda).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
    }

    #[test]
    fn gauss_bonnet_on_round_surfaces(r in 0.05..5.0f64) {
        let flat = Arc::new(SupportPatch::flat());
        let hemi = AnalyticSurface::hemisphere(flat, Vec3::zeros(), r).unwrap().gauss_bonnet().unwrap();
        prop_assert!(hemi.residual.abs() < 1e-8);
        assert_relative_eq!(hemi.lhs, 4.0 * std::f64::consts::PI, max_relative = 1e-9);
    }
}
