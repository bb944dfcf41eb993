//! Sphere rules, scattering maps and the discrete Radon transform against
//! closed forms on small grids.

use std::f64::consts::PI;

use lpscatter::geometry::{
    sphere_quadrature, sphere_quadrature_at_least, supported_orders, BallGrid, OrthogonalMap, SGrid, SphereQuadrature,
};
use lpscatter::radon::{
    gaussian_radon, radon_forward, radon_fourier_slice, radon_inverse, radon_normalized, radon_normalized_adjoint,
    ScalarField,
};
use lpscatter::Error;

fn gaussian(grid: &BallGrid, sigma: f64) -> ScalarField {
    ScalarField::from_fn(grid, grid.rho, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp())
}

#[test]
fn sphere_rules_integrate_monomials() {
    // int x^2 = 4 pi / 3, int x^4 = 4 pi / 5, int x^2 y^2 = 4 pi / 15
    for order in supported_orders() {
        let q = sphere_quadrature(order).unwrap();
        assert!((q.integrate(|_| 1.0) - 4.0 * PI).abs() < 1e-12);
        assert!((q.integrate(|p| p[0] * p[0]) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((q.integrate(|p| p[2].powi(4)) - 4.0 * PI / 5.0).abs() < 1e-12);
        assert!((q.integrate(|p| p[0] * p[0] * p[1] * p[1]) - 4.0 * PI / 15.0).abs() < 1e-12);
        assert!(q.integrate(|p| p[0] * p[1].powi(3)).abs() < 1e-12);
        for (k, &a) in q.antipode.iter().enumerate() {
            assert_eq!(q.antipode[a], k);
            assert_eq!(q.weights[a], q.weights[k]);
        }
    }
}

#[test]
fn reference_rule_has_302_nodes() {
    assert_eq!(sphere_quadrature(29).unwrap().len(), 302);
    assert_eq!(sphere_quadrature_at_least(26).unwrap().degree, 29);
    assert!(matches!(sphere_quadrature(13), Err(Error::UnsupportedOrder(13))));
}

#[test]
fn node_tables_are_checked() {
    let ok = "1 0 0 6.283185307179586\n-1 0 0 6.283185307179586 # comment\n";
    assert_eq!(SphereQuadrature::parse(ok, 1).unwrap().len(), 2);
    let no_antipode = "1 0 0 6.283185307179586\n0 1 0 6.283185307179586\n";
    assert!(SphereQuadrature::parse(no_antipode, 1).is_err());
    assert!(SphereQuadrature::parse("1 0 0\n", 1).is_err());
    assert!(SphereQuadrature::parse("1 0 0 1\n-1 0 0 1\n", 1).is_err());
}

#[test]
fn scattering_maps_are_validated() {
    let b = OrthogonalMap::backscatter();
    assert!((b.det_id_minus_s - 8.0).abs() < 1e-14);
    assert!((b.dilation() - 2.0).abs() < 1e-12);
    let r = OrthogonalMap::rotoreflection_z(PI / 2.0).unwrap();
    assert!((r.dilation() - 2.0).abs() < 1e-12);
    // a rotation fixes its axis, so Id - S is singular
    assert!(matches!(
        OrthogonalMap::new([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        Err(Error::IdMinusSSingular { .. })
    ));
    assert!(matches!(
        OrthogonalMap::new([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.001]]),
        Err(Error::NotOrthogonal { .. })
    ));
}

#[test]
fn grids_reject_bad_parameters() {
    assert!(matches!(BallGrid::new(1.0, 1.0, 4), Err(Error::GridTooCoarse(_))));
    assert!(BallGrid::new(1.0, 0.5, 16).is_err());
    assert!(SGrid::symmetric(1.0, 48).is_err());
    let s = SGrid::symmetric(1.0, 16).unwrap();
    assert!(s.is_symmetric());
    for i in 0..16 {
        assert!((s.s(s.mirror(i)) + s.s(i)).abs() < 1e-15 || s.mirror(i) == 0);
    }
    assert!(matches!(s.check_covers(1.5), Err(Error::SRangeTooSmall(_))));
}

#[test]
fn gaussian_plane_integrals_match_closed_form() {
    let grid = BallGrid::new(0.8, 1.0, 24).unwrap();
    let sigma = 0.2;
    let f = gaussian(&grid, sigma);
    let s_grid = SGrid::symmetric(1.25, 64).unwrap();
    let sphere = sphere_quadrature(11).unwrap().shared();
    let rf = radon_forward(&f, &s_grid, &sphere).unwrap();
    let peak = gaussian_radon(0.0, sigma);
    let mut worst: f64 = 0.0;
    for k in 0..sphere.len() {
        for i in 0..s_grid.n_s {
            worst = worst.max((rf.at(i, k) - gaussian_radon(s_grid.s(i), sigma)).norm());
        }
    }
    assert!(worst < 1e-2 * peak, "max deviation {worst:.3e} of peak {peak:.3e}");
}

#[test]
fn voxel_quadrature_agrees_with_fourier_slice() {
    let grid = BallGrid::new(1.0, 1.0, 16).unwrap();
    let f = ScalarField::from_fn(&grid, 0.7, |x| {
        let r2 = (x[0] - 0.15).powi(2) + (x[1] + 0.1).powi(2) + x[2] * x[2];
        (-r2 / 0.1).exp() * (1.0 + x[0])
    });
    // ds = h: the slice integral then stays inside the voxel band and does not alias
    let s_grid = SGrid::symmetric(2.0, 32).unwrap();
    let sphere = sphere_quadrature(11).unwrap().shared();
    let a = radon_forward(&f, &s_grid, &sphere).unwrap();
    let b = radon_fourier_slice(&f, &s_grid, &sphere).unwrap();
    let e = a.rel_error(&b).unwrap();
    assert!(e < 5e-3, "relative difference {e:.3e}");
}

#[test]
fn normalized_transform_is_isometric_and_invertible() {
    let grid = BallGrid::new(0.8, 1.0, 24).unwrap();
    let f = gaussian(&grid, 0.2);
    let s_grid = SGrid::symmetric(1.25, 64).unwrap();
    let sphere = sphere_quadrature(17).unwrap().shared();
    let rn = radon_normalized(&f, &s_grid, &sphere).unwrap();
    let ratio = rn.norm_l2() / f.norm_l2();
    assert!((ratio - 1.0).abs() < 2e-2, "|R_n f| / |f| = {ratio}");
    assert!(rn.parity_error() < 1e-10);

    // <R_n f, R_n f> = <R_n^t R_n f, f>
    let back = radon_normalized_adjoint(&rn, &grid).unwrap();
    let lhs = rn.norm_l2().powi(2);
    let rhs = back.inner(&f);
    assert!((lhs - rhs).abs() < 2e-2 * lhs, "{lhs} vs {rhs}");

    let rf = radon_forward(&f, &s_grid, &sphere).unwrap();
    let inv = radon_inverse(&rf, &grid).unwrap();
    assert!(inv.rel_error(&f) < 5e-2, "inversion error {}", inv.rel_error(&f));
}

#[test]
fn support_outside_s_grid_is_an_error() {
    let grid = BallGrid::new(1.0, 1.0, 16).unwrap();
    let f = gaussian(&grid, 0.2);
    let sphere = sphere_quadrature(11).unwrap().shared();
    let short = SGrid::symmetric(0.5, 16).unwrap();
    assert!(matches!(radon_forward(&f, &short, &sphere), Err(Error::SRangeTooSmall(_))));
}
