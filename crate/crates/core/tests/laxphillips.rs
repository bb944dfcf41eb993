//! Free waves: energy conservation, the LP transform as an energy isometry and
//! the translation representation, on a 24^3 grid.

use std::sync::Arc;

use lpscatter::geometry::{sphere_quadrature, BallGrid, SGrid, SphereQuadrature};
use lpscatter::laxphillips::{free_wave_evolve, lp_transform, translate, CauchyData};
use lpscatter::radon::ScalarField;
use lpscatter::Error;

fn setup() -> (BallGrid, SGrid, Arc<SphereQuadrature>) {
    (
        BallGrid::new(0.5, 1.0, 24).unwrap(),
        SGrid::symmetric(1.5, 64).unwrap(),
        sphere_quadrature(17).unwrap().shared(),
    )
}

fn bump(grid: &BallGrid, c: [f64; 3], sigma: f64) -> ScalarField {
    ScalarField::from_fn(grid, grid.rho, |x| {
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
        (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

fn data(grid: &BallGrid) -> CauchyData {
    let u0 = bump(grid, [0.05, 0.0, 0.0], 0.1);
    let v0 = bump(grid, [0.0, -0.05, 0.05], 0.12).scaled(0.5);
    CauchyData::from_displacement_velocity(&u0, &v0).unwrap()
}

#[test]
fn free_evolution_conserves_energy() {
    let (grid, _, _) = setup();
    let d = data(&grid);
    let e0 = d.energy();
    for t in [0.1, 0.3, 0.5] {
        let e = free_wave_evolve(&d, t).unwrap().energy();
        assert!((e - e0).abs() < 1e-10 * e0, "t = {t}: {e} vs {e0}");
    }
}

#[test]
fn lp_transform_is_an_energy_isometry() {
    let (grid, s_grid, sphere) = setup();
    let d = data(&grid);
    let k = lp_transform(&d, &s_grid, &sphere).unwrap();
    let ratio = k.norm_l2().powi(2) / d.energy();
    assert!((ratio - 1.0).abs() < 5e-2, "|LP|^2 / E = {ratio}");
}

#[test]
fn free_waves_translate() {
    let (grid, s_grid, sphere) = setup();
    let d = data(&grid);
    let k0 = lp_transform(&d, &s_grid, &sphere).unwrap();
    for t in [0.2, 0.4] {
        let kt = lp_transform(&free_wave_evolve(&d, t).unwrap(), &s_grid, &sphere).unwrap();
        let e = kt.rel_error(&translate(&k0, t)).unwrap();
        assert!(e < 5e-2, "t = {t}: {e:.3e}");
    }
}

#[test]
fn translations_compose() {
    let (grid, s_grid, sphere) = setup();
    let k = lp_transform(&data(&grid), &s_grid, &sphere).unwrap();
    let a = translate(&translate(&k, 0.13), 0.21);
    let b = translate(&k, 0.34);
    assert!(a.rel_error(&b).unwrap() < 1e-12);
    assert!(translate(&translate(&k, 0.3), -0.3).rel_error(&k).unwrap() < 1e-12);
}

#[test]
fn evolution_past_the_box_is_refused() {
    let (grid, _, _) = setup();
    assert!(matches!(free_wave_evolve(&data(&grid), 0.8), Err(Error::SupportEscapesGrid(_))));
}
