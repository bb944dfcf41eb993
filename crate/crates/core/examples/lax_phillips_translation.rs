//! Free waves in the Lax-Phillips representation: the transform carries
//! energy to L^2 norm and free evolution to translation in s.
//!
//! cargo run --release --example lax_phillips_translation

use lpscatter::geometry::{sphere_quadrature, BallGrid, SGrid};
use lpscatter::laxphillips::{free_wave_evolve, lp_transform, translate, CauchyData};
use lpscatter::radon::ScalarField;

fn bump(grid: &BallGrid, c: [f64; 3], sigma: f64) -> ScalarField {
    ScalarField::from_fn(grid, grid.rho, |x| {
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
        (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

fn main() -> lpscatter::Result<()> {
    // data supported in |x| <= 0.5 on a box of half-width 1, room to move
    let grid = BallGrid::new(0.5, 1.0, 40)?;
    let s_grid = SGrid::symmetric(1.5, 128)?;
    let sphere = sphere_quadrature(23)?.shared();
    let u0 = bump(&grid, [0.05, 0.0, -0.05], 0.09);
    let v0 = bump(&grid, [-0.05, 0.05, 0.0], 0.1).scaled(3.0);
    let data = CauchyData::from_displacement_velocity(&u0, &v0)?;

    let k0 = lp_transform(&data, &s_grid, &sphere)?;
    println!("energy {:.6}, |LP|^2 {:.6}", data.energy(), k0.norm_l2().powi(2));
    println!("{:>6} {:>12} {:>14}", "t", "energy", "|LP u(t) - T_t LP u(0)| / |.|");
    for t in [0.1, 0.2, 0.3, 0.4] {
        let moved = free_wave_evolve(&data, t)?;
        let kt = lp_transform(&moved, &s_grid, &sphere)?;
        println!("{t:6.2} {:12.6} {:14.3e}", moved.energy(), kt.rel_error(&translate(&k0, t))?);
    }
    Ok(())
}
