//! Radon transform of a Gaussian, normalized isometry and inversion at the
//! reference resolution.
//!
//! cargo run --release --example radon_roundtrip

use std::time::Instant;

use lpscatter::geometry::{sphere_quadrature, BallGrid, SGrid};
use lpscatter::radon::{gaussian_radon, radon_forward, radon_inverse, radon_normalized, ScalarField};

fn main() -> lpscatter::Result<()> {
    let grid = BallGrid::new(1.0, 1.0, 48)?;
    let s_grid = SGrid::symmetric(1.25, 128)?;
    let sphere = sphere_quadrature(29)?.shared();
    let sigma = 0.2;
    let f = ScalarField::from_fn(&grid, 1.0, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp());

    let t = Instant::now();
    let rf = radon_forward(&f, &s_grid, &sphere)?;
    println!("R f: {} nodes x {} samples in {:.2?}", sphere.len(), s_grid.n_s, t.elapsed());

    let mut worst: f64 = 0.0;
    for k in 0..sphere.len() {
        for i in 0..s_grid.n_s {
            let exact = gaussian_radon(s_grid.s(i), sigma);
            worst = worst.max((rf.at(i, k).re - exact).abs());
        }
    }
    println!("max |Rf - 2 pi sigma^2 exp(-s^2/2sigma^2)| = {:.3e} (peak {:.4})", worst, gaussian_radon(0.0, sigma));

    let rn = radon_normalized(&f, &s_grid, &sphere)?;
    println!("|R_n f| / |f| = {:.5}, parity error {:.2e}", rn.norm_l2() / f.norm_l2(), rn.parity_error());

    let t = Instant::now();
    let back = radon_inverse(&rf, &grid)?;
    println!("inverse in {:.2?}, relative L2 error {:.3e}", t.elapsed(), back.rel_error(&f));
    Ok(())
}
