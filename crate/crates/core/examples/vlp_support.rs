//! The potential in translation coordinates: V_LP is self-adjoint, turns real
//! data imaginary, gains one order of smoothness, and its output lives in
//! |s| <= rho whatever the input.
//!
//! cargo run --release --example vlp_support

use lpscatter::selftest::{vlp_adjoint_defect, vlp_leakage, vlp_reality_defect, SuiteSetup};
use lpscatter::vlp::{vlp_smoothing_report, VlpOperator};

fn main() -> lpscatter::Result<()> {
    let setup = SuiteSetup::new(32, 1.0, 17, 64, 0)?;
    println!("{} voxels per side, {} directions", setup.grid.n_side, setup.sphere.len());
    println!("self-adjointness defect   {:.2e}", vlp_adjoint_defect(&setup)?);
    println!("real -> imaginary defect  {:.2e}", vlp_reality_defect(&setup)?);
    let (outside, total) = vlp_leakage(&setup)?;
    println!("data vanishing on |s| <= rho: output mass outside {outside:.2e}, total {total:.2e} (relative to input)");

    let s_grid = setup.s_grid()?;
    let v = lpscatter::selftest::gaussian(&setup.grid.with_rho(0.6)?, [0.1, 0.0, 0.0], 0.15).scaled(2.0);
    let op = VlpOperator::new(&v, &s_grid, &setup.sphere)?;
    println!("|V_LP| ~ {:.4} (power iteration)", op.norm_estimate(30, 1)?);
    for row in vlp_smoothing_report(&op, 6, 2)? {
        println!("|V_LP g|_(k+1) / |g|_k at k = {:2}: max {:.4}, mean {:.4}", row.k, row.max_ratio, row.mean_ratio);
    }
    Ok(())
}
