//! Simulated backscatter data for the bundled phantom and a few Picard steps
//! of the inversion, with the error measured inside the data band.
//!
//! cargo run --release --example backscatter_inversion

use std::time::Instant;

use lpscatter::backscatter::{filtered_relative_error, BackscatterModel, InversionConfig};
use lpscatter::io::ExperimentConfig;

fn main() -> lpscatter::Result<()> {
    let cfg = ExperimentConfig::reduced();
    let v = cfg.phantom()?.field;
    let sphere = cfg.sphere()?;
    let model = BackscatterModel::new(&v.grid, &sphere, &cfg.forward()?, &cfg.s_map()?)?;

    let t = Instant::now();
    let data = model.beta(&v)?;
    let linear = model.beta_linear(&v)?;
    println!("beta_S(V) in {:.1?}: |d| = {:.4e}, nonlinear part {:.2}%", t.elapsed(), data.norm_l2(),
        100.0 * data.rel_error(&linear)?);

    let icfg = InversionConfig { max_iters: 4, residual_tol: 1e-3, ..Default::default() };
    let result = model.invert(&data, &icfg, |k, vk| {
        let e = filtered_relative_error(&model, vk, &v).unwrap_or(f64::NAN);
        println!("iterate {k}: filtered error {e:.3e} ({:.0?})", t.elapsed());
    })?;
    for r in &result.log {
        println!("residual after {} steps: {:.3e}", r.iter, r.residual);
    }
    println!("monotone {}, converged {}", result.is_monotone(), result.converged);
    Ok(())
}
