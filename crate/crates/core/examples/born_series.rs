//! Born terms of the forward solution by Volterra quadrature, and how fast
//! their norms fall off. At this weak potential they fall geometrically.
//!
//! cargo run --release --example born_series

use lpscatter::forward::{factorial_fit, ForwardSolver};
use lpscatter::io::ExperimentConfig;

fn main() -> lpscatter::Result<()> {
    let cfg = ExperimentConfig::reduced();
    let v = cfg.phantom()?.field;
    let sphere = cfg.sphere()?;
    let mut fcfg = cfg.forward()?;
    fcfg.check_stability = false;
    let solver = ForwardSolver::new(&v, &sphere, &fcfg)?;
    let terms = solver.born_terms(&cfg.probe_nodes, 6)?;
    let norms: Vec<f64> = (0..6).map(|j| terms.part(j).norm_l2()).collect();
    println!("{:>3} {:>12} {:>8}", "j", "|alpha_j|", "ratio");
    for (j, n) in norms.iter().enumerate() {
        let ratio = if j > 0 { format!("{:.4}", n / norms[j - 1]) } else { String::new() };
        println!("{:>3} {n:12.4e} {ratio:>8}", j + 1);
    }
    let fit = factorial_fit(1, &norms)?;
    println!("fit a b^j / j!: b = {:.4}, max log residual {:.3}", fit.log_b.exp(), fit.max_residual());
    Ok(())
}
