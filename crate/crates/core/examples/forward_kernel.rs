//! Time-domain forward solve for a few incoming directions on the reduced
//! configuration: the scattering kernel, its support and the backscatter
//! samples it yields.
//!
//! cargo run --release --example forward_kernel

use std::time::Instant;

use lpscatter::forward::{ForwardSolver, Scheme};
use lpscatter::io::ExperimentConfig;

fn main() -> lpscatter::Result<()> {
    let cfg = ExperimentConfig::reduced();
    let v = cfg.phantom()?.field;
    let sphere = cfg.sphere()?;
    let fcfg = cfg.forward()?;
    let solver = ForwardSolver::new(&v, &sphere, &fcfg)?;
    println!(
        "n_side {}, {} directions, eps {}, dt * |V_LP| = {:.3}",
        v.grid.n_side,
        sphere.len(),
        fcfg.shape.epsilon,
        fcfg.dt.unwrap_or(fcfg.ds) * solver.operator_norm()?
    );

    let t = Instant::now();
    let traj = solver.solve(&cfg.probe_nodes, Scheme::Rk4)?;
    let kernel = solver.extract_kernel(&traj, 1e-6)?;
    println!("solve + kernel for {} incoming nodes in {:.2?}", cfg.probe_nodes.len(), t.elapsed());

    let cut = -2.0 * v.support_radius - 4.0 * fcfg.shape.epsilon;
    let s_map = cfg.s_map()?;
    for (jj, &node) in cfg.probe_nodes.iter().enumerate() {
        let theta = sphere.nodes[node];
        let back = sphere.find_node(&s_map.apply(&theta), 1e-12).expect("rule closed under S");
        let col = kernel.column(0, jj, back);
        let peak = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        println!(
            "theta_{node:<3} mass below s = {cut:.2}: {:.1e}; backscatter column peak {peak:.3e}",
            kernel.mass_fraction_below(0, jj, cut)
        );
    }
    Ok(())
}
