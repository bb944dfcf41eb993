//! First and second Born terms from the time-domain solver against their
//! closed-form transforms, for true backscattering and a rotoreflection.
//!
//! cargo run --release --example spectral_born_check

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;

use lpscatter::geometry::OrthogonalMap;
use lpscatter::io::ExperimentConfig;
use lpscatter::spectral_born::compare_born_terms;

fn main() -> lpscatter::Result<()> {
    let cfg = ExperimentConfig::reduced();
    let v = cfg.phantom()?.field;
    let sphere = cfg.sphere()?;
    let fcfg = cfg.forward()?;
    let lambdas = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(1.0, -1.0), C64::new(-1.5, -1.0)];
    for (name, s_map, j_max) in [
        ("S = -Id", OrthogonalMap::backscatter(), 2),
        ("rotoreflection pi/2", OrthogonalMap::rotoreflection_z(FRAC_PI_2)?, 1),
    ] {
        println!("{name}");
        for c in compare_born_terms(&v, &sphere, &fcfg, &s_map, &[7, 20], &lambdas, j_max, 3)? {
            println!(
                "  kappa_{} node {:>2} lambda {:>5.2}{:+.2}i: time domain {:+.4e}{:+.4e}i, closed form {:+.4e}{:+.4e}i, defect {:.2e}",
                c.order, c.node, c.lambda[0], c.lambda[1], c.time_domain[0], c.time_domain[1], c.spectral[0], c.spectral[1], c.rel_defect
            );
        }
    }
    Ok(())
}
