//! Test potentials supported in `B(rho)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, BallGrid, Vec3};
use crate::radon::{sobolev_norm, ScalarField};

/// A Gaussian counts as supported in `B(rho)` when `|center| + 3 sigma <= rho`;
/// it is hard-zeroed outside.
pub const GAUSSIAN_REACH: f64 = 3.0;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GaussianComponent {
    pub center: Vec3,
    pub sigma: f64,
    pub amplitude: f64,
}

impl GaussianComponent {
    fn eval(&self, x: &Vec3) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        self.amplitude * (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn reach(&self) -> f64 {
        norm(&self.center) + GAUSSIAN_REACH * self.sigma
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PhantomSpec {
    Gaussian { center: Vec3, sigma: f64, amplitude: f64 },
    GaussianMixture { components: Vec<GaussianComponent> },
    /// `amplitude * exp(1 - 1 / (1 - r^2))`, `r = |x - center| / radius`.
    MollifiedBall { center: Vec3, radius: f64, amplitude: f64 },
}

impl PhantomSpec {
    /// The bundled small-amplitude example used for closed-loop inversion.
    pub fn bundled_small() -> Self {
        PhantomSpec::Gaussian { center: [0.1, 0.0, -0.05], sigma: 0.28, amplitude: BUNDLED_AMPLITUDE }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            PhantomSpec::Gaussian { center, sigma, amplitude } => {
                PhantomSpec::Gaussian { center: *center, sigma: *sigma, amplitude: c * amplitude }
            }
            PhantomSpec::GaussianMixture { components } => PhantomSpec::GaussianMixture {
                components: components.iter().map(|g| GaussianComponent { amplitude: c * g.amplitude, ..*g }).collect(),
            },
            PhantomSpec::MollifiedBall { center, radius, amplitude } => {
                PhantomSpec::MollifiedBall { center: *center, radius: *radius, amplitude: c * amplitude }
            }
        }
    }

    /// Radius of a ball about the origin holding the (numerical) support.
    pub fn reach(&self) -> f64 {
        match self {
            PhantomSpec::Gaussian { center, sigma, amplitude } => {
                GaussianComponent { center: *center, sigma: *sigma, amplitude: *amplitude }.reach()
            }
            PhantomSpec::GaussianMixture { components } => components.iter().map(|g| g.reach()).fold(0.0, f64::max),
            PhantomSpec::MollifiedBall { center, radius, .. } => norm(center) + radius,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("phantom {what}")));
        match self {
            PhantomSpec::Gaussian { sigma, .. } if !(*sigma > 0.0) => bad("sigma must be positive"),
            PhantomSpec::GaussianMixture { components } if components.iter().any(|g| !(g.sigma > 0.0)) => {
                bad("sigmas must be positive")
            }
            PhantomSpec::MollifiedBall { radius, .. } if !(*radius > 0.0) => bad("radius must be positive"),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &Vec3) -> f64 {
        match self {
            PhantomSpec::Gaussian { center, sigma, amplitude } => {
                GaussianComponent { center: *center, sigma: *sigma, amplitude: *amplitude }.eval(x)
            }
            PhantomSpec::GaussianMixture { components } => components.iter().map(|g| g.eval(x)).sum(),
            PhantomSpec::MollifiedBall { center, radius, amplitude } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (radius * radius);
                if r2 >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
        }
    }
}

/// Amplitude of the bundled Gaussian: its quadratic backscattering defect is
/// about a tenth of the linear term at the reduced configuration.
pub const BUNDLED_AMPLITUDE: f64 = 1.3;

#[derive(Clone, Debug)]
pub struct Phantom {
    pub field: ScalarField,
    pub h2_norm: f64,
}

pub fn make_phantom(spec: &PhantomSpec, grid: &BallGrid) -> Result<Phantom> {
    spec.validate()?;
    let reach = spec.reach();
    if reach > grid.rho + 1e-12 {
        return Err(Error::SupportViolation(format!("phantom reaches radius {reach:.4} > rho {:.4}", grid.rho)));
    }
    let field = ScalarField::from_fn(grid, grid.rho, |x| spec.eval(x));
    let h2_norm = sobolev_norm(&field, 2)?;
    Ok(Phantom { field, h2_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_gaussian_peaks_at_origin() {
        let grid = BallGrid::new(1.0, 1.0, 17).unwrap();
        let p = make_phantom(&PhantomSpec::Gaussian { center: [0.0; 3], sigma: 0.2, amplitude: 1.0 }, &grid).unwrap();
        assert!((p.field.max_abs() - 1.0).abs() < 1e-12);
        let zero = make_phantom(&PhantomSpec::Gaussian { center: [0.0; 3], sigma: 0.2, amplitude: 0.0 }, &grid).unwrap();
        assert!(zero.field.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn support_is_certified() {
        let grid = BallGrid::new(1.0, 1.0, 12).unwrap();
        let wide = PhantomSpec::Gaussian { center: [0.5, 0.0, 0.0], sigma: 0.3, amplitude: 1.0 };
        assert!(matches!(make_phantom(&wide, &grid), Err(Error::SupportViolation(_))));
        let ball = PhantomSpec::MollifiedBall { center: [0.0, 0.2, 0.0], radius: 0.7, amplitude: 2.0 };
        let p = make_phantom(&ball, &grid).unwrap();
        for (i, v) in p.field.values.iter().enumerate() {
            if norm(&grid.point(i)) > 0.9 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    // |f|_{H^2}^2 of a Gaussian mixture as a sum of pair terms, each a radial
    // integral of (1 + r^2)^2 exp(-s r^2 / 2) sinc(r d) r^2 in frequency.
    fn mixture_h2(components: &[GaussianComponent]) -> f64 {
        let mut total = 0.0;
        for a in components {
            for b in components {
                let s = a.sigma * a.sigma + b.sigma * b.sigma;
                let d = norm(&[a.center[0] - b.center[0], a.center[1] - b.center[1], a.center[2] - b.center[2]]);
                let (n, r_max) = (40_000, 40.0 / s.sqrt());
                let dr = r_max / n as f64;
                let radial: f64 = (1..n)
                    .map(|i| {
                        let r = i as f64 * dr;
                        let sinc = if r * d < 1e-12 { 1.0 } else { (r * d).sin() / (r * d) };
                        r * r * (1.0 + r * r).powi(2) * (-0.5 * s * r * r).exp() * sinc
                    })
                    .sum::<f64>()
                    * dr;
                let prefactor = a.amplitude * b.amplitude * (a.sigma * b.sigma).powi(3) * 4.0 * std::f64::consts::PI;
                total += prefactor * radial;
            }
        }
        total.sqrt()
    }

    #[test]
    fn mixture_h2_norm_matches_closed_form() {
        let components = vec![
            GaussianComponent { center: [0.2, 0.0, 0.0], sigma: 0.15, amplitude: 1.0 },
            GaussianComponent { center: [-0.1, 0.2, 0.1], sigma: 0.2, amplitude: -0.6 },
            GaussianComponent { center: [0.0, -0.2, -0.2], sigma: 0.18, amplitude: 0.8 },
        ];
        let grid = BallGrid::new(1.0, 1.0, 48).unwrap();
        let p = make_phantom(&PhantomSpec::GaussianMixture { components: components.clone() }, &grid).unwrap();
        let exact = mixture_h2(&components);
        assert!((p.h2_norm - exact).abs() <= 0.05 * exact, "{} vs {exact}", p.h2_norm);
    }
}
