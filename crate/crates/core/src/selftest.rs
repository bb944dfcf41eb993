//! Invariant suites shared by the `selftest` subcommand and the acceptance
//! test. Each check reports a measured defect against its tolerance.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::geometry::{norm, sphere_quadrature, BallGrid, SGrid, SphereQuadrature, Vec3};
use crate::interp::KbKernel;
use crate::laxphillips::{free_wave_evolve, lp_transform, translate, CauchyData};
use crate::radon::{ds_power, laplacian, radon_forward, radon_inverse, radon_normalized, smooth_s, CylinderField, ScalarField};
use crate::spectral_born::resolvent_identity_check;
use crate::vlp::{random_band_limited, VlpOperator};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Radon,
    Lp,
    Vlp,
    Resolvent,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radon" => Ok(Suite::Radon),
            "lp" => Ok(Suite::Lp),
            "vlp" => Ok(Suite::Vlp),
            "resolvent" => Ok(Suite::Resolvent),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidConfig(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
}

impl Check {
    fn new(suite: &str, name: &str, value: f64, tolerance: f64, start: Instant) -> Self {
        Check {
            suite: suite.into(),
            name: name.into(),
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// Grid, sphere rule and s-grid for the transform suites.
#[derive(Clone, Debug)]
pub struct SuiteSetup {
    pub grid: BallGrid,
    pub sphere: Arc<SphereQuadrature>,
    pub n_s: usize,
    pub seed: u64,
}

impl SuiteSetup {
    pub fn new(n_side: usize, rho: f64, sphere_degree: usize, n_s: usize, seed: u64) -> Result<Self> {
        Ok(SuiteSetup {
            grid: BallGrid::new(rho, rho, n_side)?,
            sphere: sphere_quadrature(sphere_degree)?.shared(),
            n_s,
            seed,
        })
    }

    /// `n_side = 48`, 302 nodes, `n_s = 128`, `rho = 1`.
    pub fn reference() -> Result<Self> {
        Self::new(48, 1.0, 29, 128, 0)
    }

    /// Transform s-grid: `n_s` samples over `|s| <= 1.25 rho`, lengthened on
    /// coarse grids until it holds the support plus the voxel kernel reach.
    pub fn s_grid(&self) -> Result<SGrid> {
        let rho = self.grid.rho;
        let mut half = 1.25 * rho;
        for _ in 0..4 {
            let ds = 2.0 * half / self.n_s as f64;
            let reach = KbKernel::standard().half_width as f64 * self.grid.spacing.max(ds);
            half = half.max(rho + reach + 2.0 * ds);
        }
        SGrid::symmetric(half, self.n_s)
    }
}

pub fn gaussian(grid: &BallGrid, center: Vec3, sigma: f64) -> ScalarField {
    ScalarField::from_fn(grid, grid.rho, |x| {
        let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
        (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * sigma * sigma)).exp()
    })
}

/// White noise low-passed by `exp(-|xi|^2 / 2 band^2)` and windowed by
/// `(1 - r^2 / r_w^2)^4` with `r_w = 0.8 rho`.
pub fn random_band_limited_field(grid: &BallGrid, band: f64, rng: &mut impl Rng) -> ScalarField {
    let n = grid.n_side;
    let mut data: Vec<C64> = (0..grid.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    fft::fft3(&mut data, n, false);
    let fr = fft::frequencies(n, grid.spacing);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x2 = fr[i] * fr[i] + fr[j] * fr[j] + fr[k] * fr[k];
                data[(i * n + j) * n + k] *= (-0.5 * x2 / (band * band)).exp();
            }
        }
    }
    fft::fft3(&mut data, n, true);
    let rw = 0.8 * grid.rho;
    let values = (0..grid.len())
        .map(|i| {
            let r = norm(&grid.point(i)) / rw;
            if r < 1.0 {
                data[i].re * (1.0 - r * r).powi(4)
            } else {
                0.0
            }
        })
        .collect();
    ScalarField { grid: grid.clone(), values, support_radius: rw }
}

/// Worst relative isometry defect `| |R_n f| - |f| | / |f|` over `trials` fields.
pub fn isometry_defect(setup: &SuiteSetup, trials: usize) -> Result<f64> {
    let s_grid = setup.s_grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let band = 0.25 * std::f64::consts::PI / setup.grid.spacing;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let f = random_band_limited_field(&setup.grid, band, &mut rng);
        let rn = radon_normalized(&f, &s_grid, &setup.sphere)?;
        worst = worst.max((rn.norm_l2() - f.norm_l2()).abs() / f.norm_l2());
    }
    Ok(worst)
}

fn phantoms(grid: &BallGrid) -> Vec<ScalarField> {
    vec![gaussian(grid, [0.0; 3], 0.2), gaussian(grid, [0.25, -0.1, 0.15], 0.15)]
}

/// Worst `|R^-1 R f - f| / |f|` over two Gaussian phantoms.
pub fn inversion_defect(setup: &SuiteSetup) -> Result<f64> {
    let s_grid = setup.s_grid()?;
    let mut worst: f64 = 0.0;
    for f in phantoms(&setup.grid) {
        let back = radon_inverse(&radon_forward(&f, &s_grid, &setup.sphere)?, &setup.grid)?;
        worst = worst.max(back.rel_error(&f));
    }
    Ok(worst)
}

/// Relative defect of `R (Delta f)` against `D_s^2 R f`.
pub fn intertwining_defect(setup: &SuiteSetup) -> Result<f64> {
    let s_grid = setup.s_grid()?;
    let mut worst: f64 = 0.0;
    for f in phantoms(&setup.grid) {
        let mut lap = laplacian(&f);
        // the Gaussian tails beyond rho are below double precision
        lap.support_radius = setup.grid.rho;
        lap.enforce_support();
        let lhs = radon_forward(&lap, &s_grid, &setup.sphere)?;
        let rhs = ds_power(&radon_forward(&f, &s_grid, &setup.sphere)?, 2)?;
        worst = worst.max(lhs.rel_error(&rhs)?);
    }
    Ok(worst)
}

/// Largest parity defect of `R_n f` relative to its norm.
pub fn parity_defect(setup: &SuiteSetup) -> Result<f64> {
    let s_grid = setup.s_grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed + 1);
    let f = random_band_limited_field(&setup.grid, 0.25 * std::f64::consts::PI / setup.grid.spacing, &mut rng);
    let rn = radon_normalized(&f, &s_grid, &setup.sphere)?;
    Ok(rn.parity_error() / rn.norm_l2())
}

pub const LP_TIMES: [f64; 3] = [0.15, 0.3, 0.45];

/// Worst relative defect of `LP(U_0(t) d)` against `T_t LP(d)` at [`LP_TIMES`].
pub fn translation_defect(setup: &SuiteSetup) -> Result<f64> {
    let grid = &setup.grid;
    let radius = 0.5 * grid.rho;
    let bump = |c: Vec3, sigma: f64| {
        ScalarField::from_fn(grid, radius, |x| {
            let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
            (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * sigma * sigma)).exp()
        })
    };
    let u0 = bump([0.05, 0.0, -0.05], 0.09);
    let v0 = bump([-0.05, 0.05, 0.0], 0.1).scaled(3.0);
    let data = CauchyData::from_displacement_velocity(&u0, &v0)?;
    let s_grid = setup.s_grid()?;
    let lp0 = lp_transform(&data, &s_grid, &setup.sphere)?;
    let mut worst: f64 = 0.0;
    for &t in &LP_TIMES {
        let moved = lp_transform(&free_wave_evolve(&data, t)?, &s_grid, &setup.sphere)?;
        worst = worst.max(moved.rel_error(&translate(&lp0, t))?);
    }
    Ok(worst)
}

/// Resolvent identity at `lambda = -i` for a Gaussian, on a long s-grid.
pub fn resolvent_defect(setup: &SuiteSetup) -> Result<f64> {
    let f = gaussian(&setup.grid, [0.0; 3], 0.25);
    let s_grid = SGrid::with_spacing(8.0, 2.0 * setup.grid.rho / setup.n_s as f64)?;
    Ok(resolvent_identity_check(&f, C64::new(0.0, -1.0), &s_grid, &setup.sphere, 3)?.defect)
}

fn vlp_operator(setup: &SuiteSetup) -> Result<(VlpOperator, SGrid)> {
    let grid = &setup.grid;
    let v = ScalarField::from_fn(grid, grid.rho, |x| {
        let r2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (grid.rho * grid.rho);
        if r2 < 1.0 {
            (1.0 - 1.0 / (1.0 - r2)).exp() * (1.0 + 0.5 * x[0])
        } else {
            0.0
        }
    });
    let s_grid = SGrid::with_spacing(2.0 * grid.rho, grid.spacing)?;
    Ok((VlpOperator::new(&v, &s_grid, &setup.sphere)?, s_grid))
}

/// Untruncated `V_LP g` for random `g` vanishing on `|s| <= rho`, then
/// smoothed by one cell: relative mass of the output outside `|s| <= rho`
/// and its total relative mass.
pub fn vlp_leakage(setup: &SuiteSetup) -> Result<(f64, f64)> {
    let (mut op, s_grid) = vlp_operator(setup)?;
    op.truncate = false;
    let rho = setup.grid.rho;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed + 2);
    let mut g = random_band_limited(&s_grid, &setup.sphere, 4.0, s_grid.half_length(), 3, &mut rng);
    let n = s_grid.n_s;
    for (j, v) in g.values.iter_mut().enumerate() {
        if s_grid.s(j % n).abs() <= rho {
            *v = C64::new(0.0, 0.0);
        }
    }
    let g = smooth_s(&g, 1.0);
    let out = op.apply(&g)?;
    Ok((out.norm_outside(rho) / g.norm_l2(), out.norm_l2() / g.norm_l2()))
}

/// `|<V_LP a, b> - <a, V_LP b>|` relative to `|<V_LP a, b>|`.
pub fn vlp_adjoint_defect(setup: &SuiteSetup) -> Result<f64> {
    let (mut op, s_grid) = vlp_operator(setup)?;
    op.truncate = false;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed + 3);
    let a = random_band_limited(&s_grid, &setup.sphere, 6.0, 1.5, 3, &mut rng);
    let b = random_band_limited(&s_grid, &setup.sphere, 6.0, 1.5, 3, &mut rng).scaled(C64::new(0.3, 0.7));
    let lhs = op.apply(&a)?.inner(&b);
    let rhs = a.inner(&op.apply_adjoint(&b)?);
    Ok((lhs - rhs).norm() / lhs.norm())
}

/// `i V_LP` maps real data to real data.
pub fn vlp_reality_defect(setup: &SuiteSetup) -> Result<f64> {
    let (op, s_grid) = vlp_operator(setup)?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed + 4);
    let g: CylinderField = random_band_limited(&s_grid, &setup.sphere, 6.0, 1.5, 3, &mut rng);
    let out = op.apply(&g)?.scaled(C64::new(0.0, 1.0));
    Ok(out.norm_imag() / g.norm_l2())
}

fn timed(suite: &str, name: &str, tol: f64, f: impl FnOnce() -> Result<f64>) -> Result<Check> {
    let start = Instant::now();
    Ok(Check::new(suite, name, f()?, tol, start))
}

pub fn run_suite(suite: Suite, setup: &SuiteSetup) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Radon | Suite::All) {
        out.push(timed("radon", "isometry", 2e-2, || isometry_defect(setup, 20))?);
        out.push(timed("radon", "inversion", 3e-2, || inversion_defect(setup))?);
        out.push(timed("radon", "intertwining", 2e-2, || intertwining_defect(setup))?);
        out.push(timed("radon", "parity", 1e-10, || parity_defect(setup))?);
    }
    if matches!(suite, Suite::Lp | Suite::All) {
        out.push(timed("lp", "translation", 2e-2, || translation_defect(setup))?);
    }
    if matches!(suite, Suite::Vlp | Suite::All) {
        out.push(timed("vlp", "self_adjoint", 1e-10, || vlp_adjoint_defect(setup))?);
        out.push(timed("vlp", "real", 1e-10, || vlp_reality_defect(setup))?);
        out.push(timed("vlp", "support", 1e-8, || Ok(vlp_leakage(setup)?.0))?);
    }
    if matches!(suite, Suite::Resolvent | Suite::All) {
        out.push(timed("resolvent", "identity_minus_i", 5e-2, || resolvent_defect(setup))?);
    }
    Ok(out)
}
