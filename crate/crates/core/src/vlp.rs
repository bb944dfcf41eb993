//! The potential operator `V_LP = c^2 D_s R V R^t` on cylinder data.
//!
//! Applied matrix-free with the gridded pair: `R^t` interpolates the data with
//! a windowed sinc, and `D_s R` is the derivative splat of `V R^t g`. In the
//! discrete inner products the adjoint is `-i c^2 R V R^t d/ds`, evaluated
//! with the same kernels, so power iteration sees an exact adjoint.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::geometry::{real_sph_harmonics, Constants, SGrid, SphereQuadrature};
use crate::gridded::{GriddedRadon, SLayout};
use crate::radon::{sobolev_norm_cylinder, CylinderField, ScalarField};

type C64 = Complex64;

/// Immutable after construction; `apply` is pure.
#[derive(Clone, Debug)]
pub struct VlpOperator {
    pub potential: ScalarField,
    pub s_grid: SGrid,
    pub sphere: Arc<SphereQuadrature>,
    pub constants: Constants,
    /// Zero the output outside `|s| <= rho`, where the exact operator vanishes.
    pub truncate: bool,
    pair: GriddedRadon,
    vals: Vec<f64>,
}

impl VlpOperator {
    pub fn new(potential: &ScalarField, s_grid: &SGrid, sphere: &Arc<SphereQuadrature>) -> Result<Self> {
        let pair = GriddedRadon::new(&potential.grid, potential.support_radius, sphere, s_grid.ds);
        let lay = layout(s_grid);
        pair.check_layout(&lay, 0.0).map_err(|_| {
            Error::SRangeTooSmall(format!(
                "s-grid [{:.4}, {:.4}] must cover the support {:.4} plus the kernel reach {:.4}",
                s_grid.s_min,
                s_grid.s_max(),
                potential.support_radius,
                pair.reach()
            ))
        })?;
        let vals = pair.voxels.iter().map(|&i| potential.values[i]).collect();
        Ok(VlpOperator {
            potential: potential.clone(),
            s_grid: s_grid.clone(),
            sphere: sphere.clone(),
            constants: Constants::three(),
            truncate: true,
            pair,
            vals,
        })
    }

    pub fn rho(&self) -> f64 {
        self.potential.support_radius
    }

    fn check(&self, g: &CylinderField) -> Result<()> {
        if g.s_grid != self.s_grid {
            return Err(Error::GridMismatch("s-grid differs from the operator's".into()));
        }
        if !Arc::ptr_eq(&g.sphere, &self.sphere) && g.sphere.nodes != self.sphere.nodes {
            return Err(Error::GridMismatch("sphere quadrature differs from the operator's".into()));
        }
        Ok(())
    }

    /// Real and imaginary parts as two interleaved columns.
    fn split(g: &CylinderField) -> Vec<f64> {
        g.values.iter().flat_map(|v| [v.re, v.im]).collect()
    }

    fn join(&self, data: &[f64], factor: C64) -> CylinderField {
        let mut out = CylinderField::zeros(&self.s_grid, &self.sphere);
        let n = self.s_grid.n_s;
        let rho = self.rho();
        for (j, v) in out.values.iter_mut().enumerate() {
            if self.truncate && self.s_grid.s(j % n).abs() > rho {
                continue;
            }
            *v = factor * C64::new(data[2 * j], data[2 * j + 1]);
        }
        out.s_support = (-rho, rho);
        out
    }

    fn weighted(&self, mut vox: Vec<f64>) -> Vec<f64> {
        for (j, v) in self.vals.iter().enumerate() {
            vox[2 * j] *= v;
            vox[2 * j + 1] *= v;
        }
        vox
    }

    /// `c^2 D_s R (V R^t g)`.
    pub fn apply(&self, g: &CylinderField) -> Result<CylinderField> {
        self.check(g)?;
        let lay = layout(&self.s_grid);
        let mut vox = vec![0.0; 2 * self.pair.n_voxels()];
        self.pair.gather(&Self::split(g), &lay, 0.0, 2, false, &mut vox);
        let vox = self.weighted(vox);
        let mut data = vec![0.0; 2 * g.values.len()];
        self.pair.splat(&vox, &lay, 0.0, 2, true, &mut data);
        // D_s = -i d/ds
        Ok(self.join(&data, C64::new(0.0, -self.constants.c_sq())))
    }

    /// Adjoint in the discrete inner products: `-i c^2 R V R^t (d/ds) g`.
    /// Exact when `truncate` is off; otherwise it is the adjoint of the
    /// untruncated operator followed by the truncation.
    pub fn apply_adjoint(&self, g: &CylinderField) -> Result<CylinderField> {
        self.check(g)?;
        let lay = layout(&self.s_grid);
        let mut vox = vec![0.0; 2 * self.pair.n_voxels()];
        self.pair.gather(&Self::split(g), &lay, 0.0, 2, true, &mut vox);
        let vox = self.weighted(vox);
        let mut data = vec![0.0; 2 * g.values.len()];
        self.pair.splat(&vox, &lay, 0.0, 2, false, &mut data);
        Ok(self.join(&data, C64::new(0.0, -self.constants.c_sq())))
    }

    /// Operator norm estimate by power iteration on `A^H A`.
    pub fn norm_estimate(&self, iters: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = CylinderField::zeros(&self.s_grid, &self.sphere);
        x.values.iter_mut().for_each(|v| *v = C64::new(rng.gen_range(-1.0..1.0), 0.0));
        let mut lam = 0.0;
        for _ in 0..iters {
            let nx = x.norm_l2();
            if nx == 0.0 {
                return Ok(0.0);
            }
            x = x.scaled(C64::new(1.0 / nx, 0.0));
            let y = self.apply_adjoint(&self.apply(&x)?)?;
            lam = x.inner(&y).re.max(0.0);
            x = y;
        }
        Ok(lam.sqrt())
    }

    /// Dense matrix of the operator, row-major over the flattened cylinder
    /// index `k * n_s + i`. Only for tiny grids.
    pub fn assemble_dense(&self) -> Result<Vec<Vec<C64>>> {
        let dim = self.s_grid.n_s * self.sphere.len();
        if self.s_grid.n_s > 32 || self.sphere.len() > 50 {
            return Err(Error::InvalidConfig(format!(
                "dense assembly needs n_s <= 32 and at most 50 nodes, got {} x {}",
                self.s_grid.n_s,
                self.sphere.len()
            )));
        }
        let mut rows = vec![vec![C64::new(0.0, 0.0); dim]; dim];
        let mut e = CylinderField::zeros(&self.s_grid, &self.sphere);
        for col in 0..dim {
            e.values[col] = C64::new(1.0, 0.0);
            let y = self.apply(&e)?;
            e.values[col] = C64::new(0.0, 0.0);
            for (row, v) in y.values.iter().enumerate() {
                rows[row][col] = *v;
            }
        }
        Ok(rows)
    }

    /// Same operator with the potential scaled by `c`.
    pub fn with_scaled_potential(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.potential = self.potential.scaled(c);
        out.vals.iter_mut().for_each(|v| *v *= c);
        out
    }
}

pub(crate) fn layout(s_grid: &SGrid) -> SLayout {
    SLayout { s0: s_grid.s_min, ds: s_grid.ds, n: s_grid.n_s }
}

/// Random data smooth in both variables: low-degree spherical harmonics with
/// coefficients drawn as band-limited noise in s, windowed to `|s| <= support`.
pub fn random_band_limited(
    s_grid: &SGrid,
    sphere: &Arc<SphereQuadrature>,
    band: f64,
    support: f64,
    lmax: usize,
    rng: &mut impl Rng,
) -> CylinderField {
    let n = s_grid.n_s;
    let freqs = s_grid.frequencies();
    let n_harm = (lmax + 1) * (lmax + 1);
    let coeffs: Vec<Vec<f64>> = (0..n_harm)
        .map(|_| {
            let mut c: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
            fft::forward(&mut c, n);
            for (v, s) in c.iter_mut().zip(&freqs) {
                *v *= (-0.5 * (s / band).powi(2)).exp();
            }
            fft::inverse(&mut c, n);
            (0..n)
                .map(|i| {
                    let s = s_grid.s(i) / support;
                    let w = if s.abs() < 1.0 { (1.0 - s * s).powi(4) } else { 0.0 };
                    c[i].re * w
                })
                .collect()
        })
        .collect();
    let mut g = CylinderField::zeros(s_grid, sphere);
    for (k, node) in sphere.nodes.iter().enumerate() {
        let y = real_sph_harmonics(lmax, node);
        for i in 0..n {
            let v: f64 = y.iter().zip(&coeffs).map(|(a, c)| a * c[i]).sum();
            g.values[k * n + i] = C64::new(v, 0.0);
        }
    }
    g.s_support = (-support, support);
    g
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SmoothingRow {
    pub k: i32,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

/// `sobolev_norm(V_LP g, k+1) / sobolev_norm(g, k)` over random band-limited
/// `g`, for `k` in {-1, 0, 1}.
pub fn vlp_smoothing_report(op: &VlpOperator, trials: usize, seed: u64) -> Result<Vec<SmoothingRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = 0.25 * std::f64::consts::PI / op.s_grid.ds.max(op.potential.grid.spacing);
    let samples: Vec<(CylinderField, CylinderField)> = (0..trials)
        .map(|_| {
            let g = random_band_limited(&op.s_grid, &op.sphere, band, op.rho(), 3, &mut rng);
            let out = op.apply(&g)?;
            Ok((g, out))
        })
        .collect::<Result<_>>()?;
    [-1, 0, 1]
        .iter()
        .map(|&k| {
            let mut ratios = Vec::with_capacity(trials);
            for (g, out) in &samples {
                let den = sobolev_norm_cylinder(g, k)?;
                ratios.push(if den > 0.0 { sobolev_norm_cylinder(out, k + 1)? / den } else { 0.0 });
            }
            let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
            let mean_ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
            Ok(SmoothingRow { k, max_ratio, mean_ratio })
        })
        .collect()
}
