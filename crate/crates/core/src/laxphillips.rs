//! The Lax-Phillips transform of Cauchy data and the exact spectral free wave
//! group, used to check the translation representation.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::geometry::{BallGrid, Constants, SGrid, SphereQuadrature};
use crate::radon::{ds_power, radon_forward, CylinderField, ScalarField};

type C64 = Complex64;

/// Cauchy data `(u(0), D_t u(0))` with `D_t = -i d/dt`. Values may be
/// complex: real solutions have real `u0` and imaginary `u1`.
#[derive(Clone, Debug)]
pub struct CauchyData {
    pub grid: BallGrid,
    pub u0: Vec<C64>,
    pub u1: Vec<C64>,
    pub support_radius: f64,
}

impl CauchyData {
    pub fn new(u0: &ScalarField, u1: &ScalarField) -> Result<Self> {
        if u0.grid != u1.grid {
            return Err(Error::GridMismatch("u0 and u1 on different grids".into()));
        }
        Ok(CauchyData {
            grid: u0.grid.clone(),
            u0: u0.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
            u1: u1.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
            support_radius: u0.support_radius.max(u1.support_radius),
        })
    }

    /// Data of the real solution with `u(0) = u0`, `d/dt u(0) = v0`.
    pub fn from_displacement_velocity(u0: &ScalarField, v0: &ScalarField) -> Result<Self> {
        let mut d = Self::new(u0, v0)?;
        d.u1.iter_mut().for_each(|v| *v = C64::new(0.0, -v.re));
        Ok(d)
    }

    /// `|grad u|^2 + |D_t u|^2` integrated, computed spectrally.
    pub fn energy(&self) -> f64 {
        let n = self.grid.n_side;
        let fr = fft::frequencies(n, self.grid.spacing);
        let mut a = self.u0.clone();
        let mut b = self.u1.clone();
        fft::fft3(&mut a, n, false);
        fft::fft3(&mut b, n, false);
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let idx = (i * n + j) * n + k;
                    let x2 = fr[i] * fr[i] + fr[j] * fr[j] + fr[k] * fr[k];
                    e += x2 * a[idx].norm_sqr() + b[idx].norm_sqr();
                }
            }
        }
        e * self.grid.cell_volume() / (n * n * n) as f64
    }

    fn part(&self, v: &[C64], imag: bool) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: v.iter().map(|c| if imag { c.im } else { c.re }).collect(),
            support_radius: self.support_radius,
        }
    }
}

fn radon_complex(v: &[C64], d: &CauchyData, s_grid: &SGrid, sphere: &Arc<SphereQuadrature>) -> Result<CylinderField> {
    let re = radon_forward(&d.part(v, false), s_grid, sphere)?;
    let im = radon_forward(&d.part(v, true), s_grid, sphere)?;
    Ok(re.add_scaled(C64::new(0.0, 1.0), &im))
}

/// `LP(u0, u1) = c_n (D_s^2 R u0 - D_s R u1)`.
pub fn lp_transform(d: &CauchyData, s_grid: &SGrid, sphere: &Arc<SphereQuadrature>) -> Result<CylinderField> {
    let c = Constants::three().c_n;
    let a = ds_power(&radon_complex(&d.u0, d, s_grid, sphere)?, 2)?;
    let b = ds_power(&radon_complex(&d.u1, d, s_grid, sphere)?, 1)?;
    let mut out = a.add_scaled(C64::new(-1.0, 0.0), &b).scaled(C64::new(c, 0.0));
    out.s_support = (-d.support_radius, d.support_radius);
    Ok(out)
}

/// Exact free evolution by the multipliers `cos(t|xi|)` and `sin(t|xi|)/|xi|`.
pub fn free_wave_evolve(d: &CauchyData, t: f64) -> Result<CauchyData> {
    let radius = d.support_radius + t.abs();
    if radius > d.grid.rho_box {
        return Err(Error::SupportEscapesGrid(format!(
            "support radius {radius:.4} after t = {t} exceeds the grid half-width {:.4}",
            d.grid.rho_box
        )));
    }
    let n = d.grid.n_side;
    let fr = fft::frequencies(n, d.grid.spacing);
    let mut a = d.u0.clone();
    let mut b = d.u1.clone();
    fft::fft3(&mut a, n, false);
    fft::fft3(&mut b, n, false);
    let i = C64::new(0.0, 1.0);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                let idx = (p * n + q) * n + r;
                let k = (fr[p] * fr[p] + fr[q] * fr[q] + fr[r] * fr[r]).sqrt();
                let (s, c) = (t * k).sin_cos();
                let sinc = if k == 0.0 { t } else { s / k };
                let (u, v) = (a[idx], b[idx]);
                a[idx] = c * u + i * sinc * v;
                b[idx] = i * k * s * u + c * v;
            }
        }
    }
    fft::fft3(&mut a, n, true);
    fft::fft3(&mut b, n, true);
    Ok(CauchyData { grid: d.grid.clone(), u0: a, u1: b, support_radius: radius })
}

/// `(T_t k)(s, w) = k(s - t, w)` by exact spectral translation.
pub fn translate(k: &CylinderField, t: f64) -> CylinderField {
    let mut out = crate::radon::s_multiplier(k, |s| C64::from_polar(1.0, -s * t));
    out.s_support = (k.s_support.0 + t, k.s_support.1 + t);
    out
}
