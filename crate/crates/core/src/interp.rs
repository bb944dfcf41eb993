//! One-dimensional interpolation kernels in the s-variable.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// How `radon_transpose` evaluates data between s-samples.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SInterp {
    /// Zero-padded FFT upsampling followed by 4-point Lagrange on the fine grid.
    #[default]
    Trigonometric,
    /// 4-point Lagrange directly on the data grid.
    Cubic,
}

pub const UPSAMPLE: usize = 8;

/// 4-point Lagrange weights for the nodes -1, 0, 1, 2 at offset `f` in [0, 1).
#[inline]
pub fn lagrange4(f: f64) -> [f64; 4] {
    let (fm1, f1, f2) = (f + 1.0, f - 1.0, f - 2.0);
    [-f * f1 * f2 / 6.0, fm1 * f1 * f2 / 2.0, -fm1 * f * f2 / 2.0, fm1 * f * f1 / 6.0]
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-Bessel windowed sinc of half-width `a` cells, tabulated.
/// `K(0) = 1`, `K(m) = 0` at other integers, so it interpolates samples.
#[derive(Clone, Debug)]
pub struct KbKernel {
    pub half_width: usize,
    pub beta: f64,
    res: usize,
    value: Vec<f64>,
    slope: Vec<f64>,
}

impl KbKernel {
    pub fn new(half_width: usize, beta: f64) -> Self {
        let res = 4096;
        let a = half_width as f64;
        let n = half_width * res + 2;
        let exact = |u: f64| -> f64 {
            if u.abs() >= a {
                return 0.0;
            }
            let sinc = if u == 0.0 { 1.0 } else { (PI * u).sin() / (PI * u) };
            let z = (1.0 - (u / a).powi(2)).max(0.0);
            sinc * bessel_i0(beta * z.sqrt()) / bessel_i0(beta)
        };
        let value: Vec<f64> = (0..n).map(|i| exact(i as f64 / res as f64)).collect();
        let hd = 0.25 / res as f64;
        let slope: Vec<f64> = (0..n)
            .map(|i| {
                let u = i as f64 / res as f64;
                if u == 0.0 {
                    0.0
                } else {
                    (exact(u + hd) - exact(u - hd)) / (2.0 * hd)
                }
            })
            .collect();
        KbKernel { half_width, beta, res, value, slope }
    }

    pub fn standard() -> Self {
        KbKernel::new(4, 8.0)
    }

    #[inline]
    fn lookup(table: &[f64], res: usize, x: f64) -> f64 {
        let p = x * res as f64;
        let i = p as usize;
        if i + 1 >= table.len() {
            return 0.0;
        }
        let f = p - i as f64;
        table[i] * (1.0 - f) + table[i + 1] * f
    }

    /// Kernel value at `u` (in cells).
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        Self::lookup(&self.value, self.res, u.abs())
    }

    /// Kernel derivative at `u` (per cell).
    #[inline]
    pub fn eval_d(&self, u: f64) -> f64 {
        let d = Self::lookup(&self.slope, self.res, u.abs());
        if u < 0.0 {
            -d
        } else {
            d
        }
    }
}
