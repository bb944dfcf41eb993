//! Discrete Radon transform `R`, its transpose, the normalized isometry
//! `R_n = c D_s R`, Fourier multipliers in `s`, inversion and Sobolev norms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::gridded::{GriddedRadon, SLayout};
use crate::geometry::{dot, norm, BallGrid, Constants, SGrid, SphereQuadrature, Vec3};
use crate::interp::{lagrange4, SInterp, UPSAMPLE};

type C64 = Complex64;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Real potential-like field on a `BallGrid`, exactly zero outside `support_radius`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScalarField {
    pub grid: BallGrid,
    pub values: Vec<f64>,
    pub support_radius: f64,
}

impl ScalarField {
    pub fn zeros(grid: &BallGrid) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.len()], support_radius: grid.rho }
    }

    /// Samples `f` at grid points with `|x| <= radius`, zero elsewhere.
    pub fn from_fn<F: Fn(&Vec3) -> f64>(grid: &BallGrid, radius: f64, f: F) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                if norm(&p) <= radius {
                    f(&p)
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField { grid: grid.clone(), values, support_radius: radius }
    }

    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn inner(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c * other`; the support radius is the larger of the two.
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> Self {
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        out.support_radius = self.support_radius.max(other.support_radius);
        out
    }

    /// Zero every value outside `support_radius`.
    pub fn enforce_support(&mut self) {
        for i in 0..self.values.len() {
            if norm(&self.grid.point(i)) > self.support_radius {
                self.values[i] = 0.0;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Relative L2 distance `|self - other| / |other|`.
    pub fn rel_error(&self, reference: &ScalarField) -> f64 {
        let d: f64 = self.values.iter().zip(&reference.values).map(|(a, b)| (a - b).powi(2)).sum();
        let r: f64 = reference.values.iter().map(|b| b * b).sum();
        (d / r).sqrt()
    }

    /// Trilinear interpolation; points outside the cube read as zero.
    pub fn sample(&self, p: &Vec3) -> f64 {
        if norm(p) > self.support_radius + 2.0 * self.grid.spacing {
            return 0.0;
        }
        trilinear(&self.values, &self.grid, p)
    }
}

pub(crate) fn trilinear(values: &[f64], grid: &BallGrid, p: &Vec3) -> f64 {
    let n = grid.n_side as i64;
    let h = grid.spacing;
    let q = [
        (p[0] + grid.rho_box) / h - 0.5,
        (p[1] + grid.rho_box) / h - 0.5,
        (p[2] + grid.rho_box) / h - 0.5,
    ];
    let i0 = [q[0].floor() as i64, q[1].floor() as i64, q[2].floor() as i64];
    let f = [q[0] - i0[0] as f64, q[1] - i0[1] as f64, q[2] - i0[2] as f64];
    let mut acc = 0.0;
    for (di, wi) in [(0, 1.0 - f[0]), (1, f[0])] {
        let i = i0[0] + di;
        if i < 0 || i >= n || wi == 0.0 {
            continue;
        }
        for (dj, wj) in [(0, 1.0 - f[1]), (1, f[1])] {
            let j = i0[1] + dj;
            if j < 0 || j >= n || wj == 0.0 {
                continue;
            }
            for (dk, wk) in [(0, 1.0 - f[2]), (1, f[2])] {
                let k = i0[2] + dk;
                if k < 0 || k >= n || wk == 0.0 {
                    continue;
                }
                acc += wi * wj * wk * values[((i * n + j) * n + k) as usize];
            }
        }
    }
    acc
}

/// Complex data on `s_grid x sphere`, node-major: `values[k * n_s + i]`.
#[derive(Clone, Debug)]
pub struct CylinderField {
    pub s_grid: SGrid,
    pub sphere: Arc<SphereQuadrature>,
    pub values: Vec<C64>,
    /// Declared s-interval outside of which the data are (numerically) zero.
    pub s_support: (f64, f64),
    /// Set when the data are expected to satisfy `v(-s, -w) = -v(s, w)`.
    pub parity: bool,
}

impl CylinderField {
    pub fn zeros(s_grid: &SGrid, sphere: &Arc<SphereQuadrature>) -> Self {
        CylinderField {
            s_grid: s_grid.clone(),
            sphere: sphere.clone(),
            values: vec![ZERO; s_grid.n_s * sphere.len()],
            s_support: (s_grid.s_min, s_grid.s_max()),
            parity: false,
        }
    }

    pub fn from_fn<F: Fn(f64, &Vec3) -> C64>(s_grid: &SGrid, sphere: &Arc<SphereQuadrature>, f: F) -> Self {
        let mut g = Self::zeros(s_grid, sphere);
        for k in 0..sphere.len() {
            for i in 0..s_grid.n_s {
                g.values[k * s_grid.n_s + i] = f(s_grid.s(i), &sphere.nodes[k]);
            }
        }
        g
    }

    pub fn n_s(&self) -> usize {
        self.s_grid.n_s
    }

    pub fn n_nodes(&self) -> usize {
        self.sphere.len()
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize) -> C64 {
        self.values[k * self.s_grid.n_s + i]
    }

    pub fn column(&self, k: usize) -> &[C64] {
        let n = self.s_grid.n_s;
        &self.values[k * n..(k + 1) * n]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [C64] {
        let n = self.s_grid.n_s;
        &mut self.values[k * n..(k + 1) * n]
    }

    /// `<a, b> = sum ds w_k conj(a) b`.
    pub fn inner(&self, other: &CylinderField) -> C64 {
        let n = self.s_grid.n_s;
        let mut acc = ZERO;
        for k in 0..self.n_nodes() {
            let mut col = ZERO;
            for i in 0..n {
                col += self.values[k * n + i].conj() * other.values[k * n + i];
            }
            acc += col * self.sphere.weights[k];
        }
        acc * self.s_grid.ds
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// L2 norm of the imaginary part.
    pub fn norm_imag(&self) -> f64 {
        let n = self.s_grid.n_s;
        let mut acc = 0.0;
        for k in 0..self.n_nodes() {
            acc += self.sphere.weights[k] * self.values[k * n..(k + 1) * n].iter().map(|v| v.im * v.im).sum::<f64>();
        }
        (acc * self.s_grid.ds).sqrt()
    }

    /// L2 norm restricted to samples with `|s| > radius`.
    pub fn norm_outside(&self, radius: f64) -> f64 {
        let n = self.s_grid.n_s;
        let mut acc = 0.0;
        for k in 0..self.n_nodes() {
            for i in 0..n {
                if self.s_grid.s(i).abs() > radius {
                    acc += self.sphere.weights[k] * self.values[k * n + i].norm_sqr();
                }
            }
        }
        (acc * self.s_grid.ds).sqrt()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: C64, other: &CylinderField) -> Self {
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        out
    }

    /// `max |v(-s,-w) + v(s,w)| / max |v|` on a symmetric grid.
    pub fn parity_error(&self) -> f64 {
        let n = self.s_grid.n_s;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..self.n_nodes() {
            let ka = self.sphere.antipode[k];
            for i in 0..n {
                let a = self.values[k * n + i];
                let b = self.values[ka * n + self.s_grid.mirror(i)];
                worst = worst.max((a + b).norm());
                scale = scale.max(a.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn check_same_layout(&self, other: &CylinderField) -> Result<()> {
        if self.s_grid != other.s_grid || self.n_nodes() != other.n_nodes() {
            return Err(Error::GridMismatch("cylinder fields on different grids".into()));
        }
        Ok(())
    }

    pub fn rel_error(&self, reference: &CylinderField) -> Result<f64> {
        self.check_same_layout(reference)?;
        Ok(self.add_scaled(C64::new(-1.0, 0.0), reference).norm_l2() / reference.norm_l2())
    }

    /// Zero all samples with `s` outside `[lo, hi]`.
    pub fn restrict_s(&self, lo: f64, hi: f64) -> Self {
        let mut out = self.clone();
        let n = self.s_grid.n_s;
        for k in 0..self.n_nodes() {
            for i in 0..n {
                let s = self.s_grid.s(i);
                if s < lo || s > hi {
                    out.values[k * n + i] = ZERO;
                }
            }
        }
        out.s_support = (lo.max(self.s_support.0), hi.min(self.s_support.1));
        out
    }
}

/// Orthonormal tangent pair for the plane orthogonal to `w`. Depends only on
/// the line through `w`, so `w` and `-w` sample identical planes.
pub fn tangent_basis(w: &Vec3) -> (Vec3, Vec3) {
    let sign = if w[2] != 0.0 {
        w[2].signum()
    } else if w[1] != 0.0 {
        w[1].signum()
    } else {
        w[0].signum()
    };
    let c = [w[0] * sign, w[1] * sign, w[2] * sign];
    let a = if c[0].abs() <= c[1].abs() && c[0].abs() <= c[2].abs() {
        [1.0, 0.0, 0.0]
    } else if c[1].abs() <= c[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = cross(&c, &a);
    let n1 = norm(&e1);
    let e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = cross(&c, &e1);
    (e1, e2)
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Plane integrals `Rf(s_i, w_k)`. Each voxel value is spread onto the
/// s-samples of every direction with a band-limited kernel of width
/// `max(ds, h)`, a quadrature that is spectrally accurate for band-limited `f`
/// and smooth in `s`. Exactly zero for `|s| > support_radius`.
pub fn radon_forward(f: &ScalarField, s_grid: &SGrid, sphere: &Arc<SphereQuadrature>) -> Result<CylinderField> {
    let grid = &f.grid;
    if grid.n_side < crate::geometry::MIN_N_SIDE {
        return Err(Error::GridTooCoarse(format!("n_side = {}", grid.n_side)));
    }
    s_grid.check_covers(f.support_radius)?;
    let op = GriddedRadon::new(grid, f.support_radius, sphere, s_grid.ds);
    let lay = SLayout { s0: s_grid.s_min, ds: s_grid.ds, n: s_grid.n_s };
    op.check_layout(&lay, 0.0).map_err(|_| {
        Error::SRangeTooSmall(format!("s-grid must cover the support plus {:.4}", op.reach()))
    })?;
    let vals: Vec<f64> = op.voxels.iter().map(|&i| f.values[i]).collect();
    let mut data = vec![0.0; sphere.len() * s_grid.n_s];
    op.splat(&vals, &lay, 0.0, 1, false, &mut data);
    let mut out = CylinderField::zeros(s_grid, sphere);
    for (i, v) in data.iter().enumerate() {
        if s_grid.s(i % s_grid.n_s).abs() <= f.support_radius {
            out.values[i] = C64::new(*v, 0.0);
        }
    }
    out.s_support = (-f.support_radius, f.support_radius);
    Ok(out)
}

/// Plane integrals by a 2D trapezoid rule on each plane with trilinear
/// sampling of `f`. Exactly zero for `|s| > support_radius`.
pub fn radon_forward_plane(f: &ScalarField, s_grid: &SGrid, sphere: &Arc<SphereQuadrature>) -> Result<CylinderField> {
    let grid = &f.grid;
    if grid.n_side < crate::geometry::MIN_N_SIDE {
        return Err(Error::GridTooCoarse(format!("n_side = {}", grid.n_side)));
    }
    s_grid.check_covers(f.support_radius)?;
    let h = grid.spacing;
    let reach = f.support_radius + 2.0 * h;
    let jmax = (reach / h).ceil() as i64;
    let mut out = CylinderField::zeros(s_grid, sphere);
    let n = s_grid.n_s;
    for (k, w) in sphere.nodes.iter().enumerate() {
        let (e1, e2) = tangent_basis(w);
        for i in 0..n {
            let s = s_grid.s(i);
            if s.abs() > f.support_radius {
                continue;
            }
            let r2 = reach * reach - s * s;
            let mut acc = 0.0;
            for a in -jmax..=jmax {
                let av = a as f64 * h;
                if av * av > r2 {
                    continue;
                }
                let base = [s * w[0] + av * e1[0], s * w[1] + av * e1[1], s * w[2] + av * e1[2]];
                for b in -jmax..=jmax {
                    let bv = b as f64 * h;
                    if av * av + bv * bv > r2 {
                        continue;
                    }
                    let p = [base[0] + bv * e2[0], base[1] + bv * e2[1], base[2] + bv * e2[2]];
                    acc += trilinear(&f.values, grid, &p);
                }
            }
            out.values[k * n + i] = C64::new(acc * h * h, 0.0);
        }
    }
    out.s_support = (-f.support_radius, f.support_radius);
    Ok(out)
}

/// Fourier-slice evaluation of `Rf`: `Rf(s, w) = (2 pi)^{-1} int f^(sigma w) e^{i sigma s} d sigma`
/// with `f^` summed directly over voxels. Independent cross-check of
/// `radon_forward`; cost grows like voxels x n_s x nodes, so keep grids small.
pub fn radon_fourier_slice(f: &ScalarField, s_grid: &SGrid, sphere: &Arc<SphereQuadrature>) -> Result<CylinderField> {
    s_grid.check_covers(f.support_radius)?;
    let grid = &f.grid;
    let vol = grid.cell_volume();
    let support: Vec<(Vec3, f64)> =
        (0..grid.len()).filter(|&i| f.values[i] != 0.0).map(|i| (grid.point(i), f.values[i])).collect();
    let freqs = s_grid.frequencies();
    let n = s_grid.n_s;
    let mut out = CylinderField::zeros(s_grid, sphere);
    let mut spec = vec![ZERO; n];
    for (k, w) in sphere.nodes.iter().enumerate() {
        for (m, &sig) in freqs.iter().enumerate() {
            let mut acc = ZERO;
            for (p, v) in &support {
                acc += C64::from_polar(*v, -sig * dot(p, w));
            }
            // shift to the grid origin s_min so that the inverse DFT lands on s_i
            spec[m] = acc * vol * C64::from_polar(1.0, sig * s_grid.s_min) / s_grid.ds;
        }
        if n.is_multiple_of(2) {
            spec[n / 2] = C64::new(spec[n / 2].re, 0.0);
        }
        fft::inverse(&mut spec, n);
        for i in 0..n {
            out.values[k * n + i] = C64::new(spec[i].re, 0.0);
        }
    }
    out.s_support = (-f.support_radius, f.support_radius);
    Ok(out)
}

/// Back projection `R^t g(x) = sum_k w_k g(x . w_k, w_k)` evaluated on grid
/// points with `|x| <= grid.rho`; complex values.
pub fn radon_transpose_complex(g: &CylinderField, grid: &BallGrid, interp: SInterp) -> Result<Vec<C64>> {
    let sg = &g.s_grid;
    let n = sg.n_s;
    let lo = sg.s_min;
    let hi = sg.s_max();
    if grid.rho > -lo || grid.rho > hi {
        let bad = if grid.rho > -lo { -grid.rho } else { grid.rho };
        return Err(Error::InterpolationOutOfRange { value: bad, lo, hi });
    }
    let pts: Vec<(usize, Vec3)> =
        (0..grid.len()).map(|i| (i, grid.point(i))).filter(|(_, p)| norm(p) <= grid.rho).collect();
    let mut out = vec![ZERO; grid.len()];
    let (factor, nf) = match interp {
        SInterp::Trigonometric => (UPSAMPLE, n * UPSAMPLE),
        SInterp::Cubic => (1, n),
    };
    let dsf = sg.ds / factor as f64;
    let mut fine = vec![ZERO; nf];
    for k in 0..g.n_nodes() {
        let col = g.column(k);
        match interp {
            SInterp::Trigonometric => upsample(col, &mut fine),
            SInterp::Cubic => fine.copy_from_slice(col),
        }
        let w = &g.sphere.nodes[k];
        let wk = g.sphere.weights[k];
        for (idx, p) in &pts {
            let u = dot(p, w);
            let q = (u - lo) / dsf;
            let i0 = q.floor() as i64;
            let lw = lagrange4(q - i0 as f64);
            let mut v = ZERO;
            for (m, wt) in lw.iter().enumerate() {
                let j = (i0 - 1 + m as i64).rem_euclid(nf as i64) as usize;
                v += fine[j] * *wt;
            }
            out[*idx] += v * wk;
        }
    }
    Ok(out)
}

/// Band-limited upsampling by zero padding in the DFT domain.
fn upsample(col: &[C64], fine: &mut [C64]) {
    let n = col.len();
    let nf = fine.len();
    let mut spec = col.to_vec();
    fft::forward(&mut spec, n);
    fine.iter_mut().for_each(|v| *v = ZERO);
    fine[..n / 2].copy_from_slice(&spec[..n / 2]);
    for k in n / 2 + 1..n {
        fine[nf - n + k] = spec[k];
    }
    fine[n / 2] = spec[n / 2] * 0.5;
    fine[nf - n / 2] = spec[n / 2] * 0.5;
    fft::inverse(fine, nf);
    let up = (nf / n) as f64;
    fine.iter_mut().for_each(|v| *v *= up);
}

/// Real part of the back projection as a field supported in `B(grid.rho)`.
pub fn radon_transpose(g: &CylinderField, grid: &BallGrid) -> Result<ScalarField> {
    radon_transpose_with(g, grid, SInterp::Trigonometric)
}

pub fn radon_transpose_with(g: &CylinderField, grid: &BallGrid, interp: SInterp) -> Result<ScalarField> {
    let v = radon_transpose_complex(g, grid, interp)?;
    Ok(ScalarField { grid: grid.clone(), values: v.iter().map(|c| c.re).collect(), support_radius: grid.rho })
}

/// Fourier multiplier `sigma^m` in s, node by node. Odd powers drop the
/// Nyquist mode; negative powers require a vanishing zero mode.
pub fn ds_power(g: &CylinderField, m: i32) -> Result<CylinderField> {
    if !(-2..=4).contains(&m) {
        return Err(Error::UnsupportedOrder(m as i64));
    }
    if m == 0 {
        return Ok(g.clone());
    }
    let freqs = g.s_grid.frequencies();
    let n = g.n_s();
    let mult: Vec<f64> = freqs
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            if j == 0 || (n.is_multiple_of(2) && j == n / 2 && m % 2 != 0) {
                0.0
            } else {
                s.powi(m)
            }
        })
        .collect();
    let mut out = g.clone();
    for k in 0..g.n_nodes() {
        let col = out.column_mut(k);
        fft::forward(col, n);
        if m < 0 {
            let scale = col.iter().fold(0.0f64, |a, v| a.max(v.norm()));
            if col[0].norm() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NonIntegrableMode(col[0].norm() / scale));
            }
        }
        for (v, mu) in col.iter_mut().zip(&mult) {
            *v *= *mu;
        }
        fft::inverse(col, n);
    }
    Ok(out)
}

/// General Fourier multiplier `m(sigma)` in s.
pub fn s_multiplier<F: Fn(f64) -> C64>(g: &CylinderField, m: F) -> CylinderField {
    let freqs = g.s_grid.frequencies();
    let n = g.n_s();
    let mult: Vec<C64> = freqs.iter().map(|&s| m(s)).collect();
    let mut out = g.clone();
    for k in 0..g.n_nodes() {
        let col = out.column_mut(k);
        fft::forward(col, n);
        for (v, mu) in col.iter_mut().zip(&mult) {
            *v *= *mu;
        }
        fft::inverse(col, n);
    }
    out
}

/// Gaussian smoothing in s with standard deviation `cells * ds`.
pub fn smooth_s(g: &CylinderField, cells: f64) -> CylinderField {
    let w = cells * g.s_grid.ds;
    s_multiplier(g, |s| C64::new((-0.5 * (s * w).powi(2)).exp(), 0.0))
}

/// `R_n f = c_n D_s R f`; parity flag set.
pub fn radon_normalized(f: &ScalarField, s_grid: &SGrid, sphere: &Arc<SphereQuadrature>) -> Result<CylinderField> {
    let c = Constants::three().c_n;
    let mut out = ds_power(&radon_forward(f, s_grid, sphere)?, 1)?.scaled(C64::new(c, 0.0));
    out.parity = true;
    Ok(out)
}

/// `R_n^t g = c_n R^t D_s g`.
pub fn radon_normalized_adjoint(g: &CylinderField, grid: &BallGrid) -> Result<ScalarField> {
    let c = Constants::three().c_n;
    Ok(radon_transpose(&ds_power(g, 1)?, grid)?.scaled(c))
}

/// `f = (1 / 8 pi^2) R^t D_s^2 g` for data `g = Rf`.
pub fn radon_inverse(g: &CylinderField, grid: &BallGrid) -> Result<ScalarField> {
    let pf = Constants::three().plancherel_factor;
    Ok(radon_transpose(&ds_power(g, 2)?, grid)?.scaled(pf))
}

/// Apply a radial 3D Fourier multiplier `m(|xi|^2)` on the periodic cube.
pub fn fourier_multiplier_3d<F: Fn(f64) -> f64>(f: &ScalarField, m: F) -> Vec<f64> {
    let n = f.grid.n_side;
    let mut data: Vec<C64> = f.values.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft::fft3(&mut data, n, false);
    let fr = fft::frequencies(n, f.grid.spacing);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x2 = fr[i] * fr[i] + fr[j] * fr[j] + fr[k] * fr[k];
                data[(i * n + j) * n + k] *= m(x2);
            }
        }
    }
    fft::fft3(&mut data, n, true);
    data.iter().map(|c| c.re).collect()
}

/// Spectral positive Laplacian `-nabla^2 f` on the periodic cube (not masked).
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let values = fourier_multiplier_3d(f, |x2| x2);
    ScalarField { grid: f.grid.clone(), values, support_radius: f.grid.rho_box * 3f64.sqrt() }
}

/// Sobolev norm `|(1 + |xi|^2)^{k/2} f^|` via the 3D DFT of the cube.
pub fn sobolev_norm(f: &ScalarField, k: i32) -> Result<f64> {
    if !(-3..=3).contains(&k) {
        return Err(Error::UnsupportedOrder(k as i64));
    }
    let n = f.grid.n_side;
    let mut data: Vec<C64> = f.values.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft::fft3(&mut data, n, false);
    let fr = fft::frequencies(n, f.grid.spacing);
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let x2 = fr[i] * fr[i] + fr[j] * fr[j] + fr[l] * fr[l];
                acc += data[(i * n + j) * n + l].norm_sqr() * (1.0 + x2).powi(k);
            }
        }
    }
    Ok((acc * f.grid.cell_volume() / (n * n * n) as f64).sqrt())
}

/// Cylinder Sobolev norm: `(1 + sigma^2)^{k/2}` in s plus, for `k >= 1`, a
/// tangential term built from differences between neighbouring sphere nodes.
pub fn sobolev_norm_cylinder(g: &CylinderField, k: i32) -> Result<f64> {
    if !(-3..=3).contains(&k) {
        return Err(Error::UnsupportedOrder(k as i64));
    }
    let n = g.n_s();
    let freqs = g.s_grid.frequencies();
    let sphere = &g.sphere;
    let mut spectra: Vec<Vec<C64>> = Vec::with_capacity(g.n_nodes());
    let mut acc = 0.0;
    for kk in 0..g.n_nodes() {
        let mut col = g.column(kk).to_vec();
        fft::forward(&mut col, n);
        let e: f64 = col.iter().zip(&freqs).map(|(v, s)| v.norm_sqr() * (1.0 + s * s).powi(k)).sum();
        acc += sphere.weights[kk] * e;
        spectra.push(col);
    }
    if k >= 1 {
        let nb = neighbours(sphere, 6);
        for kk in 0..g.n_nodes() {
            let mut t = 0.0;
            for &l in &nb[kk] {
                let d = {
                    let a = &sphere.nodes[kk];
                    let b = &sphere.nodes[l];
                    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
                };
                let e: f64 = spectra[kk]
                    .iter()
                    .zip(&spectra[l])
                    .zip(&freqs)
                    .map(|((a, b), s)| (a - b).norm_sqr() * (1.0 + s * s).powi(k - 1))
                    .sum();
                t += e / d;
            }
            acc += sphere.weights[kk] * 2.0 * t / nb[kk].len() as f64;
        }
    }
    Ok((acc * g.s_grid.ds / n as f64).sqrt())
}

/// The `m` nearest other nodes of every node.
pub fn neighbours(sphere: &SphereQuadrature, m: usize) -> Vec<Vec<usize>> {
    (0..sphere.len())
        .map(|k| {
            let mut d: Vec<(f64, usize)> = (0..sphere.len())
                .filter(|&l| l != k)
                .map(|l| (-dot(&sphere.nodes[k], &sphere.nodes[l]), l))
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d.iter().take(m).map(|x| x.1).collect()
        })
        .collect()
}

/// `2 pi sigma^2 exp(-s^2 / 2 sigma^2)`, the plane integral of a unit Gaussian.
pub fn gaussian_radon(s: f64, sigma: f64) -> f64 {
    2.0 * PI * sigma * sigma * (-s * s / (2.0 * sigma * sigma)).exp()
}
