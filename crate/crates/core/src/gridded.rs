//! Gridded Radon pair: a back projection that interpolates s-samples with a
//! windowed-sinc kernel, and its exact transpose, a voxel splat. Both act on
//! many real columns at once; cylinder data use the layout
//! `data[(node * n_s + i) * ncol + col]`, voxel data `data[voxel * ncol + col]`.
//!
//! The kernel width is `max(ds, h)`, so the splat is a sound quadrature even
//! when the s-grid is finer than the voxel grid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, BallGrid, SphereQuadrature, Vec3};
use crate::interp::KbKernel;

/// Uniform s-sampling `s_i = s0 + i ds`, `i < n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SLayout {
    pub s0: f64,
    pub ds: f64,
    pub n: usize,
}

/// Kernel weights of every (node, voxel) pair for one shift class.
#[derive(Clone, Debug)]
pub struct Footprints {
    pub base: f64,
    pub ds: f64,
    pub s0: f64,
    pub deriv: bool,
    first: Vec<i64>,
    w: Vec<f64>,
}

impl Footprints {
    /// Whole-sample offset of `shift` from the base, if congruent.
    pub fn offset(&self, lay: &SLayout, shift: f64) -> Option<i64> {
        if (lay.ds - self.ds).abs() > 1e-12 * self.ds || (lay.s0 - self.s0).abs() > 1e-9 * self.ds {
            return None;
        }
        let m = (shift - self.base) / self.ds;
        let r = m.round();
        ((m - r).abs() < 1e-9).then_some(r as i64)
    }
}

#[derive(Clone, Debug)]
pub struct GriddedRadon {
    pub sphere: Arc<SphereQuadrature>,
    pub grid: BallGrid,
    /// Voxels taking part (inside the support ball).
    pub voxels: Vec<usize>,
    pub points: Vec<Vec3>,
    pub radius: f64,
    pub ds: f64,
    /// Kernel width in units of `ds`.
    pub stretch: f64,
    kernel: KbKernel,
    taps: usize,
}

impl GriddedRadon {
    /// Pair acting on voxels of `grid` with `|x| <= radius` and data sampled with spacing `ds`.
    pub fn new(grid: &BallGrid, radius: f64, sphere: &Arc<SphereQuadrature>, ds: f64) -> Self {
        let voxels: Vec<usize> = (0..grid.len()).filter(|&i| norm(&grid.point(i)) <= radius).collect();
        let points = voxels.iter().map(|&i| grid.point(i)).collect();
        let kernel = KbKernel::standard();
        let stretch = (grid.spacing / ds).max(1.0);
        let taps = (2.0 * kernel.half_width as f64 * stretch).ceil() as usize + 1;
        GriddedRadon { sphere: sphere.clone(), grid: grid.clone(), voxels, points, radius, ds, stretch, kernel, taps }
    }

    /// Same pair restricted to voxels where `mask` is nonzero.
    pub fn restricted(&self, mask: &[f64]) -> Self {
        let mut out = self.clone();
        let keep: Vec<usize> = (0..self.voxels.len()).filter(|&j| mask[self.voxels[j]] != 0.0).collect();
        out.voxels = keep.iter().map(|&j| self.voxels[j]).collect();
        out.points = keep.iter().map(|&j| self.points[j]).collect();
        out
    }

    pub fn n_voxels(&self) -> usize {
        self.voxels.len()
    }

    /// Half-width in s of the kernel footprint.
    pub fn reach(&self) -> f64 {
        self.kernel.half_width as f64 * self.stretch * self.ds
    }

    /// Check that every kernel footprint at `shift` lies inside `lay`.
    pub fn check_layout(&self, lay: &SLayout, shift: f64) -> Result<()> {
        if (lay.ds - self.ds).abs() > 1e-12 * self.ds {
            return Err(Error::GridMismatch(format!("layout ds {} != operator ds {}", lay.ds, self.ds)));
        }
        let lo = -self.radius - self.reach() - shift;
        let hi = self.radius + self.reach() - shift;
        let top = lay.s0 + (lay.n as f64 - 1.0) * lay.ds;
        if lo < lay.s0 || hi > top {
            return Err(Error::SupportEscape(format!(
                "kernel footprint [{lo:.4}, {hi:.4}] outside s-window [{:.4}, {top:.4}]",
                lay.s0
            )));
        }
        Ok(())
    }

    #[inline]
    fn footprint(&self, u: f64, lay: &SLayout, shift: f64, w: &mut [f64], deriv: bool) -> usize {
        // kernel argument in cells of width stretch * ds
        let p = (u - shift - lay.s0) / lay.ds;
        let first = (p - self.kernel.half_width as f64 * self.stretch).ceil() as i64;
        let first = first.max(0) as usize;
        let inv = 1.0 / self.stretch;
        for (m, wt) in w.iter_mut().enumerate() {
            let x = (p - (first + m) as f64) * inv;
            *wt = if deriv { self.kernel.eval_d(x) * inv * inv / lay.ds } else { self.kernel.eval(x) * inv };
        }
        first
    }

    /// Precomputed footprints for every shift congruent to `base` modulo `lay.ds`.
    pub fn footprints(&self, lay: &SLayout, base: f64, deriv: bool) -> Footprints {
        let nv = self.points.len();
        let mut first = Vec::with_capacity(self.sphere.len() * nv);
        let mut w = vec![0.0; self.sphere.len() * nv * self.taps];
        for (k, om) in self.sphere.nodes.iter().enumerate() {
            for (v, p) in self.points.iter().enumerate() {
                let at = (k * nv + v) * self.taps;
                let f = self.footprint_raw(dot(p, om), lay, base, &mut w[at..at + self.taps], deriv);
                first.push(f);
            }
        }
        Footprints { base, ds: lay.ds, s0: lay.s0, deriv, first, w }
    }

    #[inline]
    fn footprint_raw(&self, u: f64, lay: &SLayout, shift: f64, w: &mut [f64], deriv: bool) -> i64 {
        let p = (u - shift - lay.s0) / lay.ds;
        let first = (p - self.kernel.half_width as f64 * self.stretch).ceil() as i64;
        let inv = 1.0 / self.stretch;
        for (m, wt) in w.iter_mut().enumerate() {
            let x = (p - (first + m as i64) as f64) * inv;
            *wt = if deriv { self.kernel.eval_d(x) * inv * inv / lay.ds } else { self.kernel.eval(x) * inv };
        }
        first
    }

    /// `gather` with a table; `shift` must be congruent to the table's base.
    pub fn gather_table(&self, data: &[f64], lay: &SLayout, shift: f64, ncol: usize, fp: &Footprints, out: &mut [f64]) {
        let off = fp.offset(lay, shift).expect("shift not congruent to the footprint table");
        let nv = self.points.len();
        for k in 0..self.sphere.len() {
            let wk = self.sphere.weights[k];
            let base = (k * lay.n) as i64;
            for v in 0..nv {
                let e = k * nv + v;
                let first = fp.first[e] - off;
                let dst = &mut out[v * ncol..(v + 1) * ncol];
                for (m, &wt) in fp.w[e * self.taps..(e + 1) * self.taps].iter().enumerate() {
                    let i = first + m as i64;
                    if wt == 0.0 || i < 0 || i >= lay.n as i64 {
                        continue;
                    }
                    let c = wt * wk;
                    let r = (base + i) as usize * ncol;
                    for (d, s) in dst.iter_mut().zip(&data[r..r + ncol]) {
                        *d += c * s;
                    }
                }
            }
        }
    }

    /// `splat` with a table; `shift` must be congruent to the table's base.
    pub fn splat_table(&self, f: &[f64], lay: &SLayout, shift: f64, ncol: usize, fp: &Footprints, data: &mut [f64]) {
        let off = fp.offset(lay, shift).expect("shift not congruent to the footprint table");
        let nv = self.points.len();
        let vol = self.grid.cell_volume() / lay.ds;
        let scale = if fp.deriv { -vol } else { vol };
        for k in 0..self.sphere.len() {
            let base = (k * lay.n) as i64;
            for v in 0..nv {
                let e = k * nv + v;
                let first = fp.first[e] - off;
                let src = &f[v * ncol..(v + 1) * ncol];
                for (m, &wt) in fp.w[e * self.taps..(e + 1) * self.taps].iter().enumerate() {
                    let i = first + m as i64;
                    if wt == 0.0 || i < 0 || i >= lay.n as i64 {
                        continue;
                    }
                    let c = wt * scale;
                    let r = (base + i) as usize * ncol;
                    for (d, s) in data[r..r + ncol].iter_mut().zip(src) {
                        *d += c * s;
                    }
                }
            }
        }
    }

    /// Number of stored weights a footprint table would need.
    pub fn table_len(&self) -> usize {
        self.sphere.len() * self.points.len() * self.taps
    }

    /// `out[v, c] (+)= sum_k w_k sum_i ds K(x.w_k - shift - s_i) data[k, i, c]`,
    /// i.e. back projection of data stored in a frame translated by `shift`.
    /// With `deriv` the kernel derivative is used, giving `R^t (d/ds) data`.
    pub fn gather(&self, data: &[f64], lay: &SLayout, shift: f64, ncol: usize, deriv: bool, out: &mut [f64]) {
        debug_assert_eq!(data.len(), self.sphere.len() * lay.n * ncol);
        debug_assert_eq!(out.len(), self.points.len() * ncol);
        let mut w = vec![0.0; self.taps];
        for (k, om) in self.sphere.nodes.iter().enumerate() {
            let wk = self.sphere.weights[k];
            let base = k * lay.n;
            for (v, p) in self.points.iter().enumerate() {
                let u = dot(p, om);
                let first = self.footprint(u, lay, shift, &mut w, deriv);
                let dst = &mut out[v * ncol..(v + 1) * ncol];
                for (m, &wt) in w.iter().enumerate() {
                    let i = first + m;
                    if wt == 0.0 || i >= lay.n {
                        continue;
                    }
                    let c = wt * wk;
                    let src = &data[(base + i) * ncol..(base + i + 1) * ncol];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += c * s;
                    }
                }
            }
        }
    }

    /// Transpose of `gather` up to the quadrature weights:
    /// `data[k, i, c] (+)= h^3 sum_v K(x_v.w_k - shift - s_i) f[v, c] / ds`.
    /// With `deriv` it returns `d/ds` of the plane integrals.
    pub fn splat(&self, f: &[f64], lay: &SLayout, shift: f64, ncol: usize, deriv: bool, data: &mut [f64]) {
        debug_assert_eq!(data.len(), self.sphere.len() * lay.n * ncol);
        debug_assert_eq!(f.len(), self.points.len() * ncol);
        let mut w = vec![0.0; self.taps];
        let vol = self.grid.cell_volume() / lay.ds;
        // d/ds_i K(u - s_i) = -K'(u - s_i)
        let scale = if deriv { -vol } else { vol };
        for (k, om) in self.sphere.nodes.iter().enumerate() {
            let base = k * lay.n;
            for (v, p) in self.points.iter().enumerate() {
                let u = dot(p, om);
                let first = self.footprint(u, lay, shift, &mut w, deriv);
                let src = &f[v * ncol..(v + 1) * ncol];
                for (m, &wt) in w.iter().enumerate() {
                    let i = first + m;
                    if wt == 0.0 || i >= lay.n {
                        continue;
                    }
                    let c = wt * scale;
                    let dst = &mut data[(base + i) * ncol..(base + i + 1) * ncol];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += c * s;
                    }
                }
            }
        }
    }
}
