//! Fourier-domain formulas: the first Born term, the free resolvent, the
//! resolvent identity and the second Born term as a single `eta`-integral.
//!
//! Transforms use `V^(xi) = int V(x) exp(-i xi.x) dx`, extended to complex `xi`.
//! The time-domain Born term `alpha_j` of the forward solver, read as a kernel
//! and transformed with `exp(-i lambda tau)`, equals `-i phi^(lambda) kappa^_j`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::forward::{ForwardConfig, ForwardSolver};
use crate::geometry::{
    dot, inverse, mat_mul, mat_vec, norm, sym_eigenvalues, transpose, BallGrid, Constants, Mat3, OrthogonalMap, SGrid,
    SphereQuadrature, Vec3,
};
use crate::interp::lagrange4;
use crate::radon::{
    radon_forward, radon_normalized, radon_normalized_adjoint, radon_transpose_complex, s_multiplier, CylinderField,
    ScalarField,
};
use crate::interp::SInterp;

type C64 = Complex64;
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `V^(xi)` for complex `xi` by direct quadrature, separably over the axes.
pub fn fourier_at(v: &ScalarField, xi: [C64; 3]) -> C64 {
    let n = v.grid.n_side;
    let axis = v.grid.axis();
    let e: Vec<Vec<C64>> = (0..3).map(|d| axis.iter().map(|&x| (-I * xi[d] * x).exp()).collect()).collect();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        let mut acc_j = C64::new(0.0, 0.0);
        for j in 0..n {
            let row = &v.values[(i * n + j) * n..(i * n + j + 1) * n];
            let s: C64 = row.iter().zip(&e[2]).filter(|(x, _)| **x != 0.0).map(|(x, ek)| ek * *x).sum();
            acc_j += e[1][j] * s;
        }
        acc += e[0][i] * acc_j;
    }
    acc * v.grid.cell_volume()
}

fn scaled_dir(lambda: C64, d: &Vec3) -> [C64; 3] {
    [lambda * d[0], lambda * d[1], lambda * d[2]]
}

/// `c^2 lambda V^(lambda (theta - omega))`.
pub fn kappa1_hat(v: &ScalarField, lambda: C64, omega: &Vec3, theta: &Vec3) -> Result<C64> {
    if lambda.im > 0.0 {
        return Err(Error::WrongHalfPlane(lambda.im));
    }
    let d = [theta[0] - omega[0], theta[1] - omega[1], theta[2] - omega[2]];
    Ok(Constants::three().c_sq() * lambda * fourier_at(v, scaled_dir(lambda, &d)))
}

/// Transform of `V` on the DFT lattice of the cube zero-padded by `pad`.
#[derive(Clone, Debug)]
pub struct FourierPotential {
    pub grid: BallGrid,
    pub pad: usize,
    /// Lattice size per axis and spacing `2 pi / (pad * 2 rho_box)`.
    pub n: usize,
    pub dmu: f64,
    pub values: Vec<C64>,
    pub real: bool,
}

impl FourierPotential {
    pub fn new(v: &ScalarField, pad: usize) -> Self {
        Self::modulated(v, pad, |_| C64::new(1.0, 0.0), true)
    }

    /// Transform of `V(x) m(x)`.
    pub fn modulated<F: Fn(&Vec3) -> C64>(v: &ScalarField, pad: usize, m: F, real: bool) -> Self {
        let g = &v.grid;
        let n0 = g.n_side;
        let n = n0 * pad;
        let mut data = vec![C64::new(0.0, 0.0); n * n * n];
        for i in 0..n0 {
            for j in 0..n0 {
                for k in 0..n0 {
                    let idx = g.index(i, j, k);
                    if v.values[idx] != 0.0 {
                        data[(i * n + j) * n + k] = m(&g.point(idx)) * v.values[idx];
                    }
                }
            }
        }
        fft::fft3(&mut data, n, false);
        let h = g.spacing;
        let dmu = 2.0 * PI / (n as f64 * h);
        // x_i = -L + (i + 1/2) h, so each axis carries exp(i mu (L - h/2))
        let x0 = g.rho_box - 0.5 * h;
        let phase: Vec<C64> = (0..n).map(|m| (I * lattice(m, n) as f64 * dmu * x0).exp()).collect();
        let vol = g.cell_volume();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    data[(a * n + b) * n + c] *= phase[a] * phase[b] * phase[c] * vol;
                }
            }
        }
        FourierPotential { grid: g.clone(), pad, n, dmu, values: data, real }
    }

    pub fn mu(&self, m: usize) -> f64 {
        lattice(m, self.n) as f64 * self.dmu
    }

    /// Index of the lattice point `-mu`.
    pub fn neg(&self, m: usize) -> usize {
        (self.n - m) % self.n
    }

    /// `max |V^(-xi) - conj V^(xi)|` relative to `max |V^|`, off the Nyquist planes.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        let mut big: f64 = 0.0;
        let interior = |m: usize| n % 2 == 1 || m != n / 2;
        for a in (0..n).filter(|&m| interior(m)) {
            for b in (0..n).filter(|&m| interior(m)) {
                for c in (0..n).filter(|&m| interior(m)) {
                    let v = self.values[(a * n + b) * n + c];
                    let w = self.values[(self.neg(a) * n + self.neg(b)) * n + self.neg(c)];
                    worst = worst.max((w - v.conj()).norm());
                    big = big.max(v.norm());
                }
            }
        }
        worst / big.max(f64::MIN_POSITIVE)
    }
}

fn lattice(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// `exp(-i lambda |y|) / (4 pi |y|)` for `Im lambda < 0`.
pub fn free_resolvent_kernel(lambda: C64, y: &Vec3) -> Result<C64> {
    if lambda.im >= 0.0 {
        return Err(Error::WrongHalfPlane(lambda.im));
    }
    let r = norm(y);
    if r < 1e-10 {
        return Err(Error::OriginSingularity(r));
    }
    Ok((-I * lambda * r).exp() / (4.0 * PI * r))
}

/// Result of the second Born term quadrature together with its majorant
/// `c^2 |lambda| (2 pi)^-3 int |V^ V^| / ||eta|^2 - lambda^2|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct KappaValue {
    pub value: C64,
    pub majorant: f64,
}

/// `kappa^_j(lambda, S theta, theta)` for `j` in {1, 2}. For `j = 2`
///
/// ```text
/// c^2 lambda (2 pi)^-3 int V^(-lambda S theta - eta) V^(eta + lambda theta) / (|eta|^2 - lambda^2) d eta
/// ```
///
/// on the padded DFT lattice shifted by `-Re(lambda) theta` (midpoint rule);
/// needs `Im lambda < 0` so the denominator stays away from zero.
pub fn kappa_j_hat(v: &ScalarField, s_map: &OrthogonalMap, j: usize, lambda: C64, theta: &Vec3, pad: usize) -> Result<KappaValue> {
    if lambda.im > 0.0 {
        return Err(Error::WrongHalfPlane(lambda.im));
    }
    let omega = s_map.apply(theta);
    let c2 = Constants::three().c_sq();
    match j {
        1 => {
            let value = kappa1_hat(v, lambda, &omega, theta)?;
            Ok(KappaValue { value, majorant: value.norm() })
        }
        2 => {
            if lambda.im >= 0.0 {
                return Err(Error::WrongHalfPlane(lambda.im));
            }
            let (lr, li) = (lambda.re, lambda.im);
            let d = [theta[0] - omega[0], theta[1] - omega[1], theta[2] - omega[2]];
            // eta = mu - lr theta: V^(eta + lambda theta) = FT[V exp(li theta.x)](mu),
            // V^(-lambda omega - eta) = FT[V exp(-i lr (theta - omega).x - li omega.x)](-mu)
            let w2 = FourierPotential::modulated(v, pad, |x| C64::new((li * dot(theta, x)).exp(), 0.0), false);
            let w1 = FourierPotential::modulated(
                v,
                pad,
                |x| C64::from_polar((-li * dot(&omega, x)).exp(), -lr * dot(&d, x)),
                false,
            );
            let n = w1.n;
            let lam2 = lambda * lambda;
            let mut acc = C64::new(0.0, 0.0);
            let mut maj = 0.0;
            for a in 0..n {
                let e0 = w1.mu(a) - lr * theta[0];
                for b in 0..n {
                    let e1 = w1.mu(b) - lr * theta[1];
                    for c in 0..n {
                        let e2 = w1.mu(c) - lr * theta[2];
                        let num = w1.values[(w1.neg(a) * n + w1.neg(b)) * n + w1.neg(c)] * w2.values[(a * n + b) * n + c];
                        let den = C64::new(e0 * e0 + e1 * e1 + e2 * e2, 0.0) - lam2;
                        acc += num / den;
                        maj += num.norm() / den.norm();
                    }
                }
            }
            let q = w1.dmu.powi(3) / (2.0 * PI).powi(3);
            Ok(KappaValue { value: c2 * lambda * acc * q, majorant: c2 * lambda.norm() * maj * q })
        }
        _ => Err(Error::UnsupportedOrder(j as i64)),
    }
}

/// Smallest singular value of a 3x3 matrix.
pub fn min_singular(m: &Mat3) -> f64 {
    let ev = sym_eigenvalues(&mat_mul(&transpose(m), m));
    ev.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}

/// Ball grid holding `V~_S`: radius `|Id - S| rho` and spacing
/// `sigma_min(Id - S) h`, so features are resolved as well as on the input.
pub fn dilated_grid(grid: &BallGrid, s_map: &OrthogonalMap) -> Result<BallGrid> {
    let a = s_map.id_minus_s();
    let r = s_map.dilation() * grid.rho;
    let h = min_singular(&a) * grid.spacing;
    let mut n = (2.0 * r / h).ceil() as usize;
    n += n % 2;
    if n > 512 {
        return Err(Error::SingularGeometry(format!("dilated grid would need {n} points per axis")));
    }
    BallGrid::new(r, 0.5 * n as f64 * h, n)
}

/// Tricubic Lagrange interpolation; samples outside the cube read as zero.
pub fn tricubic(values: &[f64], grid: &BallGrid, p: &Vec3) -> f64 {
    let n = grid.n_side as i64;
    let h = grid.spacing;
    let mut base = [0i64; 3];
    let mut w = [[0.0; 4]; 3];
    for d in 0..3 {
        let q = (p[d] + grid.rho_box) / h - 0.5;
        let i0 = q.floor();
        base[d] = i0 as i64 - 1;
        w[d] = lagrange4(q - i0);
    }
    let mut acc = 0.0;
    for (a, wa) in w[0].iter().enumerate() {
        let i = base[0] + a as i64;
        if i < 0 || i >= n {
            continue;
        }
        for (b, wb) in w[1].iter().enumerate() {
            let j = base[1] + b as i64;
            if j < 0 || j >= n {
                continue;
            }
            for (c, wc) in w[2].iter().enumerate() {
                let k = base[2] + c as i64;
                if k < 0 || k >= n {
                    continue;
                }
                acc += wa * wb * wc * values[((i * n + j) * n + k) as usize];
            }
        }
    }
    acc
}

/// `V~_S(x) = |det(Id - S)|^-1 V((Id - S)^-T x)` on `out`, whose transform is
/// `V^((Id - S) xi)`.
pub fn dilate_potential(v: &ScalarField, s_map: &OrthogonalMap, out: &BallGrid) -> Result<ScalarField> {
    let a = s_map.id_minus_s();
    let ainv_t = transpose(&inverse(&a).ok_or_else(|| Error::SingularGeometry("Id - S not invertible".into()))?);
    let jac = s_map.det_id_minus_s.abs();
    let radius = s_map.dilation() * v.support_radius;
    let vals = (0..out.len())
        .map(|i| {
            let x = out.point(i);
            let y = mat_vec(&ainv_t, &x);
            if norm(&y) > v.support_radius {
                0.0
            } else {
                tricubic(&v.values, &v.grid, &y) / jac
            }
        })
        .collect();
    Ok(ScalarField { grid: out.clone(), values: vals, support_radius: radius })
}

/// Inverse of `dilate_potential`: `V(y) = |det(Id - S)| V~_S((Id - S)^T y)` on `grid`.
pub fn undilate_potential(w: &ScalarField, s_map: &OrthogonalMap, grid: &BallGrid) -> ScalarField {
    let at = transpose(&s_map.id_minus_s());
    let jac = s_map.det_id_minus_s.abs();
    ScalarField::from_fn(grid, grid.rho, |y| tricubic(&w.values, &w.grid, &mat_vec(&at, y)) * jac)
}

/// `c_3 R_n V~_S` on `s_grid`, optionally filtered by the pulse transform.
pub fn beta1(
    v: &ScalarField,
    s_map: &OrthogonalMap,
    s_grid: &SGrid,
    sphere: &Arc<SphereQuadrature>,
    pulse_hat: Option<&dyn Fn(f64) -> f64>,
) -> Result<CylinderField> {
    let dgrid = dilated_grid(&v.grid, s_map)?;
    let w = dilate_potential(v, s_map, &dgrid)?;
    let c = Constants::three().c_n;
    let mut out = radon_normalized(&w, s_grid, sphere)?.scaled(C64::new(c, 0.0));
    if let Some(ph) = pulse_hat {
        let parity = out.parity;
        out = s_multiplier(&out, |s| C64::new(ph(s), 0.0));
        out.parity = parity;
    }
    Ok(out)
}

/// `V = |det(Id - S)| (c_3^-1 R_n^t d)((Id - S)^T y)` for data in the range of `beta1`.
pub fn beta1_inverse_on_range(d: &CylinderField, s_map: &OrthogonalMap, grid: &BallGrid) -> Result<ScalarField> {
    let dgrid = dilated_grid(grid, s_map)?;
    let c = Constants::three().c_n;
    let w = radon_normalized_adjoint(d, &dgrid)?.scaled(1.0 / c);
    Ok(undilate_potential(&w, s_map, grid))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolventReport {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub defect: f64,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
}

/// Compares `c^2 R^t (D_s + lambda)^-1 D_s R f` with `(Delta - lambda^2)^-1 f`
/// inside `B(rho)`. The right side uses the cube zero-padded by `pad`; the
/// s-grid must be long enough for the `exp(Im(lambda) |s|)` tails.
pub fn resolvent_identity_check(
    f: &ScalarField,
    lambda: C64,
    s_grid: &SGrid,
    sphere: &Arc<SphereQuadrature>,
    pad: usize,
) -> Result<ResolventReport> {
    if lambda.im >= 0.0 {
        return Err(Error::WrongHalfPlane(lambda.im));
    }
    let grid = &f.grid;
    let c2 = Constants::three().c_sq();
    let rf = radon_forward(f, s_grid, sphere)?;
    let filtered = s_multiplier(&rf, |s| s / (s + lambda));
    let lhs: Vec<C64> = radon_transpose_complex(&filtered, grid, SInterp::Trigonometric)?.iter().map(|v| v * c2).collect();
    let rhs = resolvent_apply(f, lambda, pad);
    let (mut d, mut a, mut b) = (0.0, 0.0, 0.0);
    for i in 0..grid.len() {
        if norm(&grid.point(i)) <= grid.rho {
            d += (lhs[i] - rhs[i]).norm_sqr();
            a += lhs[i].norm_sqr();
            b += rhs[i].norm_sqr();
        }
    }
    Ok(ResolventReport { lambda_re: lambda.re, lambda_im: lambda.im, defect: (d / b).sqrt(), lhs_norm: a.sqrt(), rhs_norm: b.sqrt() })
}

/// `(Delta - lambda^2)^-1 f` (positive Laplacian) by the multiplier
/// `1 / (|xi|^2 - lambda^2)` on the cube zero-padded by `pad`, sampled back
/// on the original grid.
pub fn resolvent_apply(f: &ScalarField, lambda: C64, pad: usize) -> Vec<C64> {
    let g = &f.grid;
    let n0 = g.n_side;
    let n = n0 * pad;
    let off = (n - n0) / 2;
    let mut data = vec![C64::new(0.0, 0.0); n * n * n];
    for i in 0..n0 {
        for j in 0..n0 {
            for k in 0..n0 {
                data[((i + off) * n + j + off) * n + k + off] = C64::new(f.values[g.index(i, j, k)], 0.0);
            }
        }
    }
    fft::fft3(&mut data, n, false);
    let fr = fft::frequencies(n, g.spacing);
    let lam2 = lambda * lambda;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let x2 = fr[a] * fr[a] + fr[b] * fr[b] + fr[c] * fr[c];
                data[(a * n + b) * n + c] /= C64::new(x2, 0.0) - lam2;
            }
        }
    }
    fft::fft3(&mut data, n, true);
    let mut out = vec![C64::new(0.0, 0.0); g.len()];
    for i in 0..n0 {
        for j in 0..n0 {
            for k in 0..n0 {
                out[g.index(i, j, k)] = data[((i + off) * n + j + off) * n + k + off];
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KappaComparison {
    pub order: usize,
    pub node: usize,
    pub lambda: [f64; 2],
    pub time_domain: [f64; 2],
    pub spectral: [f64; 2],
    pub rel_defect: f64,
}

/// Born terms of orders `1..=j_max` (at most 2) from the time-domain solver,
/// transformed and divided by `-i phi^(lambda)`, against [`kappa_j_hat`] at
/// `omega = S theta`. Every `S theta_j` must be a node; order 2 is skipped
/// for real `lambda`.
pub fn compare_born_terms(
    v: &ScalarField,
    sphere: &Arc<SphereQuadrature>,
    forward: &ForwardConfig,
    s_map: &OrthogonalMap,
    nodes: &[usize],
    lambdas: &[C64],
    j_max: usize,
    pad: usize,
) -> Result<Vec<KappaComparison>> {
    if !(1..=2).contains(&j_max) {
        return Err(Error::UnsupportedOrder(j_max as i64));
    }
    let solver = ForwardSolver::new(v, sphere, forward)?;
    let kernel = solver.kernel_from_state(&solver.born_terms(nodes, j_max)?);
    let shape = forward.shape;
    let mut out = Vec::new();
    for (jj, &node) in nodes.iter().enumerate() {
        let theta = sphere.nodes[node];
        let k = sphere
            .find_node(&s_map.apply(&theta), 1e-10)
            .ok_or_else(|| Error::InvalidConfig(format!("S theta_{node} is not a node")))?;
        for &lambda in lambdas {
            for j in (1..=j_max).filter(|&j| j == 1 || lambda.im < 0.0) {
                let td = kernel.transform(j - 1, jj, k, lambda) / (-I * shape.hat(lambda));
                let sp = kappa_j_hat(v, s_map, j, lambda, &theta, pad)?.value;
                out.push(KappaComparison {
                    order: j,
                    node,
                    lambda: [lambda.re, lambda.im],
                    time_domain: [td.re, td.im],
                    spectral: [sp.re, sp.im],
                    rel_defect: (td - sp).norm() / sp.norm(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sphere_quadrature;

    fn gaussian(grid: &BallGrid, sigma: f64, amp: f64) -> ScalarField {
        ScalarField::from_fn(grid, grid.rho, |x| amp * (-dot(x, x) / (2.0 * sigma * sigma)).exp())
    }

    #[test]
    fn kappa1_gaussian_backscatter() {
        let grid = BallGrid::new(1.0, 1.0, 40).unwrap();
        let sigma = 0.15;
        let v = gaussian(&grid, sigma, 1.0);
        let z = [0.0, 0.0, 1.0];
        let got = kappa1_hat(&v, C64::new(1.0, 0.0), &[0.0, 0.0, -1.0], &z).unwrap();
        let c2 = Constants::three().c_sq();
        let want = c2 * (2.0 * PI * sigma * sigma).powf(1.5) * (-sigma * sigma * 4.0 / 2.0).exp();
        assert!((got - want).norm() < 1e-6 * want, "{got} {want}");
        assert_eq!(kappa1_hat(&v, C64::new(0.0, 0.0), &z, &z).unwrap(), C64::new(0.0, 0.0));
        let fwd = kappa1_hat(&v, C64::new(2.0, 0.0), &z, &z).unwrap();
        let mean: f64 = v.values.iter().sum::<f64>() * grid.cell_volume();
        assert!((fwd - c2 * 2.0 * mean).norm() < 1e-12);
    }

    #[test]
    fn resolvent_kernel_values() {
        let v = free_resolvent_kernel(C64::new(0.0, -1.0), &[0.0, 1.0, 0.0]).unwrap();
        assert!((v.re - (-1.0f64).exp() / (4.0 * PI)).abs() < 1e-15 && (v.re - 0.029_27).abs() < 1e-5);
        let l = C64::new(0.7, -1.0);
        let a = free_resolvent_kernel(l, &[1.0, 0.0, 0.0]).unwrap().norm();
        let b = free_resolvent_kernel(l, &[2.0, 0.0, 0.0]).unwrap().norm();
        assert!((b / a - (-1.0f64).exp() / 2.0).abs() < 1e-12);
        assert!(matches!(free_resolvent_kernel(C64::new(1.0, 0.5), &[1.0, 0.0, 0.0]), Err(Error::WrongHalfPlane(_))));
        assert!(matches!(free_resolvent_kernel(l, &[0.0; 3]), Err(Error::OriginSingularity(_))));
    }

    #[test]
    fn resolvent_kernel_solves_helmholtz() {
        // (Delta - lambda^2) Q = 0 away from the origin, Delta = -nabla^2
        let l = C64::new(0.8, -1.0);
        let h = 1e-3;
        let p = [0.3, -0.5, 0.7];
        let q = |y: &Vec3| free_resolvent_kernel(l, y).unwrap();
        let mut lap = -6.0 * q(&p);
        for d in 0..3 {
            for sgn in [-1.0, 1.0] {
                let mut y = p;
                y[d] += sgn * h;
                lap += q(&y);
            }
        }
        let res = -lap / (h * h) - l * l * q(&p);
        assert!(res.norm() < 1e-3 * (l * l * q(&p)).norm());
    }

    #[test]
    fn dilation_for_backscatter_halves() {
        let grid = BallGrid::new(1.0, 1.0, 24).unwrap();
        let v = gaussian(&grid, 0.25, 1.0);
        let s = OrthogonalMap::backscatter();
        let dg = dilated_grid(&grid, &s).unwrap();
        assert_eq!(dg.n_side, 24);
        let w = dilate_potential(&v, &s, &dg).unwrap();
        for i in (0..dg.len()).step_by(97) {
            let x = dg.point(i);
            let want = if norm(&x) <= 2.0 { (-dot(&x, &x) / 4.0 / (2.0 * 0.0625)).exp() / 8.0 } else { 0.0 };
            assert!((w.values[i] - want).abs() < 1e-12, "{} {want}", w.values[i]);
        }
    }

    #[test]
    fn beta1_round_trip() {
        let grid = BallGrid::new(1.0, 1.0, 32).unwrap();
        let v = gaussian(&grid, 0.25, 1.0);
        let s = OrthogonalMap::backscatter();
        let sphere = sphere_quadrature(29).unwrap().shared();
        let s_grid = SGrid::symmetric(3.0, 128).unwrap();
        let d = beta1(&v, &s, &s_grid, &sphere, None).unwrap();
        let back = beta1_inverse_on_range(&d, &s, &grid).unwrap();
        let err = back.rel_error(&v);
        assert!(err < 3e-2, "{err}");
        let z = beta1(&v.scaled(0.0), &s, &s_grid, &sphere, None).unwrap();
        assert_eq!(z.norm_l2(), 0.0);
    }

    #[test]
    fn conjugate_symmetry_of_lattice_transform() {
        let grid = BallGrid::new(1.0, 1.0, 12).unwrap();
        let v = ScalarField::from_fn(&grid, 1.0, |x| (1.0 - dot(x, x)) * (1.0 + x[0]));
        assert!(FourierPotential::new(&v, 2).conjugate_symmetry_defect() < 1e-12);
    }

    #[test]
    fn lattice_transform_matches_direct() {
        let grid = BallGrid::new(1.0, 1.0, 12).unwrap();
        let v = gaussian(&grid, 0.3, 1.0);
        let fp = FourierPotential::new(&v, 2);
        for (a, b, c) in [(1usize, 0usize, 3usize), (5, 7, 2), (23, 1, 0)] {
            let xi = [C64::new(fp.mu(a), 0.0), C64::new(fp.mu(b), 0.0), C64::new(fp.mu(c), 0.0)];
            let want = fourier_at(&v, xi);
            let got = fp.values[(a * fp.n + b) * fp.n + c];
            assert!((got - want).norm() < 1e-12, "{got} {want}");
        }
    }

    #[test]
    fn kappa2_homogeneity_and_majorant() {
        let grid = BallGrid::new(1.0, 1.0, 10).unwrap();
        let v = gaussian(&grid, 0.3, 1.0);
        let s = OrthogonalMap::backscatter();
        let th = [0.0, 0.0, 1.0];
        let l = C64::new(1.0, -1.0);
        let a = kappa_j_hat(&v, &s, 2, l, &th, 3).unwrap();
        let b = kappa_j_hat(&v.scaled(3.0), &s, 2, l, &th, 3).unwrap();
        assert!((b.value - a.value * 9.0).norm() < 1e-10 * b.value.norm());
        assert!(a.value.norm() <= a.majorant);
        assert!(matches!(kappa_j_hat(&v, &s, 3, l, &th, 3), Err(Error::UnsupportedOrder(3))));
        // i kappa is conjugate symmetric: kappa(-conj l) = -conj kappa(l)
        let c = kappa_j_hat(&v, &s, 2, -l.conj(), &th, 3).unwrap();
        assert!((c.value + a.value.conj()).norm() < 1e-8 * a.value.norm());
        let z = kappa_j_hat(&v.scaled(0.0), &s, 2, l, &th, 3).unwrap();
        assert_eq!(z.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn resolvent_identity_small() {
        let grid = BallGrid::new(1.0, 1.0, 24).unwrap();
        let f = gaussian(&grid, 0.25, 1.0);
        let sphere = sphere_quadrature(23).unwrap().shared();
        let s_grid = SGrid::symmetric(8.0, 512).unwrap();
        let r = resolvent_identity_check(&f, C64::new(0.0, -1.0), &s_grid, &sphere, 3).unwrap();
        assert!(r.defect < 5e-2, "{r:?}");
        let r = resolvent_identity_check(&f, C64::new(0.0, -10.0), &s_grid, &sphere, 3).unwrap();
        assert!(r.defect < 5e-2, "{r:?}");
        // large |lambda|: the defect from -f / lambda^2 is |xi|^2 / (|xi|^2 - lambda^2)
        // weighted by f^, so it shrinks by a factor between 1 and 4 when lambda doubles
        let lead_defect = |l: C64| {
            let rhs = resolvent_apply(&f, l, 3);
            let (mut d, mut n) = (0.0, 0.0);
            for (a, b) in rhs.iter().zip(&f.values) {
                let lead = -b / (l * l);
                d += (a - lead).norm_sqr();
                n += lead.norm_sqr();
            }
            (d / n).sqrt()
        };
        let ratio = lead_defect(C64::new(0.0, -10.0)) / lead_defect(C64::new(0.0, -20.0));
        assert!(ratio > 2.0 && ratio <= 4.0, "{ratio}");
        assert!(lead_defect(C64::new(0.0, -40.0)) < 2e-2);
    }
}
