//! Generalized backscattering: the restricted kernel, its cutoff and
//! projection onto the range of the linearized map, the generalized inverse
//! of that linearization, and damped Picard inversion.
//!
//! Data are `d(s, theta) = -i kappa(s, S theta, theta)` with `kappa` the
//! scattered kernel convolved with the pulse. At first order in `V` this is
//! `c_3 R_n V~_S` filtered by `phi^(sigma)`, so `L_S` recovers the filtered
//! potential with 3D multiplier `phi^(|(Id - S)^-1 eta|)`.
//!
//! The projection is onto the range of `R_n` restricted to the ball
//! `|x| <= |Id - S| rho + 4 eps`: `P = B (B^H B + mu)^-1 B^H` with the gridded
//! pair for `B`. The normal solve is a Chebyshev polynomial of fixed degree,
//! so `P` and `L_S` are linear and self-adjoint to round-off; the small
//! Tikhonov weight keeps the modes the sphere rule cannot resolve from
//! dominating, at the price of idempotency only up to about `mu`.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::forward::{restrict_backscatter, BackscatterData, ForwardConfig, ForwardSolver, PropagationState, Scheme};
use crate::geometry::{inverse, mat_vec, BallGrid, Constants, OrthogonalMap, SGrid, SphereQuadrature};
use crate::gridded::{Footprints, GriddedRadon, SLayout};
use crate::radon::{CylinderField, ScalarField};
use crate::spectral_born::{beta1, min_singular, undilate_potential};

type C64 = Complex64;
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default Tikhonov weight of the projection, relative to `|B^H B|`.
pub const DEFAULT_REGULARIZATION: f64 = 1e-3;
/// Memory allowed for the projection's footprint table.
const TABLE_BYTES: usize = 1 << 29;
/// Default relative accuracy of the regularized normal solve.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-3;

/// `P = B (B^H B)^-1 B^H` with `B = R_n` on the ball of radius `radius`.
#[derive(Clone, Debug)]
pub struct ProjectionOperator {
    pub s_map: OrthogonalMap,
    pub rho: f64,
    /// Ball radius, `|Id - S| rho + 2 eps` by default.
    pub radius: f64,
    /// Data are cut to `|s| <= window = 2 rho + 4 eps` before projecting.
    pub window: f64,
    pub s_grid: SGrid,
    pub sphere: Arc<SphereQuadrature>,
    pub grid: BallGrid,
    /// Tikhonov weight `mu`, relative to the largest eigenvalue of `B^H B`.
    pub regularization: f64,
    /// Degree of the Chebyshev polynomial approximating `(B^H B + mu)^-1`.
    pub degree: usize,
    pub lambda_max: f64,
    pair: GriddedRadon,
    table: Option<Footprints>,
    c_n: f64,
}

impl ProjectionOperator {
    /// Projection for data sampled with spacing `ds`; `h` is the spacing of
    /// the potential grid, scaled by `sigma_min(Id - S)` for the ball grid.
    pub fn new(
        s_map: &OrthogonalMap,
        rho: f64,
        epsilon: f64,
        ds: f64,
        h: f64,
        sphere: &Arc<SphereQuadrature>,
    ) -> Result<Self> {
        let radius = s_map.dilation() * rho + 2.0 * epsilon;
        Self::with_ball(s_map, rho, radius, 2.0 * rho + 4.0 * epsilon, ds, h, sphere)
    }

    /// Projection onto the range of `R_n` on the ball of `radius`, for data
    /// cut to `|s| <= window`.
    pub fn with_ball(
        s_map: &OrthogonalMap,
        rho: f64,
        radius: f64,
        window: f64,
        ds: f64,
        h: f64,
        sphere: &Arc<SphereQuadrature>,
    ) -> Result<Self> {
        let a = s_map.id_minus_s();
        let hp = min_singular(&a) * h;
        let mut n = (2.0 * radius / hp).ceil() as usize;
        n += n % 2;
        if n > 512 {
            return Err(Error::SingularGeometry(format!("projection grid would need {n} points per axis")));
        }
        let grid = BallGrid::new(radius, 0.5 * n as f64 * hp, n)?;
        let pair = GriddedRadon::new(&grid, radius, sphere, ds);
        let half = (window.max(radius) + pair.reach() + 2.0 * ds) / ds;
        let s_grid = SGrid::with_spacing(half.ceil() * ds, ds)?;
        pair.check_layout(&layout(&s_grid), 0.0)?;
        let table = (pair.table_len() * 8 <= TABLE_BYTES).then(|| pair.footprints(&layout(&s_grid), 0.0, true));
        Ok(ProjectionOperator {
            s_map: s_map.clone(),
            rho,
            radius,
            window,
            s_grid,
            sphere: sphere.clone(),
            grid,
            regularization: 0.0,
            degree: 0,
            lambda_max: 0.0,
            table,
            pair,
            c_n: Constants::three().c_n,
        }
        .with_regularization(DEFAULT_REGULARIZATION, DEFAULT_SOLVE_TOL))
    }

    /// Set `mu` and pick the Chebyshev degree that reaches `tol` relative
    /// accuracy for the regularized normal operator.
    pub fn with_regularization(mut self, relative_mu: f64, tol: f64) -> Self {
        if self.lambda_max == 0.0 {
            self.lambda_max = self.normal_norm(30);
        }
        self.regularization = relative_mu;
        let kappa = (1.0 + relative_mu) / relative_mu;
        let q = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
        self.degree = ((2.0 / tol).ln() / -q.ln()).ceil().max(1.0) as usize;
        self
    }

    /// Power iteration for the largest eigenvalue of `B^H B`, with a margin.
    fn normal_norm(&self, iters: usize) -> f64 {
        let nv = self.pair.n_voxels();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x: Vec<f64> = (0..2 * nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut lam = 0.0;
        for _ in 0..iters {
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            let y = self.apply_bh(&self.apply_b(&x));
            lam = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            x = y;
        }
        1.05 * lam
    }

    pub fn n_voxels(&self) -> usize {
        self.pair.n_voxels()
    }

    fn check(&self, g: &CylinderField) -> Result<()> {
        if g.s_grid != self.s_grid {
            return Err(Error::GridMismatch(format!(
                "data s-grid ({} samples from {:.4}) differs from the projection's ({} from {:.4})",
                g.s_grid.n_s, g.s_grid.s_min, self.s_grid.n_s, self.s_grid.s_min
            )));
        }
        if !Arc::ptr_eq(&g.sphere, &self.sphere) && g.sphere.nodes != self.sphere.nodes {
            return Err(Error::GridMismatch("sphere quadrature differs from the projection's".into()));
        }
        Ok(())
    }

    /// `B y = -i c_n (d/ds) R y` for complex voxel values split as (re, im).
    fn apply_b(&self, y: &[f64]) -> Vec<f64> {
        let mut data = vec![0.0; 2 * self.s_grid.n_s * self.sphere.len()];
        match &self.table {
            Some(fp) => self.pair.splat_table(y, &layout(&self.s_grid), 0.0, 2, fp, &mut data),
            None => self.pair.splat(y, &layout(&self.s_grid), 0.0, 2, true, &mut data),
        }
        times_minus_i(&mut data, self.c_n);
        data
    }

    /// `B^H g = -i c_n R^t (d/ds) g`, exact adjoint of `apply_b`.
    fn apply_bh(&self, g: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; 2 * self.pair.n_voxels()];
        match &self.table {
            Some(fp) => self.pair.gather_table(g, &layout(&self.s_grid), 0.0, 2, fp, &mut y),
            None => self.pair.gather(g, &layout(&self.s_grid), 0.0, 2, true, &mut y),
        }
        times_minus_i(&mut y, self.c_n);
        y
    }

    /// Least-squares `W` on the ball with `R_n W` closest to `g`, as complex
    /// voxel values; `g` is cut to the window first.
    pub fn least_squares(&self, g: &CylinderField) -> Result<Vec<C64>> {
        self.check(g)?;
        let y = self.solve_normal(&self.apply_bh(&split(&self.cut(g).values)));
        Ok(y.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
    }

    /// Hard restriction to `|s| <= window + reach`: the discrete range
    /// elements spill over the window by the kernel reach.
    fn cut(&self, g: &CylinderField) -> CylinderField {
        let mut out = g.clone();
        let n = self.s_grid.n_s;
        let edge = self.window + self.pair.reach();
        for (j, v) in out.values.iter_mut().enumerate() {
            if self.s_grid.s(j % n).abs() > edge {
                *v = C64::new(0.0, 0.0);
            }
        }
        out
    }

    /// `R_n W` for complex voxel values on the ball.
    pub fn range_element(&self, w: &[C64]) -> CylinderField {
        let y: Vec<f64> = w.iter().flat_map(|c| [c.re, c.im]).collect();
        let mut out = CylinderField::zeros(&self.s_grid, &self.sphere);
        out.values = join(&self.apply_b(&y));
        out.parity = true;
        out.s_support = (-self.radius, self.radius);
        out
    }

    /// Voxel values of a field on the ball grid, in pair order.
    pub fn voxel_values(&self, f: &ScalarField) -> Result<Vec<C64>> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch("field is not on the projection's ball grid".into()));
        }
        Ok(self.pair.voxels.iter().map(|&i| C64::new(f.values[i], 0.0)).collect())
    }

    /// Real part of voxel values as a field on the ball grid.
    pub fn field_from_voxels(&self, w: &[C64]) -> ScalarField {
        let mut f = ScalarField::zeros(&self.grid);
        for (&i, c) in self.pair.voxels.iter().zip(w) {
            f.values[i] = c.re;
        }
        f.support_radius = self.radius;
        f
    }

    /// `(B^H B + mu)^-1 b` by Chebyshev iteration of fixed degree on the
    /// interval `[mu, lambda_max + mu]`: a fixed polynomial in the normal
    /// operator, hence linear in `b` and self-adjoint.
    fn solve_normal(&self, b: &[f64]) -> Vec<f64> {
        let mu = self.regularization * self.lambda_max;
        let (lo, hi) = (mu, self.lambda_max + mu);
        let d = 0.5 * (hi + lo);
        let c = 0.5 * (hi - lo);
        let mut x = vec![0.0; b.len()];
        let mut r = b.to_vec();
        let mut p = vec![0.0; b.len()];
        let mut alpha = 0.0;
        for i in 0..self.degree {
            let beta = match i {
                0 => 0.0,
                1 => 0.5 * (c * alpha).powi(2),
                _ => (0.5 * c * alpha).powi(2),
            };
            alpha = if i == 0 { 1.0 / d } else { 1.0 / (d - beta / alpha) };
            p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
            let mut ap = self.apply_bh(&self.apply_b(&p));
            ap.iter_mut().zip(&p).for_each(|(a, pi)| *a += mu * pi);
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            r.iter_mut().zip(&ap).for_each(|(ri, a)| *ri -= alpha * a);
        }
        x
    }

    /// `P g` for data already on the projection's grids (cut applied).
    pub fn apply(&self, g: &CylinderField) -> Result<CylinderField> {
        let w = self.least_squares(g)?;
        Ok(self.range_element(&w))
    }
}

pub(crate) fn layout(s_grid: &SGrid) -> SLayout {
    SLayout { s0: s_grid.s_min, ds: s_grid.ds, n: s_grid.n_s }
}

fn times_minus_i(v: &mut [f64], c: f64) {
    for pair in v.chunks_mut(2) {
        let (re, im) = (pair[0], pair[1]);
        pair[0] = c * im;
        pair[1] = -c * re;
    }
}

fn split(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

fn join(v: &[f64]) -> Vec<C64> {
    v.chunks(2).map(|c| C64::new(c[0], c[1])).collect()
}

/// Cut `g` to `|s| <= 2 rho + 4 eps` and project onto the range.
pub fn chi_projection(g: &CylinderField, p: &ProjectionOperator) -> Result<CylinderField> {
    p.apply(g)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InversionConfig {
    pub max_iters: usize,
    /// Stop once `|d - beta_S(V_k)| <= residual_tol |d|`.
    pub residual_tol: f64,
    pub damping: f64,
    /// Truncate the Born series at this order instead of a full solve.
    pub born_order_per_eval: Option<usize>,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig { max_iters: 20, residual_tol: 1e-4, damping: 1.0, born_order_per_eval: None }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("residual_tol {} must be positive", self.residual_tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping {} must lie in (0, 1]", self.damping)));
        }
        if self.born_order_per_eval == Some(0) {
            return Err(Error::InvalidConfig("born_order_per_eval must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the convergence log.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual: f64,
    pub iterate_norm: f64,
}

#[derive(Clone, Debug)]
pub struct InversionResult {
    pub potential: ScalarField,
    pub log: Vec<IterationRecord>,
    pub converged: bool,
}

impl InversionResult {
    pub fn residuals(&self) -> Vec<f64> {
        self.log.iter().map(|r| r.residual).collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.log.windows(2).all(|w| w[1].residual <= w[0].residual)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.log {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything needed to evaluate `beta_S` and `L_S` for potentials on one grid.
#[derive(Clone, Debug)]
pub struct BackscatterModel {
    pub grid: BallGrid,
    pub sphere: Arc<SphereQuadrature>,
    pub forward: ForwardConfig,
    pub projection: ProjectionOperator,
    /// Harmonic degree used when `S theta` is not a node.
    pub lmax: Option<usize>,
    /// Largest relative change of the outgoing window over the last step.
    pub frozen_tol: f64,
}

impl BackscatterModel {
    pub fn new(grid: &BallGrid, sphere: &Arc<SphereQuadrature>, forward: &ForwardConfig, s_map: &OrthogonalMap) -> Result<Self> {
        if (forward.ds - grid.spacing).abs() > 1e-12 && forward.ds > grid.spacing {
            return Err(Error::GridTooCoarse(format!("ds {} coarser than the grid spacing {}", forward.ds, grid.spacing)));
        }
        let projection =
            ProjectionOperator::new(s_map, grid.rho, forward.shape.epsilon, forward.ds, grid.spacing, sphere)?;
        Ok(BackscatterModel {
            grid: grid.clone(),
            sphere: sphere.clone(),
            forward: forward.clone(),
            projection,
            lmax: None,
            frozen_tol: 1e-6,
        })
    }

    pub fn s_map(&self) -> &OrthogonalMap {
        &self.projection.s_map
    }

    pub fn s_grid(&self) -> &SGrid {
        &self.projection.s_grid
    }

    fn check_potential(&self, v: &ScalarField) -> Result<()> {
        if v.grid != self.grid {
            return Err(Error::GridMismatch("potential is not on the model grid".into()));
        }
        if v.support_radius > self.grid.rho + 1e-12 {
            return Err(Error::SupportEscapesGrid(format!("support {} > rho {}", v.support_radius, self.grid.rho)));
        }
        Ok(())
    }

    fn restrict(&self, solver: &ForwardSolver, state: &PropagationState) -> Result<BackscatterData> {
        let kernel = solver.kernel_from_state(state);
        restrict_backscatter(&kernel, 0, self.s_map(), self.s_grid(), self.lmax)
    }

    /// Restricted kernel of the full solution; zero when `V` vanishes.
    pub fn restricted_data(&self, v: &ScalarField, scheme: Option<usize>) -> Result<BackscatterData> {
        self.check_potential(v)?;
        let all: Vec<usize> = (0..self.sphere.len()).collect();
        let solver = ForwardSolver::new(v, &self.sphere, &self.forward)?;
        let state = match scheme {
            None => {
                let traj = solver.solve(&all, Scheme::Rk4)?;
                if traj.last_step_change > self.frozen_tol {
                    return Err(Error::NotFrozenOut(traj.last_step_change));
                }
                traj.final_state().total()
            }
            Some(j) => scattered_sum(&solver.born_terms(&all, j)?),
        };
        self.restrict(&solver, &state)
    }

    /// `-i kappa` restricted, as cylinder data before the cutoff.
    pub fn raw_data(&self, v: &ScalarField, born_order: Option<usize>) -> Result<CylinderField> {
        if v.values.iter().all(|x| *x == 0.0) {
            return Ok(CylinderField::zeros(self.s_grid(), &self.sphere));
        }
        let d = self.restricted_data(v, born_order)?;
        Ok(d.values.scaled(-I))
    }

    /// `beta_S(V) = P chi [-i kappa_V(s, S theta, theta)]`.
    pub fn beta(&self, v: &ScalarField) -> Result<CylinderField> {
        self.beta_with(v, None)
    }

    /// `beta_S` with the Born series truncated at `born_order` when given.
    pub fn beta_with(&self, v: &ScalarField, born_order: Option<usize>) -> Result<CylinderField> {
        chi_projection(&self.raw_data(v, born_order)?, &self.projection)
    }

    /// Exact linear part in `V` of the discrete `beta_S`, from the degree-1
    /// part of graded RK4.
    pub fn beta_linear(&self, v: &ScalarField) -> Result<CylinderField> {
        self.check_potential(v)?;
        let all: Vec<usize> = (0..self.sphere.len()).collect();
        let mut cfg = self.forward.clone();
        cfg.check_stability = false;
        let solver = ForwardSolver::new(v, &self.sphere, &cfg)?;
        let traj = solver.solve(&all, Scheme::GradedRk4(1))?;
        let d = self.restrict(&solver, &traj.final_state().part(0))?;
        chi_projection(&d.values.scaled(-I), &self.projection)
    }

    /// Closed-form linearization `c_3 R_n V~_S` filtered by the pulse, projected.
    pub fn beta1_spectral(&self, v: &ScalarField) -> Result<CylinderField> {
        let shape = self.forward.shape;
        let ph = move |s: f64| shape.hat(C64::new(s, 0.0)).re;
        let d = beta1(v, self.s_map(), self.s_grid(), &self.sphere, Some(&ph))?;
        chi_projection(&d, &self.projection)
    }

    /// Generalized inverse of the linearization: least squares on the ball,
    /// then undilation onto the model grid.
    pub fn generalized_inverse(&self, d: &CylinderField) -> Result<ScalarField> {
        let w = self.projection.least_squares(d)?;
        let c = Constants::three().c_n;
        let mut wf = self.projection.field_from_voxels(&w);
        wf.values.iter_mut().for_each(|x| *x /= c);
        let mut out = undilate_potential(&wf, self.s_map(), &self.grid);
        out.enforce_support();
        Ok(out)
    }

    /// Potential filtered by `phi^(|(Id - S)^-1 eta|)`, which is what
    /// `L_S beta^1_S` returns.
    pub fn filtered(&self, v: &ScalarField) -> Result<ScalarField> {
        let ainv = inverse(&self.s_map().id_minus_s())
            .ok_or_else(|| Error::SingularGeometry("Id - S not invertible".into()))?;
        let shape = self.forward.shape;
        Ok(filter_potential(v, |eta| {
            let q = mat_vec(&ainv, eta);
            shape.hat(C64::new((q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt(), 0.0)).re
        }))
    }

    /// Damped Picard iteration `V_{k+1} = V_k + damping L_S (d - beta_S(V_k))`
    /// from `V_0 = 0`. `observer` sees every iterate.
    pub fn invert(
        &self,
        data: &CylinderField,
        cfg: &InversionConfig,
        mut observer: impl FnMut(usize, &ScalarField),
    ) -> Result<InversionResult> {
        cfg.validate()?;
        let d_norm = data.norm_l2();
        let mut v = ScalarField::zeros(&self.grid);
        v.support_radius = self.grid.rho;
        let mut log = Vec::new();
        if d_norm == 0.0 {
            log.push(IterationRecord { iter: 0, residual: 0.0, iterate_norm: 0.0 });
            let v1 = self.generalized_inverse(data)?;
            return Ok(InversionResult { potential: v1, log, converged: true });
        }
        let mut growth = 0;
        let mut converged = false;
        for k in 0..=cfg.max_iters {
            let r = data.add_scaled(C64::new(-1.0, 0.0), &self.beta_with(&v, cfg.born_order_per_eval)?);
            let residual = r.norm_l2() / d_norm;
            if !residual.is_finite() {
                return Err(Error::Diverged { iter: k, residual });
            }
            if let Some(prev) = log.last().map(|x: &IterationRecord| x.residual) {
                growth = if residual > prev { growth + 1 } else { 0 };
            }
            log.push(IterationRecord { iter: k, residual, iterate_norm: v.norm_l2() });
            if growth >= 3 {
                return Err(Error::Diverged { iter: k, residual });
            }
            if residual <= cfg.residual_tol {
                converged = true;
                break;
            }
            if k == cfg.max_iters {
                break;
            }
            let step = self.generalized_inverse(&r)?;
            v = v.add_scaled(cfg.damping, &step);
            observer(k + 1, &v);
        }
        Ok(InversionResult { potential: v, log, converged })
    }
}

/// Physical scattered part `sum_j (-1)^j alpha_j` of a Born-terms state.
fn scattered_sum(b: &PropagationState) -> PropagationState {
    let mut total = b.part(0);
    total.values.iter_mut().for_each(|x| *x = -*x);
    for j in 1..b.parts {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        for (t, x) in total.values.iter_mut().zip(b.part(j).values) {
            *t += sign * x;
        }
    }
    total
}

/// Apply a 3D Fourier multiplier `m(eta)` with twofold zero padding, so the
/// cube's periodicity does not wrap the filtered tails.
pub fn filter_potential<F: Fn(&[f64; 3]) -> f64>(v: &ScalarField, m: F) -> ScalarField {
    let n = v.grid.n_side;
    let np = 2 * n;
    let off = n / 2;
    let mut data = vec![C64::new(0.0, 0.0); np * np * np];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                data[((i + off) * np + j + off) * np + k + off] = C64::new(v.values[(i * n + j) * n + k], 0.0);
            }
        }
    }
    fft::fft3(&mut data, np, false);
    let fr = fft::frequencies(np, v.grid.spacing);
    for i in 0..np {
        for j in 0..np {
            for k in 0..np {
                data[(i * np + j) * np + k] *= m(&[fr[i], fr[j], fr[k]]);
            }
        }
    }
    fft::fft3(&mut data, np, true);
    let mut out = v.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.values[(i * n + j) * n + k] = data[((i + off) * np + j + off) * np + k + off].re;
            }
        }
    }
    out
}

/// `|Phi (V - V*)| / |Phi V*|` with `Phi` the model's filter.
pub fn filtered_relative_error(model: &BackscatterModel, v: &ScalarField, truth: &ScalarField) -> Result<f64> {
    let ft = model.filtered(truth)?;
    let fv = model.filtered(v)?;
    Ok(fv.add_scaled(-1.0, &ft).norm_l2() / ft.norm_l2())
}

/// Ratio `|alpha_2| / |alpha_1|` of the restricted second and first Born
/// terms over the incoming nodes `columns`, for which `S theta` must be a node.
/// The ratio scales linearly with the amplitude of `V`.
pub fn quadratic_defect_ratio(v: &ScalarField, model: &BackscatterModel, columns: &[usize]) -> Result<f64> {
    let mut cfg = model.forward.clone();
    cfg.check_stability = false;
    let solver = ForwardSolver::new(v, &model.sphere, &cfg)?;
    let kernel = solver.kernel_from_state(&solver.born_terms(columns, 2)?);
    let (mut n1, mut n2) = (0.0, 0.0);
    for (jj, &j) in columns.iter().enumerate() {
        let target = model.s_map().apply(&model.sphere.nodes[j]);
        let k = model
            .sphere
            .find_node(&target, 1e-10)
            .ok_or_else(|| Error::InvalidConfig(format!("S theta_{j} is not a node")))?;
        n1 += kernel.column(0, jj, k).iter().map(|x| x * x).sum::<f64>();
        n2 += kernel.column(1, jj, k).iter().map(|x| x * x).sum::<f64>();
    }
    Ok((n2 / n1).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sphere_quadrature;
    use crate::radon::{radon_normalized, smooth_s};

    fn projection() -> ProjectionOperator {
        let sphere = sphere_quadrature(11).unwrap().shared();
        ProjectionOperator::new(&OrthogonalMap::backscatter(), 0.5, 0.125, 0.0625, 0.125, &sphere).unwrap()
    }

    fn random_data(p: &ProjectionOperator, seed: u64) -> CylinderField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CylinderField::zeros(&p.s_grid, &p.sphere);
        for v in g.values.iter_mut() {
            *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        // resolvable by the ball grid: s-scales no finer than its spacing
        smooth_s(&g, p.grid.spacing / p.s_grid.ds)
    }

    #[test]
    fn b_and_bh_are_adjoint() {
        let p = projection();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..2 * p.n_voxels()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = split(&random_data(&p, 4).values);
        let by = p.apply_b(&y);
        let bhg = p.apply_bh(&g);
        let mut lhs = 0.0;
        let n = p.s_grid.n_s;
        for (j, (a, b)) in by.iter().zip(&g).enumerate() {
            lhs += a * b * p.sphere.weights[j / 2 / n] * p.s_grid.ds;
        }
        let rhs: f64 = y.iter().zip(&bhg).map(|(a, b)| a * b).sum::<f64>() * p.grid.cell_volume();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()), "{lhs} {rhs}");
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal() {
        let p = projection();
        let g = random_data(&p, 7);
        let cut = p.cut(&g);
        let pg = p.apply(&g).unwrap();
        let ppg = p.apply(&pg).unwrap();
        // operator sense: |P^2 g - P g| against |g|
        let idem = ppg.add_scaled(C64::new(-1.0, 0.0), &pg).norm_l2() / g.norm_l2();
        assert!(idem <= 2e-2, "{idem}");
        let rest = cut.add_scaled(C64::new(-1.0, 0.0), &pg);
        let cross = pg.inner(&rest).norm();
        assert!(cross <= 2e-2 * cut.norm_l2().powi(2), "{cross}");
    }

    #[test]
    fn projection_is_self_adjoint_and_linear() {
        let p = projection();
        let (a, b) = (random_data(&p, 1), random_data(&p, 2));
        let (pa, pb) = (p.apply(&a).unwrap(), p.apply(&b).unwrap());
        let lhs = pa.inner(&b);
        let rhs = a.inner(&pb);
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm(), "{lhs} {rhs}");
        let c = C64::new(0.3, -1.2);
        let comb = p.apply(&a.add_scaled(c, &b)).unwrap();
        let expect = pa.add_scaled(c, &pb);
        assert!(comb.rel_error(&expect).unwrap() <= 1e-10);
    }

    #[test]
    fn range_elements_are_fixed() {
        let p = projection();
        let w = ScalarField::from_fn(&p.grid, p.radius, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2]) / 0.1).exp());
        let g = radon_normalized(&w, &p.s_grid, &p.sphere).unwrap();
        let pg = p.apply(&g).unwrap();
        assert!(pg.rel_error(&g).unwrap() <= 3e-2);
    }

    #[test]
    fn data_beyond_the_window_are_dropped() {
        let p = projection();
        let g = CylinderField::from_fn(&p.s_grid, &p.sphere, |s, _| {
            if s > p.window + p.pair.reach() + p.s_grid.ds {
                C64::new(1.0, 0.5)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        assert_eq!(p.apply(&g).unwrap().norm_l2(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let p = projection();
        let other = SGrid::with_spacing(p.s_grid.s_max() + 1.0, 0.0625).unwrap();
        let g = CylinderField::zeros(&other, &p.sphere);
        assert!(matches!(chi_projection(&g, &p), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn inversion_config_validation() {
        assert!(InversionConfig::default().validate().is_ok());
        let bad = InversionConfig { damping: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = InversionConfig { max_iters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn filter_with_unit_multiplier_is_identity() {
        let grid = BallGrid::new(1.0, 1.0, 12).unwrap();
        let v = ScalarField::from_fn(&grid, 1.0, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.1).exp());
        let f = filter_potential(&v, |_| 1.0);
        assert!(f.rel_error(&v) < 1e-12);
    }
}
