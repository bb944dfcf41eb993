//! Volterra transport solver for the continuation problem with incoming data
//! `phi_eps(s - t) e_j / w_j`, in characteristic coordinates `s' = s - t`.
//!
//! Writing the solution as `beta(t, s') = beta_0(s') - c^2 A(t, s')`, the
//! unknown `A` obeys
//!
//! ```text
//! dA/dt = [d/ds R (V u_t)](s' + t),   u_t = phi(x.theta_j - t) - c^2 R^t_t A
//! ```
//!
//! where `R^t_t` back-projects data stored in the frame translated by `t`.
//! Both transforms are the gridded pair, so the right-hand side is exactly
//! affine in `A` and the degree-`m` part in `V` can be carried separately
//! ("graded" stepping): the sum of the graded parts is the plain RK4 result,
//! and every part scales exactly like `c^m` under `V -> cV`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, real_sph_harmonics, Constants, OrthogonalMap, SGrid, SphereQuadrature};
use crate::gridded::{Footprints, GriddedRadon, SLayout};
use crate::radon::{CylinderField, ScalarField};
use crate::vlp::VlpOperator;

type C64 = Complex64;

/// Memory allowed for footprint tables.
const TABLE_BYTES: usize = 1 << 30;

/// Unit-mass Gaussian of standard deviation `eps / 2`: numerically supported
/// in `|s| <= 4 eps`, with transform `exp(-lambda^2 eps^2 / 8)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PulseShape {
    pub epsilon: f64,
}

impl PulseShape {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("pulse width {epsilon} must be positive")));
        }
        Ok(PulseShape { epsilon })
    }

    pub fn sigma(&self) -> f64 {
        0.5 * self.epsilon
    }

    pub fn profile(&self, s: f64) -> f64 {
        let sg = self.sigma();
        (-0.5 * (s / sg).powi(2)).exp() / ((2.0 * PI).sqrt() * sg)
    }

    /// `int exp(-i lambda s) phi(s) ds`, entire in `lambda`.
    pub fn hat(&self, lambda: C64) -> C64 {
        (-0.5 * lambda * lambda * self.sigma() * self.sigma()).exp()
    }

    pub fn support_radius(&self) -> f64 {
        4.0 * self.epsilon
    }
}

/// Incoming data `phi_eps(s - t) e_j / w_j` for the sphere node `j`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct IncomingPulse {
    pub shape: PulseShape,
    pub node: usize,
    pub weight: f64,
}

impl IncomingPulse {
    pub fn new(shape: PulseShape, sphere: &SphereQuadrature, node: usize) -> Result<Self> {
        if node >= sphere.len() {
            return Err(Error::InvalidConfig(format!("incoming node {node} >= {}", sphere.len())));
        }
        Ok(IncomingPulse { shape, node, weight: sphere.weights[node] })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ForwardConfig {
    /// Sample spacing of the characteristic variable.
    pub ds: f64,
    /// Time step; defaults to `ds`.
    pub dt: Option<f64>,
    pub shape: PulseShape,
    /// Final time; defaults to `3 rho + 8 eps`, enough to read the kernel
    /// on `[-2 rho - 4 eps, 2 rho + 4 eps]` in the frozen-out region.
    pub t_end: Option<f64>,
    /// Largest kernel argument `t - s` that must be frozen out at `t_end`.
    pub tau_max: Option<f64>,
    pub check_stability: bool,
    /// Keep every `n`-th state in the trajectory (0: initial and final only).
    pub checkpoint_every: usize,
}

impl ForwardConfig {
    /// `eps = 4 ds`.
    pub fn with_spacing(ds: f64) -> Self {
        ForwardConfig {
            ds,
            dt: None,
            shape: PulseShape { epsilon: 4.0 * ds },
            t_end: None,
            tau_max: None,
            check_stability: true,
            checkpoint_every: 0,
        }
    }
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Classical RK4 on the full equation.
    Rk4,
    /// RK4 with the parts of degree `1..=J` in `V` carried separately plus
    /// the remainder of degree `> J`.
    GradedRk4(usize),
}

/// Solution slice at one time, all requested incoming nodes at once.
/// Layout `values[(k * n + i) * ncol + col]` over outgoing node `k`, `s'`
/// index `i` and column `col = comp * n_in + jj`.
#[derive(Clone, Debug)]
pub struct PropagationState {
    pub t: f64,
    pub frame: SLayout,
    pub sphere: Arc<SphereQuadrature>,
    pub incoming: Vec<usize>,
    /// Number of stored parts per incoming node.
    pub parts: usize,
    pub values: Vec<f64>,
    pub dt: f64,
    pub shape: PulseShape,
    /// Part 0 carries the free pulse.
    pub free_in_part0: bool,
}

impl PropagationState {
    fn ncol(&self) -> usize {
        self.parts * self.incoming.len()
    }

    pub fn get(&self, k: usize, i: usize, part: usize, jj: usize) -> f64 {
        self.values[(k * self.frame.n + i) * self.ncol() + part * self.incoming.len() + jj]
    }

    /// One part for one incoming node, as a field on `s' x sphere`.
    pub fn slice(&self, part: usize, jj: usize) -> CylinderField {
        let grid = SGrid { s_min: self.frame.s0, n_s: self.frame.n, ds: self.frame.ds };
        let mut out = CylinderField::zeros(&grid, &self.sphere);
        for k in 0..self.sphere.len() {
            for i in 0..self.frame.n {
                out.values[k * self.frame.n + i] = C64::new(self.get(k, i, part, jj), 0.0);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Sum of all parts as a single-part state.
    pub fn total(&self) -> PropagationState {
        let nin = self.incoming.len();
        let ncol = self.ncol();
        let mut values = vec![0.0; self.values.len() / self.parts];
        for (row, chunk) in self.values.chunks(ncol).enumerate() {
            for p in 0..self.parts {
                for jj in 0..nin {
                    values[row * nin + jj] += chunk[p * nin + jj];
                }
            }
        }
        PropagationState { values, parts: 1, ..self.clone() }
    }

    /// Part `part` alone as a single-part state.
    pub fn part(&self, part: usize) -> PropagationState {
        let nin = self.incoming.len();
        let values = self.values.chunks(self.ncol()).flat_map(|c| c[part * nin..(part + 1) * nin].to_vec()).collect();
        let free_in_part0 = self.free_in_part0 && part == 0;
        PropagationState { values, parts: 1, free_in_part0, ..self.clone() }
    }

    pub fn norm_l2(&self) -> f64 {
        let ncol = self.ncol();
        let mut acc = 0.0;
        for k in 0..self.sphere.len() {
            let w = self.sphere.weights[k];
            let rows = &self.values[k * self.frame.n * ncol..(k + 1) * self.frame.n * ncol];
            acc += w * rows.iter().map(|v| v * v).sum::<f64>();
        }
        (acc * self.frame.ds).sqrt()
    }
}

/// Saved states and the final solution, split by degree in `V` when graded.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<PropagationState>,
    pub scheme: Scheme,
    /// Relative change of the frozen-out window over the last step.
    pub last_step_change: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &PropagationState {
        self.states.last().expect("trajectory holds at least one state")
    }
}

/// Prepared solver for one potential. Immutable; solves for different
/// incoming nodes are independent.
#[derive(Clone, Debug)]
pub struct ForwardSolver {
    pub potential: ScalarField,
    pub sphere: Arc<SphereQuadrature>,
    pub config: ForwardConfig,
    pub frame: SLayout,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub tau_max: f64,
    pair: GriddedRadon,
    vals: Vec<f64>,
    c_sq: f64,
    /// Gather and derivative-splat tables per shift class.
    tables: Vec<(Footprints, Footprints)>,
}

impl ForwardSolver {
    pub fn new(potential: &ScalarField, sphere: &Arc<SphereQuadrature>, config: &ForwardConfig) -> Result<Self> {
        let rho = potential.support_radius;
        let eps = config.shape.epsilon;
        let ds = config.ds;
        let pair = GriddedRadon::new(&potential.grid, rho, sphere, ds);
        let reach = pair.reach();
        let t0 = -rho - 4.0 * eps;
        let tau_max = config.tau_max.unwrap_or(2.0 * rho + 4.0 * eps);
        let t_end = config.t_end.unwrap_or(3.0 * rho + 8.0 * eps);
        if t_end < rho + 4.0 * eps {
            return Err(Error::InvalidConfig(format!("t_end {t_end} < rho + 4 eps: pulse has not cleared the potential")));
        }
        let dt_req = config.dt.unwrap_or(ds);
        let n_steps = ((t_end - t0) / dt_req - 1e-9).ceil().max(1.0) as usize;
        let dt = (t_end - t0) / n_steps as f64;
        // s' = s - t ranges over [-rho - t_end, 2 rho + 4 eps] plus the kernel reach
        let lo = ((-rho - t_end - reach) / ds).floor() as i64 - 2;
        let hi = ((2.0 * rho + 4.0 * eps + reach) / ds).ceil() as i64 + 2;
        let frame = SLayout { s0: lo as f64 * ds, ds, n: (hi - lo + 1) as usize };
        pair.check_layout(&frame, t0)?;
        pair.check_layout(&frame, t_end)?;
        let vals = pair.voxels.iter().map(|&i| potential.values[i]).collect();
        let solver = ForwardSolver {
            potential: potential.clone(),
            sphere: sphere.clone(),
            config: config.clone(),
            frame,
            t0,
            t_end,
            dt,
            n_steps,
            tau_max,
            pair,
            vals,
            c_sq: Constants::three().c_sq(),
            tables: Vec::new(),
        };
        let mut solver = solver;
        // tabulate the shift classes modulo ds of all RK4 stages when few
        let mut bases: Vec<f64> = Vec::new();
        for n in 0..=2 * n_steps {
            let shift = t0 + 0.5 * n as f64 * dt;
            let frac = ((shift - t0) / ds).rem_euclid(1.0);
            let known = bases.iter().any(|&c| {
                let d = ((c - t0) / ds - frac).abs();
                d < 1e-9 || (1.0 - d) < 1e-9
            });
            if !known {
                bases.push(t0 + frac * ds);
            }
            if bases.len() > 4 {
                break;
            }
        }
        let bytes = bases.len() * 2 * solver.pair.table_len() * 8;
        if bases.len() <= 4 && bytes <= TABLE_BYTES {
            solver.tables = bases
                .iter()
                .map(|&b| (solver.pair.footprints(&frame, b, false), solver.pair.footprints(&frame, b, true)))
                .collect();
        }
        if config.check_stability {
            let product = dt * solver.operator_norm()?;
            if product > 0.5 {
                return Err(Error::StabilityViolation { dt, product });
            }
        }
        Ok(solver)
    }

    pub fn rho(&self) -> f64 {
        self.potential.support_radius
    }

    pub fn shape(&self) -> PulseShape {
        self.config.shape
    }

    fn gather(&self, data: &[f64], t: f64, ncol: usize, out: &mut [f64]) {
        match self.tables.iter().find(|tb| tb.0.offset(&self.frame, t).is_some()) {
            Some(tb) => self.pair.gather_table(data, &self.frame, t, ncol, &tb.0, out),
            None => self.pair.gather(data, &self.frame, t, ncol, false, out),
        }
    }

    fn dsplat(&self, f: &[f64], t: f64, ncol: usize, out: &mut [f64]) {
        match self.tables.iter().find(|tb| tb.1.offset(&self.frame, t).is_some()) {
            Some(tb) => self.pair.splat_table(f, &self.frame, t, ncol, &tb.1, out),
            None => self.pair.splat(f, &self.frame, t, ncol, true, out),
        }
    }

    /// Power-iteration estimate of `|V_LP|` with the same kernels.
    pub fn operator_norm(&self) -> Result<f64> {
        let s_grid = SGrid::with_spacing(self.rho() + self.pair.reach() + 4.0 * self.config.ds, self.config.ds)?;
        let mut op = VlpOperator::new(&self.potential, &s_grid, &self.sphere)?;
        op.truncate = false;
        op.norm_estimate(12, 17)
    }

    fn free_column(&self, t: f64, theta: &[f64; 3], out: &mut [f64], stride: usize) {
        let shape = self.shape();
        for (v, p) in self.pair.points.iter().enumerate() {
            out[v * stride] = shape.profile(dot(p, theta) - t);
        }
    }

    /// Right-hand side for `ncol = parts * nin` columns; see the module notes.
    fn rhs(&self, t: f64, a: &[f64], incoming: &[usize], grades: usize, out: &mut [f64]) {
        let nin = incoming.len();
        let parts = grades + 1;
        let ncol = parts * nin;
        let nv = self.pair.n_voxels();
        let mut g = vec![0.0; nv * ncol];
        self.gather(a, t, ncol, &mut g);
        let mut u = vec![0.0; nv * ncol];
        let c2 = self.c_sq;
        for (jj, &j) in incoming.iter().enumerate() {
            let theta = self.sphere.nodes[j];
            if grades == 0 {
                self.free_column(t, &theta, &mut u[jj..], ncol);
                for v in 0..nv {
                    u[v * ncol + jj] -= c2 * g[v * ncol + jj];
                }
            } else {
                self.free_column(t, &theta, &mut u[jj..], ncol);
                for v in 0..nv {
                    let row = v * ncol;
                    for d in 2..=grades {
                        u[row + (d - 1) * nin + jj] = -c2 * g[row + (d - 2) * nin + jj];
                    }
                    u[row + grades * nin + jj] =
                        -c2 * (g[row + (grades - 1) * nin + jj] + g[row + grades * nin + jj]);
                }
            }
        }
        for (v, val) in self.vals.iter().enumerate() {
            u[v * ncol..(v + 1) * ncol].iter_mut().for_each(|x| *x *= val);
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        self.dsplat(&u, t, ncol, out);
    }

    fn beta_from(&self, t: f64, a: &[f64], incoming: &[usize], parts: usize) -> PropagationState {
        let nin = incoming.len();
        let ncol = parts * nin;
        let shape = self.shape();
        let mut values: Vec<f64> = a.iter().map(|x| -self.c_sq * x).collect();
        // free part goes with the first stored part
        for (jj, &j) in incoming.iter().enumerate() {
            let w = self.sphere.weights[j];
            for i in 0..self.frame.n {
                let s = self.frame.s0 + i as f64 * self.frame.ds;
                values[(j * self.frame.n + i) * ncol + jj] += shape.profile(s) / w;
            }
        }
        PropagationState {
            t,
            frame: self.frame,
            sphere: self.sphere.clone(),
            incoming: incoming.to_vec(),
            parts,
            values,
            dt: self.dt,
            shape,
            free_in_part0: true,
        }
    }

    /// Rows of the frame with `s = s' + t_end > rho + reach`, restricted to
    /// `s' >= -tau_max`: the part of the slice read as kernel data.
    fn frozen_rows(&self) -> (usize, usize) {
        let lo = (-self.tau_max).max(self.rho() + self.pair.reach() - self.t_end);
        let i0 = ((lo - self.frame.s0) / self.frame.ds).ceil().max(0.0) as usize;
        (i0, self.frame.n)
    }

    /// Integrate from `t0 = -rho - 4 eps` to `t_end` with RK4.
    /// With `GradedRk4(J)` the returned states hold `J + 1` parts: the terms
    /// of degree `1..=J` in `V` and the remainder; the free pulse is added to
    /// part 0 (degree 1 when graded).
    pub fn solve(&self, incoming: &[usize], scheme: Scheme) -> Result<Trajectory> {
        let grades = match scheme {
            Scheme::Rk4 => 0,
            Scheme::GradedRk4(j) if j >= 1 => j,
            Scheme::GradedRk4(_) => return Err(Error::InvalidConfig("graded scheme needs J >= 1".into())),
        };
        for &j in incoming {
            if j >= self.sphere.len() {
                return Err(Error::InvalidConfig(format!("incoming node {j} out of range")));
            }
        }
        let parts = grades + 1;
        let ncol = parts * incoming.len();
        let len = self.sphere.len() * self.frame.n * ncol;
        let mut a = vec![0.0; len];
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let mut tmp = vec![0.0; len];
        let h = self.dt;
        let mut states = vec![self.beta_from(self.t0, &a, incoming, parts)];
        let (r0, r1) = self.frozen_rows();
        let mut last_change = 0.0;
        for step in 0..self.n_steps {
            let t = self.t0 + step as f64 * h;
            self.rhs(t, &a, incoming, grades, &mut k1);
            axpy(&a, 0.5 * h, &k1, &mut tmp);
            self.rhs(t + 0.5 * h, &tmp, incoming, grades, &mut k2);
            axpy(&a, 0.5 * h, &k2, &mut tmp);
            self.rhs(t + 0.5 * h, &tmp, incoming, grades, &mut k3);
            axpy(&a, h, &k3, &mut tmp);
            self.rhs(t + h, &tmp, incoming, grades, &mut k4);
            let mut change = 0.0;
            let mut size = 0.0;
            for idx in 0..len {
                let inc = h / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
                a[idx] += inc;
                let i = (idx / ncol) % self.frame.n;
                if i >= r0 && i < r1 {
                    change += inc * inc;
                    size += a[idx] * a[idx];
                }
            }
            last_change = if size > 0.0 { (change / size).sqrt() } else { 0.0 };
            if !a.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged { iter: step, residual: f64::NAN });
            }
            let every = self.config.checkpoint_every;
            if every > 0 && (step + 1) % every == 0 && step + 1 < self.n_steps {
                states.push(self.beta_from(t + h, &a, incoming, parts));
            }
        }
        states.push(self.beta_from(self.t_end, &a, incoming, parts));
        Ok(Trajectory { states, scheme, last_step_change: last_change })
    }

    /// Born terms `alpha_1 ..= alpha_J` at `t_end` by trapezoidal Volterra
    /// quadrature: `alpha_j = c^2 A_j` with `A_j' = d/ds R (V R^t_t alpha_{j-1})`
    /// and `alpha_0` the free pulse. The solution is `sum (-1)^j alpha_j`.
    /// Part `j - 1` of the returned state is `alpha_j`.
    pub fn born_terms(&self, incoming: &[usize], j_max: usize) -> Result<PropagationState> {
        if j_max == 0 {
            return Err(Error::InvalidConfig("Born order must be >= 1".into()));
        }
        let nin = incoming.len();
        let nv = self.pair.n_voxels();
        let row_len = self.sphere.len() * self.frame.n * nin;
        let h = self.dt;
        let c2 = self.c_sq;
        // A_j at the current time and F_j at the previous time, per order
        let mut a = vec![vec![0.0; row_len]; j_max];
        let mut f_prev = vec![vec![0.0; row_len]; j_max];
        let forcing = |t: f64, a: &Vec<Vec<f64>>, j: usize, out: &mut [f64]| {
            let mut u = vec![0.0; nv * nin];
            if j == 0 {
                for (jj, &node) in incoming.iter().enumerate() {
                    self.free_column(t, &self.sphere.nodes[node], &mut u[jj..], nin);
                }
            } else {
                self.gather(&a[j - 1], t, nin, &mut u);
                u.iter_mut().for_each(|x| *x *= c2);
            }
            for (v, val) in self.vals.iter().enumerate() {
                u[v * nin..(v + 1) * nin].iter_mut().for_each(|x| *x *= val);
            }
            out.iter_mut().for_each(|x| *x = 0.0);
            self.dsplat(&u, t, nin, out);
        };
        for j in 0..j_max {
            let mut f = vec![0.0; row_len];
            forcing(self.t0, &a, j, &mut f);
            f_prev[j] = f;
        }
        let mut f = vec![0.0; row_len];
        for step in 0..self.n_steps {
            let t1 = self.t0 + (step + 1) as f64 * h;
            for j in 0..j_max {
                forcing(t1, &a, j, &mut f);
                for ((x, fp), fc) in a[j].iter_mut().zip(f_prev[j].iter_mut()).zip(&f) {
                    *x += 0.5 * h * (*fp + fc);
                    *fp = *fc;
                }
            }
        }
        let mut values = vec![0.0; row_len * j_max];
        for (j, aj) in a.iter().enumerate() {
            for (r, chunk) in aj.chunks(nin).enumerate() {
                for (jj, x) in chunk.iter().enumerate() {
                    values[r * nin * j_max + j * nin + jj] = c2 * x;
                }
            }
        }
        Ok(PropagationState {
            t: self.t_end,
            frame: self.frame,
            sphere: self.sphere.clone(),
            incoming: incoming.to_vec(),
            parts: j_max,
            values,
            dt: self.dt,
            shape: self.shape(),
            free_in_part0: false,
        })
    }

    /// Kernel columns from the final RK4 state (all parts summed).
    pub fn extract_kernel(&self, traj: &Trajectory, tol: f64) -> Result<ScatteringKernel> {
        if traj.last_step_change > tol {
            return Err(Error::NotFrozenOut(traj.last_step_change));
        }
        Ok(self.kernel_from_state(&traj.final_state().total()))
    }

    /// Reads `kappa(tau) = beta(t_end, -tau)` on `tau <= tau_max`.
    pub fn kernel_from_state(&self, state: &PropagationState) -> ScatteringKernel {
        let (r0, _) = self.frozen_rows();
        let nin = state.incoming.len();
        let ncol = state.ncol();
        let nk = self.sphere.len();
        // tau_m = -s'_{i}, i from the top row down to r0
        let n_tau = self.frame.n - r0;
        let tau0 = -(self.frame.s0 + (self.frame.n - 1) as f64 * self.frame.ds);
        let mut values = vec![0.0; nin * state.parts * nk * n_tau];
        let mut out_idx = 0;
        for p in 0..state.parts {
            for jj in 0..nin {
                for k in 0..nk {
                    for m in 0..n_tau {
                        let i = self.frame.n - 1 - m;
                        values[out_idx] = state.values[(k * self.frame.n + i) * ncol + p * nin + jj];
                        out_idx += 1;
                    }
                }
            }
        }
        ScatteringKernel {
            tau: SLayout { s0: tau0, ds: self.frame.ds, n: n_tau },
            sphere: self.sphere.clone(),
            incoming: state.incoming.clone(),
            parts: state.parts,
            values,
            shape: state.shape,
            rho: self.rho(),
            free_in_part0: state.free_in_part0,
        }
    }
}

fn axpy(a: &[f64], c: f64, x: &[f64], out: &mut [f64]) {
    for ((o, ai), xi) in out.iter_mut().zip(a).zip(x) {
        *o = ai + c * xi;
    }
}

/// `kappa(tau, w_k; theta_j)` convolved with the pulse, in the variable
/// `tau = t - s`. Layout `values[((part * n_in + jj) * n_nodes + k) * n + m]`.
#[derive(Clone, Debug)]
pub struct ScatteringKernel {
    pub tau: SLayout,
    pub sphere: Arc<SphereQuadrature>,
    pub incoming: Vec<usize>,
    pub parts: usize,
    pub values: Vec<f64>,
    pub shape: PulseShape,
    pub rho: f64,
    pub free_in_part0: bool,
}

impl ScatteringKernel {
    pub fn tau_at(&self, m: usize) -> f64 {
        self.tau.s0 + m as f64 * self.tau.ds
    }

    pub fn column(&self, part: usize, jj: usize, k: usize) -> &[f64] {
        let n = self.tau.n;
        let start = ((part * self.incoming.len() + jj) * self.sphere.len() + k) * n;
        &self.values[start..start + n]
    }

    /// Fraction of the squared L2 mass (over outgoing nodes) at `tau < cut`,
    /// for one part and incoming column.
    pub fn mass_fraction_below(&self, part: usize, jj: usize, cut: f64) -> f64 {
        let (mut below, mut total) = (0.0, 0.0);
        for k in 0..self.sphere.len() {
            let w = self.sphere.weights[k];
            for (m, v) in self.column(part, jj, k).iter().enumerate() {
                total += w * v * v;
                if self.tau_at(m) < cut {
                    below += w * v * v;
                }
            }
        }
        if total > 0.0 {
            below / total
        } else {
            0.0
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete Fourier-Laplace transform `int exp(-i lambda tau) kappa d tau`
    /// of one column by the trapezoid rule.
    pub fn transform(&self, part: usize, jj: usize, k: usize, lambda: C64) -> C64 {
        let ds = self.tau.ds;
        self.column(part, jj, k)
            .iter()
            .enumerate()
            .map(|(m, v)| (C64::new(0.0, -1.0) * lambda * self.tau_at(m)).exp() * *v)
            .sum::<C64>()
            * ds
    }
}

/// `kappa(s, S theta_j, theta_j)` on a symmetric s-grid, node `j` indexing
/// the incoming direction; the real time-domain values are stored.
#[derive(Clone, Debug)]
pub struct BackscatterData {
    pub values: CylinderField,
    pub s_map: OrthogonalMap,
    pub shape: PulseShape,
    pub rho: f64,
}

/// Weights `q_k` with `sum_k q_k f(w_k) = P_L f (p)` for the quadrature
/// projection onto harmonics of degree `<= lmax`.
pub fn harmonic_weights(sphere: &SphereQuadrature, lmax: usize, p: &[f64; 3]) -> Result<Vec<f64>> {
    if 2 * lmax > sphere.degree {
        return Err(Error::InterpolationDegreeTooLow { rule_degree: sphere.degree, fit_degree: lmax });
    }
    let yp = real_sph_harmonics(lmax, p);
    Ok(sphere
        .nodes
        .iter()
        .zip(&sphere.weights)
        .map(|(w, wt)| wt * real_sph_harmonics(lmax, w).iter().zip(&yp).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

/// Restrict part `part` of a full kernel (every node incoming, in order) to
/// `w = S theta`, resampled onto `out_grid` (same spacing, zero outside the
/// kernel's range). Directions `S theta_j` that are nodes are read directly;
/// others by harmonic projection of degree `lmax` (default `degree / 2`).
pub fn restrict_backscatter(
    kernel: &ScatteringKernel,
    part: usize,
    s_map: &OrthogonalMap,
    out_grid: &SGrid,
    lmax: Option<usize>,
) -> Result<BackscatterData> {
    let sphere = &kernel.sphere;
    if kernel.incoming != (0..sphere.len()).collect::<Vec<_>>() {
        return Err(Error::InvalidConfig("restriction needs every node as an incoming direction".into()));
    }
    if (out_grid.ds - kernel.tau.ds).abs() > 1e-12 * kernel.tau.ds {
        return Err(Error::GridMismatch(format!("output ds {} != kernel ds {}", out_grid.ds, kernel.tau.ds)));
    }
    let lmax = lmax.unwrap_or(sphere.degree / 2);
    let mut out = CylinderField::zeros(out_grid, sphere);
    let n = out_grid.n_s;
    for j in 0..sphere.len() {
        let target = s_map.apply(&sphere.nodes[j]);
        let weights: Vec<(usize, f64)> = match sphere.find_node(&target, 1e-10) {
            Some(k) => vec![(k, 1.0)],
            None => harmonic_weights(sphere, lmax, &target)?.into_iter().enumerate().collect(),
        };
        for i in 0..n {
            let m = ((out_grid.s(i) - kernel.tau.s0) / kernel.tau.ds).round();
            if m < 0.0 || m as usize >= kernel.tau.n {
                continue;
            }
            let m = m as usize;
            let mut acc = 0.0;
            for &(k, q) in &weights {
                let mut v = kernel.column(part, j, k)[m];
                if k == j && part == 0 && kernel.free_in_part0 {
                    // free pulse: an angular delta at theta_j, zero at S theta_j
                    v -= kernel.shape.profile(-kernel.tau_at(m)) / sphere.weights[j];
                }
                acc += q * v;
            }
            out.values[j * n + i] = C64::new(acc, 0.0);
        }
    }
    out.s_support = (-2.0 * kernel.rho - kernel.shape.support_radius(), out_grid.s_max());
    Ok(BackscatterData { values: out, s_map: s_map.clone(), shape: kernel.shape, rho: kernel.rho })
}

/// Least-squares fit of `log n_j = a + j log b - log j!` to Born-term norms
/// `n_first, n_first+1, ...`, with the residual of each point.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FactorialFit {
    pub a: f64,
    pub log_b: f64,
    pub residuals: Vec<f64>,
}

impl FactorialFit {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn factorial_fit(first: usize, norms: &[f64]) -> Result<FactorialFit> {
    if first == 0 || norms.len() < 2 {
        return Err(Error::InvalidConfig("factorial fit needs at least two orders".into()));
    }
    if let Some(n) = norms.iter().find(|n| !(**n > 0.0) || !n.is_finite()) {
        return Err(Error::InvalidConfig(format!("factorial fit needs positive norms, got {n}")));
    }
    let mut log_fact: f64 = (1..first).map(|j| (j as f64).ln()).sum();
    let pts: Vec<(f64, f64)> = norms
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let j = (first + i) as f64;
            log_fact += j.ln();
            (j, n.ln() + log_fact)
        })
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let log_b = sxy / sxx;
    let a = my - log_b * mx;
    let residuals = pts.iter().map(|(x, y)| y - a - log_b * x).collect();
    Ok(FactorialFit { a, log_b, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sphere_quadrature, BallGrid};

    fn small(amp: f64) -> (ScalarField, Arc<SphereQuadrature>, ForwardConfig) {
        let grid = BallGrid::new(1.0, 1.0, 12).unwrap();
        let v = ScalarField::from_fn(&grid, 1.0, |x| amp * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.15).exp());
        let sphere = sphere_quadrature(11).unwrap().shared();
        (v, sphere, ForwardConfig::with_spacing(grid.spacing))
    }

    #[test]
    fn pulse_is_normalized() {
        let p = PulseShape::new(0.2).unwrap();
        let ds = 0.005;
        let mass: f64 = (-400..=400).map(|i| p.profile(i as f64 * ds)).sum::<f64>() * ds;
        assert!((mass - 1.0).abs() < 1e-8);
        assert_eq!(p.hat(C64::new(0.0, 0.0)), C64::new(1.0, 0.0));
        assert!(p.profile(p.support_radius()) < 1e-12 * p.profile(0.0));
    }

    #[test]
    fn free_transport_is_exact() {
        let (v, sphere, cfg) = small(0.0);
        let solver = ForwardSolver::new(&v, &sphere, &cfg).unwrap();
        let traj = solver.solve(&[3], Scheme::Rk4).unwrap();
        let a = traj.states.first().unwrap();
        let b = traj.final_state();
        let drift = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-10);
    }

    #[test]
    fn graded_parts_sum_to_plain_rk4() {
        let (v, sphere, cfg) = small(3.0);
        let solver = ForwardSolver::new(&v, &sphere, &cfg).unwrap();
        let plain = solver.solve(&[0, 5], Scheme::Rk4).unwrap();
        let graded = solver.solve(&[0, 5], Scheme::GradedRk4(2)).unwrap();
        let a = plain.final_state();
        let b = graded.final_state().total();
        let err = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let size = a.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(err <= 1e-12 * size, "{err}");
    }

    #[test]
    fn graded_parts_are_homogeneous() {
        let (v, sphere, cfg) = small(2.0);
        let s1 = ForwardSolver::new(&v, &sphere, &cfg).unwrap();
        let s2 = ForwardSolver::new(&v.scaled(0.5), &sphere, &cfg).unwrap();
        let a = s1.solve(&[2], Scheme::GradedRk4(3)).unwrap();
        let b = s2.solve(&[2], Scheme::GradedRk4(3)).unwrap();
        for d in 1..3 {
            let pa = a.final_state().part(d);
            let pb = b.final_state().part(d);
            let scale = 0.5f64.powi(d as i32 + 1);
            let err = pa.values.iter().zip(&pb.values).map(|(x, y)| (x * scale - y).abs()).fold(0.0, f64::max);
            let size = pb.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(err <= 1e-10 * size, "degree {} err {err}", d + 1);
        }
    }

    #[test]
    fn born_terms_vanish_for_zero_potential() {
        let (v, sphere, cfg) = small(0.0);
        let solver = ForwardSolver::new(&v, &sphere, &cfg).unwrap();
        let b = solver.born_terms(&[1], 3).unwrap();
        assert!(b.values.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn trapezoid_and_rk4_first_order_agree() {
        let (v, sphere, cfg) = small(1.0);
        let solver = ForwardSolver::new(&v, &sphere, &cfg).unwrap();
        let rk = solver.solve(&[4], Scheme::GradedRk4(1)).unwrap();
        let mut lin = rk.final_state().part(0);
        // remove the free pulse and flip the sign: alpha_1 = -(beta^1 - beta_0)
        let beta0 = solver.solve(&[4], Scheme::Rk4).unwrap().states[0].clone();
        for (x, f) in lin.values.iter_mut().zip(&beta0.values) {
            *x = f - *x;
        }
        let born = solver.born_terms(&[4], 1).unwrap();
        let d: f64 = lin.values.iter().zip(&born.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let n: f64 = born.values.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(d / n < 2e-2, "{}", d / n);
    }

    #[test]
    fn rejects_large_steps() {
        let (v, sphere, mut cfg) = small(400.0);
        cfg.dt = Some(0.5);
        assert!(matches!(ForwardSolver::new(&v, &sphere, &cfg), Err(Error::StabilityViolation { .. })));
    }

    #[test]
    fn free_kernel_and_support() {
        let (v, sphere, cfg) = small(0.0);
        let solver = ForwardSolver::new(&v, &sphere, &cfg).unwrap();
        let traj = solver.solve(&[7], Scheme::Rk4).unwrap();
        let k = solver.extract_kernel(&traj, 1e-6).unwrap();
        let col = k.column(0, 0, 7);
        for (m, v) in col.iter().enumerate() {
            let want = k.shape.profile(k.tau_at(m)) / sphere.weights[7];
            assert!((v - want).abs() < 1e-12 * want.abs().max(1.0));
        }
        assert!(k.column(0, 0, 8).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn kernel_support_left_bound() {
        let (v, sphere, cfg) = small(2.0);
        let solver = ForwardSolver::new(&v, &sphere, &cfg).unwrap();
        let traj = solver.solve(&[0], Scheme::Rk4).unwrap();
        let k = solver.extract_kernel(&traj, 1e-6).unwrap();
        let cut = -2.0 * solver.rho() - k.shape.support_radius();
        assert!(k.mass_fraction_below(0, 0, cut) <= 1e-6);
    }

    #[test]
    fn factorial_fit_recovers_exact_model() {
        let mut f = 1.0;
        let norms: Vec<f64> = (1..=6)
            .map(|j| {
                f *= j as f64;
                0.7 * 2.5f64.powi(j) / f
            })
            .collect();
        let fit = factorial_fit(1, &norms).unwrap();
        let tail = factorial_fit(3, &norms[2..]).unwrap();
        assert!((tail.log_b - fit.log_b).abs() < 1e-12 && (tail.a - fit.a).abs() < 1e-12);
        assert!((fit.log_b - 2.5f64.ln()).abs() < 1e-12 && (fit.a - 0.7f64.ln()).abs() < 1e-12);
        assert!(fit.max_residual() < 1e-12);
        assert!(factorial_fit(1, &[1.0]).is_err());
        assert!(factorial_fit(1, &[1.0, 0.0]).is_err());
    }
}
