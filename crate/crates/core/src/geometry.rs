//! Grids, sphere quadrature, the scattering geometry `S` and the
//! normalization constants shared by every other module.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inverse(m: &Mat3) -> Option<Mat3> {
    let d = det(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, e) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) / d;
        }
    }
    Some(inv)
}

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(m: &Mat3) -> [f64; 3] {
    let mut a = *m;
    for _ in 0..64 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 * (1.0 + a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2)) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut r = IDENTITY;
            r[p][p] = c;
            r[q][q] = c;
            r[p][q] = s;
            r[q][p] = -s;
            a = mat_mul(&transpose(&r), &mat_mul(&a, &r));
        }
    }
    let mut e = [a[0][0], a[1][1], a[2][2]];
    e.sort_by(|x, y| x.partial_cmp(y).unwrap());
    e
}

/// Spectral norm of a general 3x3 matrix.
pub fn spectral_norm(m: &Mat3) -> f64 {
    let mtm = mat_mul(&transpose(m), m);
    sym_eigenvalues(&mtm)[2].max(0.0).sqrt()
}

/// Dimension-dependent normalization. Only n = 3 is implemented.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Constants {
    pub n: usize,
    /// `c_n = 2^{-1/2} (2 pi)^{-(n-1)/2}`, the factor making `c_n D_s R` an isometry.
    pub c_n: f64,
    /// `1/2 (2 pi)^{-(n-1)}`
    pub plancherel_factor: f64,
}

impl Constants {
    pub fn three() -> Self {
        Constants { n: 3, c_n: 1.0 / (2.0 * 2f64.sqrt() * PI), plancherel_factor: 0.5 / (2.0 * PI).powi(2) }
    }

    pub fn c_sq(&self) -> f64 {
        self.c_n * self.c_n
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::three()
    }
}

/// Cartesian grid on the cube `[-rho_box, rho_box]^3` with cell-centred,
/// origin-symmetric axis coordinates.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BallGrid {
    pub rho: f64,
    pub rho_box: f64,
    pub n_side: usize,
    pub spacing: f64,
}

pub const MIN_N_SIDE: usize = 8;

impl BallGrid {
    pub fn new(rho: f64, rho_box: f64, n_side: usize) -> Result<Self> {
        if n_side < MIN_N_SIDE {
            return Err(Error::GridTooCoarse(format!("n_side = {n_side} < {MIN_N_SIDE}")));
        }
        if !(rho > 0.0) || !(rho_box >= rho) {
            return Err(Error::InvalidConfig(format!("need 0 < rho <= rho_box, got rho = {rho}, rho_box = {rho_box}")));
        }
        Ok(BallGrid { rho, rho_box, n_side, spacing: 2.0 * rho_box / n_side as f64 })
    }

    pub fn len(&self) -> usize {
        self.n_side.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.n_side == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.rho_box + (i as f64 + 0.5) * self.spacing
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.n_side).map(|i| self.coord(i)).collect()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_side + j) * self.n_side + k
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        let n = self.n_side;
        [self.coord(idx / (n * n)), self.coord((idx / n) % n), self.coord(idx % n)]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    /// Same geometry with a different support radius.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        BallGrid::new(rho, self.rho_box, self.n_side)
    }
}

/// Uniform periodic s-grid `s_i = s_min + i ds`, `i < n_s`. Symmetric grids
/// use `s_min = -L`, `ds = 2L / n_s`, so that `i -> n_s - i` is `s -> -s`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SGrid {
    pub s_min: f64,
    pub n_s: usize,
    pub ds: f64,
}

impl SGrid {
    pub fn symmetric(half_length: f64, n_s: usize) -> Result<Self> {
        if !n_s.is_power_of_two() || n_s < 4 {
            return Err(Error::InvalidConfig(format!("n_s = {n_s} must be a power of two >= 4")));
        }
        if !(half_length > 0.0) {
            return Err(Error::InvalidConfig("s half-length must be positive".into()));
        }
        Ok(SGrid { s_min: -half_length, n_s, ds: 2.0 * half_length / n_s as f64 })
    }

    /// Symmetric grid with the given spacing whose half-length is at least `half_length`.
    pub fn with_spacing(half_length: f64, ds: f64) -> Result<Self> {
        let n = ((2.0 * half_length / ds).ceil() as usize).next_power_of_two().max(4);
        SGrid::symmetric(n as f64 * ds / 2.0, n)
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_min + i as f64 * self.ds
    }

    pub fn s_max(&self) -> f64 {
        self.s(self.n_s - 1)
    }

    pub fn half_length(&self) -> f64 {
        -self.s_min
    }

    pub fn is_symmetric(&self) -> bool {
        ((self.s_min + self.n_s as f64 * self.ds / 2.0).abs()) < 1e-12 * self.ds
    }

    /// Index of `-s_i` on a symmetric grid.
    pub fn mirror(&self, i: usize) -> usize {
        (self.n_s - i) % self.n_s
    }

    /// Angular frequencies of the discrete Fourier modes in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_s as i64;
        let base = 2.0 * PI / (self.n_s as f64 * self.ds);
        (0..n).map(|k| if k <= n / 2 { k } else { k - n } as f64 * base).collect()
    }

    pub fn check_covers(&self, radius: f64) -> Result<()> {
        if self.s_min > -radius || self.s_max() < radius {
            return Err(Error::SRangeTooSmall(format!(
                "grid [{:.4}, {:.4}] does not cover [-{radius:.4}, {radius:.4}]",
                self.s_min,
                self.s_max()
            )));
        }
        Ok(())
    }
}

/// Symmetric sphere rule closed under the antipodal map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereQuadrature {
    /// Polynomial degree integrated exactly.
    pub degree: usize,
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub antipode: Vec<usize>,
}

const TABLES: [(usize, &str); 6] = [
    (11, include_str!("../data/lebedev_011.txt")),
    (17, include_str!("../data/lebedev_017.txt")),
    (23, include_str!("../data/lebedev_023.txt")),
    (29, include_str!("../data/lebedev_029.txt")),
    (35, include_str!("../data/lebedev_035.txt")),
    (41, include_str!("../data/lebedev_041.txt")),
];

pub fn supported_orders() -> Vec<usize> {
    TABLES.iter().map(|t| t.0).collect()
}

/// Bundled rule of exactly the given degree.
pub fn sphere_quadrature(order: usize) -> Result<SphereQuadrature> {
    let (deg, text) =
        TABLES.iter().find(|t| t.0 == order).ok_or(Error::UnsupportedOrder(order as i64))?;
    SphereQuadrature::parse(text, *deg)
}

/// Smallest bundled rule whose degree is at least `min_degree`.
pub fn sphere_quadrature_at_least(min_degree: usize) -> Result<SphereQuadrature> {
    let deg = TABLES
        .iter()
        .map(|t| t.0)
        .find(|&d| d >= min_degree)
        .ok_or(Error::UnsupportedOrder(min_degree as i64))?;
    sphere_quadrature(deg)
}

impl SphereQuadrature {
    /// Parse a node table: one `x y z w` line per node, `#` starts a comment.
    pub fn parse(text: &str, degree: usize) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidConfig(format!("node table line {}: {e}", ln + 1)))?;
            if v.len() != 4 {
                return Err(Error::InvalidConfig(format!("node table line {}: expected 4 numbers", ln + 1)));
            }
            nodes.push([v[0], v[1], v[2]]);
            weights.push(v[3]);
        }
        Self::from_nodes(nodes, weights, degree)
    }

    pub fn load(path: &Path, degree: usize) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, degree)
    }

    pub fn from_nodes(nodes: Vec<Vec3>, weights: Vec<f64>, degree: usize) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidConfig("empty or inconsistent node table".into()));
        }
        for (k, p) in nodes.iter().enumerate() {
            if (norm(p) - 1.0).abs() > 1e-12 || !(weights[k] > 0.0) {
                return Err(Error::InvalidConfig(format!("node {k} not unit length or weight not positive")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 4.0 * PI).abs() > 1e-8 {
            return Err(Error::InvalidConfig(format!("weights sum to {total}, expected 4 pi")));
        }
        let mut antipode = vec![usize::MAX; nodes.len()];
        for k in 0..nodes.len() {
            let p = nodes[k];
            let q = (0..nodes.len())
                .find(|&m| nodes[m][0] == -p[0] && nodes[m][1] == -p[1] && nodes[m][2] == -p[2])
                .ok_or_else(|| Error::InvalidConfig(format!("node {k} has no exact antipode")))?;
            antipode[k] = q;
        }
        Ok(SphereQuadrature { degree, nodes, weights, antipode })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&Vec3) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    /// Node equal to `dir` within `tol`, if any.
    pub fn find_node(&self, dir: &Vec3, tol: f64) -> Option<usize> {
        self.nodes.iter().position(|p| {
            let d = [p[0] - dir[0], p[1] - dir[1], p[2] - dir[2]];
            norm(&d) <= tol
        })
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }
}

/// Real orthonormal spherical harmonics `Y_lm`, `l <= lmax`, in the order
/// `(l, m)` with `m = -l..=l`; `(lmax + 1)^2` values.
pub fn real_sph_harmonics(lmax: usize, p: &Vec3) -> Vec<f64> {
    let ct = p[2].clamp(-1.0, 1.0);
    let st = (1.0 - ct * ct).max(0.0).sqrt();
    let phi = p[1].atan2(p[0]);
    // normalized associated Legendre functions via stable recurrences
    let mut plm = vec![0.0; (lmax + 1) * (lmax + 1)];
    let idx = |l: usize, m: usize| l * (lmax + 1) + m;
    plm[idx(0, 0)] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=lmax {
        plm[idx(m, m)] = -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st * plm[idx(m - 1, m - 1)];
    }
    for m in 0..lmax {
        plm[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * ct * plm[idx(m, m)];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            plm[idx(l, m)] = a * (ct * plm[idx(l - 1, m)] - b * plm[idx(l - 2, m)]);
        }
    }
    let mut out = Vec::with_capacity((lmax + 1) * (lmax + 1));
    for l in 0..=lmax {
        for mm in -(l as i64)..=(l as i64) {
            let m = mm.unsigned_abs() as usize;
            let v = if mm == 0 {
                plm[idx(l, 0)]
            } else if mm > 0 {
                2f64.sqrt() * plm[idx(l, m)] * (m as f64 * phi).cos()
            } else {
                2f64.sqrt() * plm[idx(l, m)] * (m as f64 * phi).sin()
            };
            out.push(v);
        }
    }
    out
}

/// Orthogonal `S` with `Id - S` invertible, together with its diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OrthogonalMap {
    pub matrix: Mat3,
    pub det_id_minus_s: f64,
    pub orthogonality_defect: f64,
}

pub const DEFAULT_DELTA_S: f64 = 1e-6;
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Accepts `m` iff `m^T m = Id` within 1e-10 and `|det(Id - m)| >= delta_s`.
pub fn validate_scattering_map(m: Mat3, delta_s: f64) -> Result<OrthogonalMap> {
    let mtm = mat_mul(&transpose(&m), &m);
    let mut defect: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            defect = defect.max((mtm[i][j] - IDENTITY[i][j]).abs());
        }
    }
    if !(defect <= ORTHOGONALITY_TOL) {
        return Err(Error::NotOrthogonal { defect });
    }
    let a = id_minus(&m);
    let d = det(&a);
    if !(d.abs() >= delta_s) {
        return Err(Error::IdMinusSSingular { det: d, threshold: delta_s });
    }
    Ok(OrthogonalMap { matrix: m, det_id_minus_s: d, orthogonality_defect: defect })
}

fn id_minus(m: &Mat3) -> Mat3 {
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = IDENTITY[i][j] - m[i][j];
        }
    }
    a
}

impl OrthogonalMap {
    pub fn new(m: Mat3) -> Result<Self> {
        validate_scattering_map(m, DEFAULT_DELTA_S)
    }

    /// `S = -Id`, true backscattering.
    pub fn backscatter() -> Self {
        Self::new([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]).unwrap()
    }

    /// Rotation by `angle` about z followed by the point reflection; orthogonal with det -1.
    pub fn rotoreflection_z(angle: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        Self::new([[-c, s, 0.0], [-s, -c, 0.0], [0.0, 0.0, -1.0]])
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        mat_vec(&self.matrix, v)
    }

    pub fn id_minus_s(&self) -> Mat3 {
        id_minus(&self.matrix)
    }

    /// `||Id - S||`, the dilation factor of the backscattering geometry.
    pub fn dilation(&self) -> f64 {
        spectral_norm(&self.id_minus_s())
    }
}
