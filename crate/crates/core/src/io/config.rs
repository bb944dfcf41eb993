//! Experiment configuration, validated before any compute.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backscatter::InversionConfig;
use crate::error::{Error, Result};
use crate::forward::{ForwardConfig, PulseShape};
use crate::geometry::{
    sphere_quadrature, supported_orders, validate_scattering_map, BallGrid, Mat3, OrthogonalMap, SGrid,
    SphereQuadrature, DEFAULT_DELTA_S,
};
use crate::io::phantom::{make_phantom, Phantom, PhantomSpec};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_side: usize,
    pub rho: f64,
    /// Half side of the cube; defaults to `rho`.
    #[serde(default)]
    pub rho_box: Option<f64>,
    /// Degree of the Lebedev rule.
    pub sphere_degree: usize,
    /// Samples of the s-grid for transform-level work.
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    /// Spacing of the characteristic variable; defaults to the grid spacing.
    #[serde(default)]
    pub ds: Option<f64>,
    /// Pulse width; defaults to `4 ds`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Scattering map; defaults to `-Id`.
    #[serde(default)]
    pub s_matrix: Option<Mat3>,
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub inversion: InversionConfig,
    /// Incoming nodes for Born-series and spectral checks.
    #[serde(default = "default_nodes")]
    pub probe_nodes: Vec<usize>,
    /// Spectral parameters `[re, im]` for spectral checks.
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<[f64; 2]>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_s() -> usize {
    128
}

fn default_nodes() -> Vec<usize> {
    vec![0, 7, 20]
}

fn default_lambdas() -> Vec<[f64; 2]> {
    vec![[1.0, -1.0], [2.0, -1.0], [-1.5, -1.0]]
}

impl ExperimentConfig {
    /// Desk-scale transform configuration: `n_side = 48`, 302 sphere nodes, `n_s = 128`.
    pub fn reference() -> Self {
        ExperimentConfig {
            n_side: 48,
            rho: 1.0,
            rho_box: None,
            sphere_degree: 29,
            n_s: 128,
            ds: None,
            epsilon: None,
            dt: None,
            t_end: None,
            s_matrix: None,
            phantom: PhantomSpec::Gaussian { center: [0.0; 3], sigma: 0.2, amplitude: 1.0 },
            inversion: InversionConfig::default(),
            probe_nodes: default_nodes(),
            lambdas: default_lambdas(),
            output_dir: None,
            seed: 0,
        }
    }

    /// Configuration for forward solves and inversion: `n_side = 16`,
    /// 110 sphere nodes, `ds = h`, `eps = 4 ds`, the bundled phantom.
    pub fn reduced() -> Self {
        ExperimentConfig {
            n_side: 16,
            sphere_degree: 17,
            phantom: PhantomSpec::bundled_small(),
            ..Self::reference()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if !supported_orders().contains(&self.sphere_degree) {
            return Err(Error::UnsupportedOrder(self.sphere_degree as i64));
        }
        if self.n_s < 8 {
            return Err(Error::InvalidConfig(format!("n_s = {} too small", self.n_s)));
        }
        self.s_grid()?;
        let ds = self.ds();
        if !(ds > 0.0) || ds > grid.spacing * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!("ds = {ds} must be positive and at most the grid spacing")));
        }
        PulseShape::new(self.epsilon())?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
            }
        }
        if let Some(t) = self.t_end {
            if t < self.rho + 4.0 * self.epsilon() {
                return Err(Error::InvalidConfig(format!("t_end = {t} < rho + 4 eps")));
            }
        }
        self.s_map()?;
        self.inversion.validate()?;
        let n_nodes = sphere_quadrature(self.sphere_degree)?.len();
        if let Some(&j) = self.probe_nodes.iter().find(|&&j| j >= n_nodes) {
            return Err(Error::InvalidConfig(format!("probe node {j} >= {n_nodes}")));
        }
        if self.lambdas.iter().any(|l| l[1] > 0.0) {
            return Err(Error::WrongHalfPlane(self.lambdas.iter().map(|l| l[1]).fold(f64::MIN, f64::max)));
        }
        let reach = self.phantom.reach();
        if reach > self.rho + 1e-12 {
            return Err(Error::SupportViolation(format!("phantom reaches radius {reach:.4} > rho {:.4}", self.rho)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<BallGrid> {
        BallGrid::new(self.rho, self.rho_box.unwrap_or(self.rho), self.n_side)
    }

    pub fn sphere(&self) -> Result<Arc<SphereQuadrature>> {
        Ok(sphere_quadrature(self.sphere_degree)?.shared())
    }

    pub fn ds(&self) -> f64 {
        self.ds.unwrap_or(2.0 * self.rho_box.unwrap_or(self.rho) / self.n_side as f64)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(4.0 * self.ds())
    }

    /// Symmetric s-grid of `n_s` samples on `[-2 rho, 2 rho)`.
    pub fn s_grid(&self) -> Result<SGrid> {
        SGrid::symmetric(2.0 * self.rho, self.n_s)
    }

    pub fn s_map(&self) -> Result<OrthogonalMap> {
        match self.s_matrix {
            Some(m) => validate_scattering_map(m, DEFAULT_DELTA_S),
            None => Ok(OrthogonalMap::backscatter()),
        }
    }

    pub fn forward(&self) -> Result<ForwardConfig> {
        let mut cfg = ForwardConfig::with_spacing(self.ds());
        cfg.shape = PulseShape::new(self.epsilon())?;
        cfg.dt = self.dt;
        cfg.t_end = self.t_end;
        Ok(cfg)
    }

    pub fn phantom(&self) -> Result<Phantom> {
        make_phantom(&self.phantom, &self.grid()?)
    }

    /// `LPBS_OUT_DIR` overrides the configured output directory.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os("LPBS_OUT_DIR")
            .map(PathBuf::from)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ExperimentConfig::reference().validate().unwrap();
        ExperimentConfig::reduced().validate().unwrap();
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut c = ExperimentConfig::reduced();
        c.sphere_degree = 26;
        assert!(matches!(c.validate(), Err(Error::UnsupportedOrder(26))));
        let mut c = ExperimentConfig::reduced();
        c.s_matrix = Some([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(c.validate(), Err(Error::IdMinusSSingular { .. })));
        let mut c = ExperimentConfig::reduced();
        c.phantom = PhantomSpec::Gaussian { center: [0.9, 0.0, 0.0], sigma: 0.2, amplitude: 1.0 };
        assert!(matches!(c.validate(), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::reduced();
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
