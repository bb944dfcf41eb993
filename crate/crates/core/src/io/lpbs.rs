//! The LPBS container: `b"LPBS"`, a little-endian `u32` version, a `u32`
//! metadata length, UTF-8 JSON metadata, then the payload as little-endian
//! `f64` (complex values as `re, im` pairs).

use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::PulseShape;
use crate::geometry::{sphere_quadrature, BallGrid, Mat3, SGrid, SphereQuadrature};
use crate::io::report::Provenance;
use crate::radon::{CylinderField, ScalarField};

pub const MAGIC: &[u8; 4] = b"LPBS";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Real values on a ball grid, shape `[n, n, n]`.
    Scalar,
    /// Complex values on `sphere x s`, shape `[n_nodes, n_s]`.
    Cylinder,
    /// Real array of any shape.
    Array,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    pub kind: FieldKind,
    pub shape: Vec<usize>,
    pub complex: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<BallGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<SGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_support: Option<(f64, f64)>,
    #[serde(default)]
    pub parity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_matrix: Option<Mat3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    /// Free-form extra fields (labels, the meaning of array axes).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

impl Metadata {
    pub fn new(kind: FieldKind, shape: Vec<usize>, complex: bool) -> Self {
        Metadata {
            kind,
            shape,
            complex,
            grid: None,
            support_radius: None,
            s_grid: None,
            sphere_degree: None,
            s_support: None,
            parity: false,
            pulse: None,
            s_matrix: None,
            provenance: None,
            extra: serde_json::Value::Null,
        }
    }

    /// Number of `f64` values the payload must hold.
    pub fn payload_len(&self) -> usize {
        self.shape.iter().product::<usize>() * if self.complex { 2 } else { 1 }
    }
}

pub fn encode(meta: &Metadata, payload: &[f64]) -> Result<Vec<u8>> {
    if payload.len() != meta.payload_len() {
        return Err(Error::ShapeMismatch(format!(
            "payload holds {} values, shape {:?} needs {}",
            payload.len(),
            meta.shape,
            meta.payload_len()
        )));
    }
    let json = serde_json::to_vec(meta)?;
    let mut out = Vec::with_capacity(12 + json.len() + 8 * payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    let b = bytes.get(at..at + 4).ok_or_else(|| Error::Truncated(format!("missing {what}")))?;
    Ok(u32::from_le_bytes(b.try_into().expect("four bytes")))
}

pub fn decode(bytes: &[u8]) -> Result<(Metadata, Vec<f64>)> {
    let magic = bytes.get(..4).ok_or_else(|| Error::Truncated("missing magic".into()))?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = read_u32(bytes, 4, "version")?;
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let len = read_u32(bytes, 8, "metadata length")? as usize;
    let json = bytes
        .get(12..12 + len)
        .ok_or_else(|| Error::Truncated(format!("metadata needs {len} bytes, {} present", bytes.len().saturating_sub(12))))?;
    let meta: Metadata = serde_json::from_slice(json)?;
    let body = &bytes[12 + len..];
    let need = 8 * meta.payload_len();
    if body.len() < need {
        return Err(Error::Truncated(format!("payload needs {need} bytes, {} present", body.len())));
    }
    if body.len() > need {
        return Err(Error::ShapeMismatch(format!("payload has {} bytes, shape {:?} needs {need}", body.len(), meta.shape)));
    }
    let payload = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect();
    Ok((meta, payload))
}

pub fn write_container(path: &Path, meta: &Metadata, payload: &[f64]) -> Result<()> {
    let bytes = encode(meta, payload)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<(Metadata, Vec<f64>)> {
    decode(&fs::read(path)?)
}

pub fn scalar_metadata(f: &ScalarField) -> Metadata {
    let n = f.grid.n_side;
    let mut meta = Metadata::new(FieldKind::Scalar, vec![n, n, n], false);
    meta.grid = Some(f.grid.clone());
    meta.support_radius = Some(f.support_radius);
    meta
}

pub fn save_scalar(f: &ScalarField, path: &Path, provenance: Option<Provenance>) -> Result<()> {
    let mut meta = scalar_metadata(f);
    meta.provenance = provenance;
    write_container(path, &meta, &f.values)
}

pub fn scalar_from(meta: &Metadata, payload: Vec<f64>) -> Result<ScalarField> {
    if meta.kind != FieldKind::Scalar || meta.complex {
        return Err(Error::ShapeMismatch(format!("expected a real scalar field, found {:?}", meta.kind)));
    }
    let grid = meta.grid.clone().ok_or_else(|| Error::ShapeMismatch("scalar field without grid".into()))?;
    let n = grid.n_side;
    if meta.shape != [n, n, n] {
        return Err(Error::ShapeMismatch(format!("shape {:?} does not match grid n_side {n}", meta.shape)));
    }
    Ok(ScalarField { grid: grid.clone(), values: payload, support_radius: meta.support_radius.unwrap_or(grid.rho) })
}

pub fn load_scalar(path: &Path) -> Result<ScalarField> {
    let (meta, payload) = read_container(path)?;
    scalar_from(&meta, payload)
}

pub fn cylinder_metadata(g: &CylinderField) -> Metadata {
    let mut meta = Metadata::new(FieldKind::Cylinder, vec![g.n_nodes(), g.n_s()], true);
    meta.s_grid = Some(g.s_grid.clone());
    meta.sphere_degree = Some(g.sphere.degree);
    meta.s_support = Some(g.s_support);
    meta.parity = g.parity;
    meta
}

pub fn cylinder_payload(g: &CylinderField) -> Vec<f64> {
    g.values.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Saves with caller-completed metadata (pulse, `S`, provenance).
pub fn save_cylinder(g: &CylinderField, path: &Path, meta: Option<Metadata>) -> Result<()> {
    let meta = meta.unwrap_or_else(|| cylinder_metadata(g));
    write_container(path, &meta, &cylinder_payload(g))
}

/// Rebuilds the field on the stored sphere rule, or on `sphere` when given.
pub fn cylinder_from(meta: &Metadata, payload: Vec<f64>, sphere: Option<&Arc<SphereQuadrature>>) -> Result<CylinderField> {
    if meta.kind != FieldKind::Cylinder || !meta.complex {
        return Err(Error::ShapeMismatch(format!("expected complex cylinder data, found {:?}", meta.kind)));
    }
    let s_grid = meta.s_grid.clone().ok_or_else(|| Error::ShapeMismatch("cylinder data without s-grid".into()))?;
    let sphere = match sphere {
        Some(s) => s.clone(),
        None => {
            let degree = meta.sphere_degree.ok_or_else(|| Error::ShapeMismatch("cylinder data without sphere rule".into()))?;
            sphere_quadrature(degree)?.shared()
        }
    };
    if meta.shape != [sphere.len(), s_grid.n_s] {
        return Err(Error::ShapeMismatch(format!(
            "shape {:?} does not match {} nodes x {} samples",
            meta.shape,
            sphere.len(),
            s_grid.n_s
        )));
    }
    let mut g = CylinderField::zeros(&s_grid, &sphere);
    g.values = payload.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    if let Some(sup) = meta.s_support {
        g.s_support = sup;
    }
    g.parity = meta.parity;
    Ok(g)
}

pub fn load_cylinder(path: &Path) -> Result<(CylinderField, Metadata)> {
    let (meta, payload) = read_container(path)?;
    let g = cylinder_from(&meta, payload, None)?;
    Ok((g, meta))
}
