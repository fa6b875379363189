//! Tilted Gaussian ridges `u(x, y) = exp(-(beta (x + 1) - y)^2 / 0.05)` on
//! `(-1, 1) x (-1.25, 1.25)`, one field per slope `beta`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::io::{read_field, read_mesh, write_field, write_mesh};
use crate::mesh::{structured, NodalField, TriangleMesh};
use crate::optim::Snapshot;

pub const DEFAULT_BETA_RANGE: (f64, f64) = (-0.38, 0.38);
pub const DEFAULT_RESOLUTION: (usize, usize) = (48, 60);
pub const RIDGE_WIDTH: f64 = 0.05;
const MANIFEST: &str = "manifest.json";
const MESH_FILE: &str = "mesh.morphmesh";

/// `n` slopes on a uniform grid including both endpoints.
pub fn beta_grid(n: usize, range: (f64, f64)) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if n == 1 {
        return Ok(vec![0.5 * (range.0 + range.1)]);
    }
    let h = (range.1 - range.0) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                range.1
            } else {
                range.0 + h * i as f64
            }
        })
        .collect())
}

pub fn ridge(beta: f64, p: [f64; 2]) -> f64 {
    let s = beta * (p[0] + 1.0) - p[1];
    (-s * s / RIDGE_WIDTH).exp()
}

pub fn ridge_field(mesh: &TriangleMesh, beta: f64) -> NodalField {
    NodalField::from_fn_scalar(mesh.nodes(), |p| ridge(beta, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyManifest {
    pub n: usize,
    pub beta_range: (f64, f64),
    pub resolution: (usize, usize),
    pub betas: Vec<f64>,
    pub mesh: String,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub mesh: Arc<TriangleMesh>,
    pub betas: Vec<f64>,
    pub fields: Vec<NodalField>,
    pub resolution: (usize, usize),
    pub beta_range: (f64, f64),
}

impl ToyDataset {
    pub fn generate(n: usize, beta_range: (f64, f64), resolution: (usize, usize)) -> Result<Self> {
        let mesh = Arc::new(structured::toy_domain(resolution.0, resolution.1)?);
        let betas = beta_grid(n, beta_range)?;
        let fields = betas.iter().map(|&b| ridge_field(&mesh, b)).collect();
        Ok(Self {
            mesh,
            betas,
            fields,
            resolution,
            beta_range,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Every field on the shared mesh, ready for the optimizer.
    pub fn snapshots(&self) -> Vec<Snapshot> {
        self.fields
            .iter()
            .map(|f| Snapshot {
                mesh: self.mesh.clone(),
                field: f.clone(),
            })
            .collect()
    }

    pub fn manifest(&self) -> ToyManifest {
        ToyManifest {
            n: self.len(),
            beta_range: self.beta_range,
            resolution: self.resolution,
            betas: self.betas.clone(),
            mesh: MESH_FILE.into(),
            fields: (0..self.len()).map(|i| format!("u_{i:04}.field")).collect(),
        }
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let manifest = self.manifest();
        write_mesh(dir.join(&manifest.mesh), &self.mesh)?;
        for (i, (f, name)) in self.fields.iter().zip(&manifest.fields).enumerate() {
            write_field(dir.join(name), &format!("u_{i}"), f)?;
        }
        fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: ToyManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
        let (mesh, _) = read_mesh(dir.join(&manifest.mesh))?;
        let fields = manifest
            .fields
            .iter()
            .map(|name| read_field(dir.join(name)).map(|(_, f)| f))
            .collect::<Result<Vec<_>>>()?;
        if fields.len() != manifest.betas.len() {
            return Err(Error::DimensionMismatch {
                expected: manifest.betas.len(),
                got: fields.len(),
            });
        }
        Ok(Self {
            mesh: Arc::new(mesh),
            betas: manifest.betas,
            fields,
            resolution: manifest.resolution,
            beta_range: manifest.beta_range,
        })
    }
}
