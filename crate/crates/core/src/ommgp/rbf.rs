//! Geometric morphings from boundary correspondences, interpolated into the
//! interior with thin-plate splines.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{MorphingState, NodalField, Point, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphMethod {
    Rbf,
    Identity,
}

/// Morphing of the reference mesh onto a new geometry.
#[derive(Debug, Clone)]
pub struct GeometricMorphing {
    pub reference: Arc<TriangleMesh>,
    /// Target boundary positions, one per reference boundary node.
    pub target_boundary: Vec<Point>,
    pub displacement: NodalField,
    pub method: MorphMethod,
}

impl GeometricMorphing {
    pub fn identity(reference: Arc<TriangleMesh>) -> Self {
        let target_boundary = boundary_positions(&reference, reference.nodes());
        let displacement = NodalField::zeros(reference.n_nodes(), 2);
        Self {
            reference,
            target_boundary,
            displacement,
            method: MorphMethod::Identity,
        }
    }

    /// Morphing onto `target`, a mesh with the reference connectivity. Only
    /// its boundary nodes are used; the interior comes from the splines.
    pub fn to_mesh(reference: Arc<TriangleMesh>, target: &TriangleMesh) -> Result<Self> {
        if target.n_nodes() != reference.n_nodes() || target.triangles() != reference.triangles() {
            return Err(Error::MeshMismatch(
                "target geometry must share the reference connectivity".into(),
            ));
        }
        let boundary = boundary_positions(&reference, target.nodes());
        rbf_geometric_morphing(reference, &boundary)
    }

    /// Deformed position of every reference node.
    pub fn positions(&self) -> Vec<Point> {
        self.reference
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let d = self.displacement.vector(k);
                [p[0] + d[0], p[1] + d[1]]
            })
            .collect()
    }

    /// Largest distance from a morphed boundary node to its target.
    pub fn boundary_error(&self) -> f64 {
        let pos = self.positions();
        self.reference
            .boundary_nodes()
            .iter()
            .zip(&self.target_boundary)
            .map(|(&k, t)| (pos[k][0] - t[0]).hypot(pos[k][1] - t[1]))
            .fold(0.0, f64::max)
    }

    pub fn is_bijective(&self) -> bool {
        MorphingState {
            reference: self.reference.clone(),
            displacement: self.displacement.clone(),
            target: self.reference.clone(),
        }
        .is_bijective()
    }
}

fn boundary_positions(reference: &TriangleMesh, nodes: &[Point]) -> Vec<Point> {
    reference
        .boundary_nodes()
        .iter()
        .map(|&k| nodes[k])
        .collect()
}

fn tps(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

/// Thin-plate-spline interpolant of the displacements `targets - sources`
/// with an affine part, so affine boundary motions are reproduced exactly.
pub struct ThinPlateSpline {
    centers: Vec<Point>,
    weights: DMatrix<f64>,
    /// Centroid and scale used to condition the system.
    shift: Point,
    scale: f64,
}

impl ThinPlateSpline {
    pub fn fit(sources: &[Point], targets: &[Point]) -> Result<Self> {
        if sources.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: sources.len(),
                got: targets.len(),
            });
        }
        let m = sources.len();
        if m < 3 {
            return Err(Error::InvalidParameter(
                "thin-plate splines need at least three centers".into(),
            ));
        }
        let mut shift = [0.0; 2];
        for p in sources {
            shift[0] += p[0] / m as f64;
            shift[1] += p[1] / m as f64;
        }
        let scale = sources
            .iter()
            .map(|p| (p[0] - shift[0]).hypot(p[1] - shift[1]))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let centers: Vec<Point> = sources
            .iter()
            .map(|p| [(p[0] - shift[0]) / scale, (p[1] - shift[1]) / scale])
            .collect();
        let mut a = DMatrix::zeros(m + 3, m + 3);
        for i in 0..m {
            for j in 0..m {
                let dx = centers[i][0] - centers[j][0];
                let dy = centers[i][1] - centers[j][1];
                a[(i, j)] = tps(dx * dx + dy * dy);
            }
            let poly = [1.0, centers[i][0], centers[i][1]];
            for (k, v) in poly.iter().enumerate() {
                a[(i, m + k)] = *v;
                a[(m + k, i)] = *v;
            }
        }
        let mut rhs = DMatrix::zeros(m + 3, 2);
        for i in 0..m {
            rhs[(i, 0)] = targets[i][0] - sources[i][0];
            rhs[(i, 1)] = targets[i][1] - sources[i][1];
        }
        let weights = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("thin-plate spline system is singular".into()))?;
        Ok(Self {
            centers,
            weights,
            shift,
            scale,
        })
    }

    pub fn eval(&self, p: Point) -> [f64; 2] {
        let q = [
            (p[0] - self.shift[0]) / self.scale,
            (p[1] - self.shift[1]) / self.scale,
        ];
        let m = self.centers.len();
        let mut basis = DVector::zeros(m + 3);
        for (i, c) in self.centers.iter().enumerate() {
            basis[i] = tps((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2));
        }
        basis[m] = 1.0;
        basis[m + 1] = q[0];
        basis[m + 2] = q[1];
        let d = self.weights.tr_mul(&basis);
        [d[0], d[1]]
    }
}

/// Morphs `reference` so that its boundary nodes (in the order of
/// [`TriangleMesh::boundary_nodes`]) land on `target_boundary`.
pub fn rbf_geometric_morphing(
    reference: Arc<TriangleMesh>,
    target_boundary: &[Point],
) -> Result<GeometricMorphing> {
    let bnodes = reference.boundary_nodes();
    if target_boundary.len() != bnodes.len() {
        return Err(Error::DimensionMismatch {
            expected: bnodes.len(),
            got: target_boundary.len(),
        });
    }
    let sources: Vec<Point> = bnodes.iter().map(|&k| reference.nodes()[k]).collect();
    if sources == target_boundary {
        return Ok(GeometricMorphing::identity(reference));
    }
    let spline = ThinPlateSpline::fit(&sources, target_boundary)?;
    let mut displacement = NodalField::from_fn_vector(reference.nodes(), |p| spline.eval(p));
    // Interpolation is exact up to the solve; pin the boundary anyway.
    for (&k, (s, t)) in bnodes.iter().zip(sources.iter().zip(target_boundary)) {
        displacement.set_vector(k, [t[0] - s[0], t[1] - s[1]]);
    }
    let morphing = GeometricMorphing {
        reference,
        target_boundary: target_boundary.to_vec(),
        displacement,
        method: MorphMethod::Rbf,
    };
    if !morphing.is_bijective() {
        let count = MorphingState {
            reference: morphing.reference.clone(),
            displacement: morphing.displacement.clone(),
            target: morphing.reference.clone(),
        }
        .detect_inverted()
        .len();
        return Err(Error::Inverted { count });
    }
    Ok(morphing)
}
