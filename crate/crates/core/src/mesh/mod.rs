//! Planar triangle meshes, nodal fields and morphing states.
//!
//! Triangles are stored counterclockwise. Boundary edges are derived from
//! the connectivity (an edge is on the boundary iff exactly one triangle
//! uses it) and are oriented like their owning triangle, so the outward
//! normal of edge `(a, b)` is the clockwise rotation of `b - a`.

mod field;
pub mod io;
mod locate;
mod quadrature;
pub mod structured;

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use field::NodalField;
pub use io::LoadReport;
pub use locate::{barycentric, interpolate_at, Location, PointLocator};
pub use quadrature::QuadratureRule;

pub type Point = [f64; 2];

/// Tolerance on the angle between normals of edges sharing a facet.
const FACET_NORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub facet: usize,
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    normals: Vec<[f64; 2]>,
    /// Neighbor across the edge opposite local vertex k.
    neighbors: Vec<[Option<usize>; 3]>,
    /// Triangle owning each boundary edge.
    edge_owner: Vec<usize>,
}

pub fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl TriangleMesh {
    /// Builds a mesh from CCW triangles, deriving boundary edges and
    /// assigning facet ids by chaining boundary edges with equal normals.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut mesh = Self::assemble(nodes, triangles)?;
        mesh.assign_facets_by_chaining();
        Ok(mesh)
    }

    /// Builds a mesh with explicit boundary edges and facet ids. The given
    /// edge set must coincide with the derived one (orientation is ignored).
    pub fn with_boundary(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: &[BoundaryEdge],
    ) -> Result<Self> {
        let mut mesh = Self::assemble(nodes, triangles)?;
        if boundary.len() != mesh.boundary.len() {
            return Err(Error::InvalidMesh(format!(
                "{} boundary edges given, connectivity has {}",
                boundary.len(),
                mesh.boundary.len()
            )));
        }
        let lookup: HashMap<(usize, usize), usize> = mesh
            .boundary
            .iter()
            .enumerate()
            .map(|(e, be)| (sorted_pair(be.nodes[0], be.nodes[1]), e))
            .collect();
        for be in boundary {
            let key = sorted_pair(be.nodes[0], be.nodes[1]);
            match lookup.get(&key) {
                Some(&e) => mesh.boundary[e].facet = be.facet,
                None => {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is not a boundary edge",
                        be.nodes[0], be.nodes[1]
                    )))
                }
            }
        }
        Ok(mesh)
    }

    fn assemble(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nodes.len() {
                    return Err(Error::IndexOutOfRange {
                        index: v,
                        len: nodes.len(),
                    });
                }
            }
            let area = triangle_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive area {area:e}"
                )));
            }
        }

        // edge -> (triangle, local vertex opposite)
        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                edges.entry(sorted_pair(a, b)).or_default().push((t, k));
            }
        }
        let mut neighbors = vec![[None; 3]; triangles.len()];
        let mut boundary = Vec::new();
        let mut edge_owner = Vec::new();
        for uses in edges.values() {
            match uses.as_slice() {
                [(t, k)] => {
                    let tri = triangles[*t];
                    boundary.push(BoundaryEdge {
                        nodes: [tri[(k + 1) % 3], tri[(k + 2) % 3]],
                        facet: 0,
                    });
                    edge_owner.push(*t);
                }
                [(t0, k0), (t1, k1)] => {
                    neighbors[*t0][*k0] = Some(*t1);
                    neighbors[*t1][*k1] = Some(*t0);
                }
                _ => {
                    return Err(Error::InvalidMesh(
                        "edge shared by more than two triangles".into(),
                    ))
                }
            }
        }
        // HashMap iteration order is random; fix a canonical order.
        let mut order: Vec<usize> = (0..boundary.len()).collect();
        order.sort_by_key(|&e| sorted_pair(boundary[e].nodes[0], boundary[e].nodes[1]));
        let boundary: Vec<BoundaryEdge> = order.iter().map(|&e| boundary[e]).collect();
        let edge_owner: Vec<usize> = order.iter().map(|&e| edge_owner[e]).collect();

        let normals = boundary
            .iter()
            .map(|be| edge_normal(nodes[be.nodes[0]], nodes[be.nodes[1]]))
            .collect();
        Ok(Self {
            nodes,
            triangles,
            boundary,
            normals,
            neighbors,
            edge_owner,
        })
    }

    fn assign_facets_by_chaining(&mut self) {
        let nb = self.boundary.len();
        let mut next_edge: HashMap<usize, usize> = HashMap::new();
        for (e, be) in self.boundary.iter().enumerate() {
            next_edge.insert(be.nodes[0], e);
        }
        let mut prev_edge: HashMap<usize, usize> = HashMap::new();
        for (e, be) in self.boundary.iter().enumerate() {
            prev_edge.insert(be.nodes[1], e);
        }
        let mut facet_of = vec![usize::MAX; nb];
        let mut facet = 0;
        for start in 0..nb {
            if facet_of[start] != usize::MAX {
                continue;
            }
            // Walk back to the beginning of the straight run containing `start`.
            let mut first = start;
            let mut guard = 0;
            while let Some(&p) = prev_edge.get(&self.boundary[first].nodes[0]) {
                if p == start || !same_normal(self.normals[p], self.normals[first]) {
                    break;
                }
                first = p;
                guard += 1;
                if guard > nb {
                    break;
                }
            }
            let mut e = first;
            loop {
                if facet_of[e] != usize::MAX {
                    break;
                }
                facet_of[e] = facet;
                match next_edge.get(&self.boundary[e].nodes[1]) {
                    Some(&n) if same_normal(self.normals[n], self.normals[e]) => e = n,
                    _ => break,
                }
            }
            facet += 1;
        }
        for (be, f) in self.boundary.iter_mut().zip(facet_of) {
            be.facet = f;
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Outward unit normal of each boundary edge, in reference position.
    pub fn facet_normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    pub fn neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    pub fn boundary_edge_owner(&self, edge: usize) -> usize {
        self.edge_owner[edge]
    }

    pub fn vertices(&self, tri: usize) -> [Point; 3] {
        let t = self.triangles[tri];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn signed_area(&self, tri_index: usize) -> Result<f64> {
        if tri_index >= self.triangles.len() {
            return Err(Error::IndexOutOfRange {
                index: tri_index,
                len: self.triangles.len(),
            });
        }
        let [a, b, c] = self.vertices(tri_index);
        Ok(triangle_area(a, b, c))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.vertices(t);
                triangle_area(a, b, c)
            })
            .sum()
    }

    /// Sorted list of nodes lying on the boundary.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary.iter().flat_map(|be| be.nodes).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// True when every facet is straight: all its edges share one normal.
    pub fn is_polytopal(&self) -> bool {
        let mut first: HashMap<usize, [f64; 2]> = HashMap::new();
        for (be, n) in self.boundary.iter().zip(&self.normals) {
            let n0 = *first.entry(be.facet).or_insert(*n);
            if !same_normal(n0, *n) {
                return false;
            }
        }
        true
    }

    /// Copy of this mesh with every node moved by `displacement`.
    /// Fails if any displaced triangle is inverted.
    pub fn deformed(&self, displacement: &NodalField) -> Result<Self> {
        self.check_field(displacement, 2)?;
        let nodes: Vec<Point> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = displacement.vector(i);
                [p[0] + d[0], p[1] + d[1]]
            })
            .collect();
        let facets = self.boundary.clone();
        Self::with_boundary(nodes, self.triangles.clone(), &facets)
    }

    /// Same connectivity and boundary, new node positions. Inversion is
    /// allowed; the result is only suitable for geometric queries.
    pub fn with_positions(&self, nodes: Vec<Point>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                got: nodes.len(),
            });
        }
        let normals = self
            .boundary
            .iter()
            .map(|be| edge_normal(nodes[be.nodes[0]], nodes[be.nodes[1]]))
            .collect();
        Ok(Self {
            nodes,
            normals,
            ..self.clone()
        })
    }

    pub(crate) fn check_field(&self, field: &NodalField, components: usize) -> Result<()> {
        if field.n_nodes() != self.n_nodes() {
            return Err(Error::MeshMismatch(format!(
                "field has {} nodes, mesh has {}",
                field.n_nodes(),
                self.n_nodes()
            )));
        }
        if field.components() != components {
            return Err(Error::DimensionMismatch {
                expected: components,
                got: field.components(),
            });
        }
        Ok(())
    }

    /// Nearest point on the boundary polyline, with the edge index and the
    /// parameter along the edge.
    pub fn project_to_boundary(&self, p: Point) -> (Point, usize, f64) {
        let mut best = (f64::INFINITY, [0.0; 2], 0, 0.0);
        for (e, be) in self.boundary.iter().enumerate() {
            let a = self.nodes[be.nodes[0]];
            let b = self.nodes[be.nodes[1]];
            let (q, t) = project_segment(p, a, b);
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best.0 {
                best = (d, q, e, t);
            }
        }
        (best.1, best.2, best.3)
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let (q, _, _) = self.project_to_boundary(p);
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
    }
}

/// Gradients of the three P1 shape functions on a triangle, and its signed area.
pub fn shape_gradients(v: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let area = triangle_area(v[0], v[1], v[2]);
    let inv = 1.0 / (2.0 * area);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let a = v[(k + 1) % 3];
        let b = v[(k + 2) % 3];
        g[k] = [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv];
    }
    (g, area)
}

/// Piecewise-constant gradient of a scalar P1 field on one triangle.
pub fn scalar_gradient(mesh: &TriangleMesh, field: &NodalField, tri: usize) -> [f64; 2] {
    let (g, _) = shape_gradients(mesh.vertices(tri));
    let t = mesh.triangles()[tri];
    let vals = field.values();
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += g[k][0] * vals[t[k]];
        out[1] += g[k][1] * vals[t[k]];
    }
    out
}

pub(crate) fn project_segment(p: Point, a: Point, b: Point) -> (Point, f64) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ([a[0] + t * ab[0], a[1] + t * ab[1]], t)
}

pub fn edge_normal(a: Point, b: Point) -> [f64; 2] {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let len = (dx * dx + dy * dy).sqrt();
    [dy / len, -dx / len]
}

fn same_normal(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] * b[1] - a[1] * b[0]).abs() < FACET_NORMAL_TOL && a[0] * b[0] + a[1] * b[1] > 0.0
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Flips clockwise triangles in place and returns how many were flipped.
/// Degenerate triangles are an error.
pub fn repair_orientation(nodes: &[Point], triangles: &mut [[usize; 3]]) -> Result<usize> {
    let mut flipped = 0;
    for (t, tri) in triangles.iter_mut().enumerate() {
        if tri.iter().any(|&v| v >= nodes.len()) {
            return Err(Error::InvalidMesh(format!(
                "triangle {t} references a missing node"
            )));
        }
        let area = triangle_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
        if area < 0.0 {
            tri.swap(1, 2);
            flipped += 1;
        } else if area == 0.0 {
            return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
        }
    }
    Ok(flipped)
}

/// A morphing `phi = Id + displacement` of a reference mesh onto a target domain.
#[derive(Debug, Clone)]
pub struct MorphingState {
    pub reference: Arc<TriangleMesh>,
    pub displacement: NodalField,
    pub target: Arc<TriangleMesh>,
}

impl MorphingState {
    pub fn identity(reference: Arc<TriangleMesh>) -> Self {
        let displacement = NodalField::zeros(reference.n_nodes(), 2);
        Self {
            target: reference.clone(),
            reference,
            displacement,
        }
    }

    pub fn new(
        reference: Arc<TriangleMesh>,
        displacement: NodalField,
        target: Arc<TriangleMesh>,
    ) -> Result<Self> {
        reference.check_field(&displacement, 2)?;
        Ok(Self {
            reference,
            displacement,
            target,
        })
    }

    pub fn deformed_node(&self, i: usize) -> Point {
        let p = self.reference.nodes()[i];
        let d = self.displacement.vector(i);
        [p[0] + d[0], p[1] + d[1]]
    }

    pub fn deformed_nodes(&self) -> Vec<Point> {
        (0..self.reference.n_nodes())
            .map(|i| self.deformed_node(i))
            .collect()
    }

    pub fn deformed_area(&self, tri: usize) -> f64 {
        let t = self.reference.triangles()[tri];
        triangle_area(
            self.deformed_node(t[0]),
            self.deformed_node(t[1]),
            self.deformed_node(t[2]),
        )
    }

    pub fn min_deformed_area(&self) -> f64 {
        (0..self.reference.n_triangles())
            .map(|t| self.deformed_area(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Indices of deformed triangles with signed area <= 0.
    pub fn detect_inverted(&self) -> Vec<usize> {
        (0..self.reference.n_triangles())
            .filter(|&t| self.deformed_area(t) <= 0.0)
            .collect()
    }

    pub fn is_bijective(&self) -> bool {
        self.detect_inverted().is_empty()
    }

    /// Largest distance from a deformed boundary node to the target boundary.
    pub fn max_boundary_drift(&self) -> f64 {
        self.reference
            .boundary_nodes()
            .into_iter()
            .map(|i| self.target.distance_to_boundary(self.deformed_node(i)))
            .fold(0.0, f64::max)
    }

    /// Moves boundary nodes farther than `tol` from the target boundary onto
    /// their nearest target boundary point. Returns the number of nodes moved.
    pub fn project_boundary(&mut self, tol: f64) -> usize {
        let mut moved = 0;
        for i in self.reference.boundary_nodes() {
            let y = self.deformed_node(i);
            let (q, _, _) = self.target.project_to_boundary(y);
            let dist = ((q[0] - y[0]).powi(2) + (q[1] - y[1]).powi(2)).sqrt();
            if dist > tol {
                let x = self.reference.nodes()[i];
                self.displacement.set_vector(i, [q[0] - x[0], q[1] - x[1]]);
                moved += 1;
            }
        }
        moved
    }
}
