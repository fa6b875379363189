//! Point location by walking, seeded from a uniform bucket grid.

use super::{triangle_area, NodalField, Point, TriangleMesh};
use crate::error::{Error, Result};

/// Barycentric tolerance for accepting a point as inside a triangle.
const INSIDE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
    /// The query was outside the mesh and was moved to the nearest boundary point.
    pub clamped: bool,
}

/// Locates points in a fixed mesh. Immutable after construction, so one
/// locator can be shared across threads; walk hints are passed per query.
#[derive(Debug, Clone)]
pub struct PointLocator<'a> {
    mesh: &'a TriangleMesh,
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

pub fn barycentric(v: [Point; 3], p: Point) -> [f64; 3] {
    let area = triangle_area(v[0], v[1], v[2]);
    [
        triangle_area(p, v[1], v[2]) / area,
        triangle_area(v[0], p, v[2]) / area,
        triangle_area(v[0], v[1], p) / area,
    ]
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let width = (hi[0] - lo[0]).max(f64::MIN_POSITIVE);
        let height = (hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        // About two triangles per cell.
        let target_cells = (mesh.n_triangles() as f64 / 2.0).max(1.0);
        let cell = ((width * height) / target_cells).sqrt().max(1e-300);
        let dims = [
            ((width / cell).ceil() as usize).clamp(1, 4096),
            ((height / cell).ceil() as usize).clamp(1, 4096),
        ];
        let cell = (width / dims[0] as f64).max(height / dims[1] as f64);
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for t in 0..mesh.n_triangles() {
            let v = mesh.vertices(t);
            let (mut tlo, mut thi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in v {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(p[d]);
                    thi[d] = thi[d].max(p[d]);
                }
            }
            let c0 = Self::cell_of(lo, cell, dims, tlo);
            let c1 = Self::cell_of(lo, cell, dims, thi);
            for j in c0[1]..=c1[1] {
                for i in c0[0]..=c1[0] {
                    buckets[j * dims[0] + i].push(t);
                }
            }
        }
        Self {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    fn cell_of(origin: Point, cell: f64, dims: [usize; 2], p: Point) -> [usize; 2] {
        let mut c = [0; 2];
        for d in 0..2 {
            let k = ((p[d] - origin[d]) / cell).floor();
            c[d] = if k.is_nan() || k < 0.0 {
                0
            } else {
                (k as usize).min(dims[d] - 1)
            };
        }
        c
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.mesh
    }

    fn bucket(&self, p: Point) -> &[usize] {
        let c = Self::cell_of(self.origin, self.cell, self.dims, p);
        &self.buckets[c[1] * self.dims[0] + c[0]]
    }

    fn seed(&self, p: Point) -> usize {
        let c = Self::cell_of(self.origin, self.cell, self.dims, p);
        // Nearest nonempty bucket in a growing ring.
        for r in 0..self.dims[0].max(self.dims[1]) {
            let (i0, i1) = (c[0].saturating_sub(r), (c[0] + r).min(self.dims[0] - 1));
            let (j0, j1) = (c[1].saturating_sub(r), (c[1] + r).min(self.dims[1] - 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    if let Some(&t) = self.buckets[j * self.dims[0] + i].first() {
                        return t;
                    }
                }
            }
        }
        0
    }

    /// Locates `p`, starting the walk from `hint` when given. Points outside
    /// the mesh are clamped to the nearest boundary point.
    pub fn locate(&self, p: Point, hint: Option<usize>) -> Location {
        let start = match hint {
            Some(t) if t < self.mesh.n_triangles() => t,
            _ => self.seed(p),
        };
        if let Some(loc) = self.walk(p, start) {
            return loc;
        }
        if let Some(loc) = self.scan(p, self.bucket(p)) {
            return loc;
        }
        self.clamp(p)
    }

    fn walk(&self, p: Point, start: usize) -> Option<Location> {
        let max_steps = 8 * (self.mesh.n_triangles() as f64).sqrt() as usize + 64;
        let mut t = start;
        for _ in 0..max_steps {
            let bary = barycentric(self.mesh.vertices(t), p);
            let (k, min) = bary
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (k, &b)| if b < acc.1 { (k, b) } else { acc },
                );
            if min >= -INSIDE_TOL {
                return Some(Location {
                    triangle: t,
                    bary,
                    clamped: false,
                });
            }
            t = self.mesh.neighbors()[t][k]?;
        }
        None
    }

    fn scan(&self, p: Point, candidates: &[usize]) -> Option<Location> {
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for &t in candidates {
            let bary = barycentric(self.mesh.vertices(t), p);
            let min = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if min >= -INSIDE_TOL && best.is_none_or(|b| min > b.0) {
                best = Some((min, t, bary));
            }
        }
        best.map(|(_, triangle, bary)| Location {
            triangle,
            bary,
            clamped: false,
        })
    }

    fn clamp(&self, p: Point) -> Location {
        let (_, edge, s) = self.mesh.project_to_boundary(p);
        let triangle = self.mesh.boundary_edge_owner(edge);
        let tri = self.mesh.triangles()[triangle];
        let be = self.mesh.boundary_edges()[edge];
        let mut bary = [0.0; 3];
        for (k, &v) in tri.iter().enumerate() {
            if v == be.nodes[0] {
                bary[k] = 1.0 - s;
            } else if v == be.nodes[1] {
                bary[k] = s;
            }
        }
        Location {
            triangle,
            bary,
            clamped: true,
        }
    }

    /// Exhaustive containment test over all triangles; the oracle for `locate`.
    pub fn locate_brute_force(&self, p: Point) -> Option<Location> {
        let all: Vec<usize> = (0..self.mesh.n_triangles()).collect();
        self.scan(p, &all)
    }

    pub fn eval(&self, field: &NodalField, loc: &Location, out: &mut [f64]) {
        let tri = self.mesh.triangles()[loc.triangle];
        let c = field.components();
        let vals = field.values();
        for (d, o) in out.iter_mut().enumerate().take(c) {
            *o = (0..3).map(|k| loc.bary[k] * vals[tri[k] * c + d]).sum();
        }
    }

    pub fn interpolate(&self, field: &NodalField, p: Point) -> Result<Vec<f64>> {
        self.mesh.check_field(field, field.components())?;
        let loc = self.locate(p, None);
        let mut out = vec![0.0; field.components()];
        self.eval(field, &loc, &mut out);
        Ok(out)
    }
}

/// P1 interpolation of `field` at `point`, clamping outside points to the boundary.
pub fn interpolate_at(mesh: &TriangleMesh, field: &NodalField, point: Point) -> Result<Vec<f64>> {
    if mesh.n_triangles() == 0 {
        return Err(Error::EmptyMesh);
    }
    PointLocator::new(mesh).interpolate(field, point)
}
