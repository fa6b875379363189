//! Structured triangulations of rectangles.

use super::{Point, TriangleMesh};
use crate::error::{Error, Result};

/// `nx` by `ny` cells on `[lo, hi]`, each split along its rising diagonal.
/// Nodes are numbered row by row, which keeps the stiffness profile narrow.
pub fn rectangle(lo: Point, hi: Point, nx: usize, ny: usize) -> Result<TriangleMesh> {
    if nx == 0 || ny == 0 || !(hi[0] > lo[0]) || !(hi[1] > lo[1]) {
        return Err(Error::InvalidParameter(format!(
            "bad rectangle {lo:?}..{hi:?} with {nx}x{ny} cells"
        )));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64;
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(nodes, triangles)
}

/// The toy-example domain (-1, 1) x (-1.25, 1.25).
pub fn toy_domain(nx: usize, ny: usize) -> Result<TriangleMesh> {
    rectangle([-1.0, -1.25], [1.0, 1.25], nx, ny)
}
