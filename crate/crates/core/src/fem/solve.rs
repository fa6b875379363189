//! Symmetric positive definite solves: a profile (skyline) Cholesky
//! factorization under reverse Cuthill-McKee ordering, and Jacobi-
//! preconditioned conjugate gradients.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::sparse::{dot, norm, SparseOperator};
use crate::error::{Error, Result};

pub const CG_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverBackend {
    /// Profile Cholesky; robust for the large boundary penalty.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

/// Cholesky factor `P A P^T = L L^T` stored by rows inside the envelope.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    dim: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    data: Vec<f64>,
}

/// Reverse Cuthill-McKee ordering of the adjacency graph of `a`.
pub fn rcm_ordering(a: &SparseOperator) -> Vec<usize> {
    let n = a.dim();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| a.row(r).map(|(c, _)| c).filter(|&c| c != r).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_last = |start: usize, visited: &[bool]| -> (usize, usize) {
        // Farthest node from `start` (pseudo-peripheral search) and its depth.
        let mut seen = visited.to_vec();
        let mut q = VecDeque::from([(start, 0usize)]);
        seen[start] = true;
        let mut last = (start, 0);
        while let Some((v, d)) = q.pop_front() {
            if d > last.1 || (d == last.1 && degree[v] < degree[last.0]) {
                last = (v, d);
            }
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    q.push_back((w, d + 1));
                }
            }
        }
        last
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| degree[v])
            .unwrap();
        let (mut start, mut depth) = bfs_last(seed, &visited);
        for _ in 0..4 {
            let (next, d) = bfs_last(start, &visited);
            if d <= depth {
                break;
            }
            start = next;
            depth = d;
        }
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

impl SkylineCholesky {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        let n = a.dim();
        let perm = rcm_ordering(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old_r in 0..n {
            let r = inv[old_r];
            for (old_c, _) in a.row(old_r) {
                let c = inv[old_c];
                if c < r {
                    first[r] = first[r].min(c);
                }
            }
        }
        let mut row_start = vec![0usize; n + 1];
        for r in 0..n {
            row_start[r + 1] = row_start[r] + (r - first[r] + 1);
        }
        let mut data = vec![0.0; row_start[n]];
        for old_r in 0..n {
            let r = inv[old_r];
            for (old_c, v) in a.row(old_r) {
                let c = inv[old_c];
                if c <= r {
                    data[row_start[r] + c - first[r]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let si = row_start[i];
            for j in fi..=i {
                let fj = first[j];
                let sj = row_start[j];
                let k0 = fi.max(fj);
                let mut s = data[si + j - fi];
                let li = &data[si + k0 - fi..si + j - fi];
                let lj = &data[sj + k0 - fj..sj + j - fj];
                s -= dot(li, lj);
                if j < i {
                    data[si + j - fi] = s / data[sj + j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite {
                            pivot: perm[i],
                            value: s,
                        });
                    }
                    data[si + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            dim: n,
            perm,
            first,
            row_start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored factor entries.
    pub fn envelope(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let si = self.row_start[i];
            let s = dot(&self.data[si..si + i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / self.data[si + i - fi];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.row_start[i];
            y[i] /= self.data[si + i - fi];
            let yi = y[i];
            for (k, l) in self.data[si..si + i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned CG to `tol` relative residual, at most `10 * dim` iterations.
pub fn pcg(a: &SparseOperator, b: &[f64], tol: f64) -> Result<(Vec<f64>, CgReport)> {
    let n = a.dim();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 10 * n.max(1);
    for it in 1..=max_iter {
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite {
                pivot: it,
                value: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((
                x,
                CgReport {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDiverged {
        iterations: max_iter,
        residual: norm(&r) / bnorm,
    })
}

/// A factorized (or CG-backed) SPD operator reused across right-hand sides.
#[derive(Debug, Clone)]
pub enum LinearSolver {
    Cholesky(SkylineCholesky),
    Cg(SparseOperator),
}

impl LinearSolver {
    pub fn new(a: &SparseOperator, backend: SolverBackend) -> Result<Self> {
        Ok(match backend {
            SolverBackend::Cholesky => Self::Cholesky(SkylineCholesky::factor(a)?),
            SolverBackend::Cg => Self::Cg(a.clone()),
        })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Cholesky(f) => Ok(f.solve(b)),
            Self::Cg(a) => pcg(a, b, CG_TOLERANCE).map(|(x, _)| x),
        }
    }
}
