//! P1 finite elements: the elasticity inner product used to precondition
//! the ascent, mass matrices, linear solves and the reaction-diffusion
//! smoother.

mod assembly;
mod solve;
mod sparse;

pub use assembly::{
    assemble_elasticity, assemble_elasticity_fixed, assemble_laplacian, assemble_mass,
    elastic_trace, l2_inner_product, BoundaryFrame, ElasticParams,
};
pub use solve::{pcg, rcm_ordering, CgReport, LinearSolver, SkylineCholesky, SolverBackend};
pub use sparse::{dot, norm, SparseOperator};

use crate::error::{Error, Result};
use crate::mesh::{NodalField, TriangleMesh};

/// Relative weight of the mass term added to the elasticity form before
/// solving, so that tangential rigid motions cannot make it singular.
pub const MASS_REGULARIZATION: f64 = 1e-10;

/// Solves `a(u, v) = <rhs, v>` for many right-hand sides with one factorization.
#[derive(Debug, Clone)]
pub struct RieszSolver {
    form: SparseOperator,
    solver: LinearSolver,
}

impl RieszSolver {
    /// Factorizes `a + eps M`, with `eps = 1e-10 * tr(K_elastic) / tr(M)`.
    pub fn new(
        mesh: &TriangleMesh,
        params: &ElasticParams,
        form: SparseOperator,
        backend: SolverBackend,
    ) -> Result<Self> {
        let mass = assemble_mass(mesh, 2);
        let eps = MASS_REGULARIZATION * elastic_trace(mesh, params) / mass.trace();
        let regularized = form.add_scaled(eps, &mass)?;
        Ok(Self {
            solver: LinearSolver::new(&regularized, backend)?,
            form,
        })
    }

    pub fn form(&self) -> &SparseOperator {
        &self.form
    }

    /// Riesz representative of the load vector `rhs` (already integrated
    /// against the test functions).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.form.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.form.dim(),
                got: rhs.len(),
            });
        }
        if rhs.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; rhs.len()]);
        }
        let u = self.solver.solve(rhs)?;
        let r = self.form.apply(&u);
        let res: f64 = norm(&r.iter().zip(rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
        let rel = res / norm(rhs);
        // The regularization shifts the residual by eps*M*u; anything far
        // beyond that signals a failed solve.
        if !rel.is_finite() || rel > 1e-6 {
            return Err(Error::SolverDiverged {
                iterations: 0,
                residual: rel,
            });
        }
        Ok(u)
    }
}

/// One-shot Riesz solve of `A u = rhs` with the default backend.
pub fn riesz_solve(
    mesh: &TriangleMesh,
    params: &ElasticParams,
    a: &SparseOperator,
    rhs: &NodalField,
) -> Result<NodalField> {
    mesh.check_field(rhs, 2)?;
    let solver = RieszSolver::new(mesh, params, a.clone(), SolverBackend::default())?;
    NodalField::new(2, solver.solve(rhs.values())?)
}

/// Reaction-diffusion smoother `(K + c2 M) u_hat = c2 M u` with natural
/// boundary conditions. Reusable across fields for a fixed `c2`.
#[derive(Debug, Clone)]
pub struct Smoother {
    c2: f64,
    mass: SparseOperator,
    solver: SkylineCholesky,
}

impl Smoother {
    pub fn new(mesh: &TriangleMesh, c2: f64) -> Result<Self> {
        if !(c2 > 0.0) || !c2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "smoothing parameter c2 must be positive, got {c2}"
            )));
        }
        let mass = assemble_mass(mesh, 1);
        let op = assemble_laplacian(mesh).add_scaled(c2, &mass)?;
        Ok(Self {
            c2,
            solver: SkylineCholesky::factor(&op)?,
            mass,
        })
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn apply(&self, u: &NodalField) -> Result<NodalField> {
        if u.components() != 1 || u.n_nodes() != self.mass.dim() {
            return Err(Error::MeshMismatch(
                "smoothing expects a scalar field on the smoother's mesh".into(),
            ));
        }
        let rhs: Vec<f64> = self
            .mass
            .apply(u.values())
            .iter()
            .map(|v| self.c2 * v)
            .collect();
        NodalField::scalar(self.solver.solve(&rhs))
    }
}

pub fn smooth_field(mesh: &TriangleMesh, u_ref: &NodalField, c2: f64) -> Result<NodalField> {
    mesh.check_field(u_ref, 1)?;
    Smoother::new(mesh, c2)?.apply(u_ref)
}
