//! Penalty energies keeping morphings close to the identity, and their
//! gradients with respect to nodal displacements.

use crate::error::{Error, Result};
use crate::fem::{dot, SparseOperator};
use crate::mesh::{shape_gradients, MorphingState, NodalField, TriangleMesh};

use super::config::NeoHookeanParams;

/// `E_lin = 1/2 a(d, d)` for the displacement `d = phi - Id`.
pub fn energy_linear(form: &SparseOperator, displacement: &NodalField) -> f64 {
    0.5 * form.form(displacement.values(), displacement.values())
}

/// Nodal gradient of `E_lin`: `DE_lin[phi][psi] = a(d, psi) = (A d) . psi`.
pub fn energy_linear_gradient(form: &SparseOperator, displacement: &NodalField) -> Vec<f64> {
    form.apply(displacement.values())
}

pub fn energy_linear_differential(
    form: &SparseOperator,
    displacement: &NodalField,
    direction: &NodalField,
) -> f64 {
    form.form(displacement.values(), direction.values())
}

/// Deformation gradient `F = grad phi` on one triangle, from reference
/// shape gradients and deformed vertex positions.
fn deformation_gradient(g: &[[f64; 2]; 3], y: &[[f64; 2]; 3]) -> [[f64; 2]; 2] {
    let mut f = [[0.0; 2]; 2];
    for a in 0..3 {
        for i in 0..2 {
            for j in 0..2 {
                f[i][j] += y[a][i] * g[a][j];
            }
        }
    }
    f
}

fn element_data(
    mesh: &TriangleMesh,
    displacement: &NodalField,
    t: usize,
) -> ([[f64; 2]; 3], f64, [[f64; 2]; 3]) {
    let v = mesh.vertices(t);
    let (g, area) = shape_gradients(v);
    let tri = mesh.triangles()[t];
    let mut y = v;
    for (k, &node) in tri.iter().enumerate() {
        let d = displacement.vector(node);
        y[k][0] += d[0];
        y[k][1] += d[1];
    }
    (g, area, y)
}

/// Energy density `mu/2 (tr F^T F - d) + lambda (J^2 - 1) - |lambda/2 + mu| ln J`,
/// or `None` when `J <= 0`.
pub fn neohookean_density(f: [[f64; 2]; 2], p: &NeoHookeanParams) -> Option<f64> {
    let j = f[0][0] * f[1][1] - f[0][1] * f[1][0];
    if !(j > 0.0) {
        return None;
    }
    let tr = f[0][0] * f[0][0] + f[0][1] * f[0][1] + f[1][0] * f[1][0] + f[1][1] * f[1][1];
    Some(
        0.5 * p.mu * (tr - p.trace_offset) + p.lambda * (j * j - 1.0)
            - (0.5 * p.lambda + p.mu).abs() * j.ln(),
    )
}

/// First Piola stress `dW/dF = mu F + (2 lambda J - |lambda/2 + mu| / J) cof F`.
fn neohookean_stress(f: [[f64; 2]; 2], p: &NeoHookeanParams) -> [[f64; 2]; 2] {
    let j = f[0][0] * f[1][1] - f[0][1] * f[1][0];
    let cof = [[f[1][1], -f[1][0]], [-f[0][1], f[0][0]]];
    let s = 2.0 * p.lambda * j - (0.5 * p.lambda + p.mu).abs() / j;
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            out[i][k] = p.mu * f[i][k] + s * cof[i][k];
        }
    }
    out
}

/// Neo-Hookean energy of `phi = Id + displacement` with piecewise-constant
/// `F`. Returns `+inf` if any element has `det F <= 0`.
pub fn energy_neohookean(
    mesh: &TriangleMesh,
    displacement: &NodalField,
    params: &NeoHookeanParams,
) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let (g, area, y) = element_data(mesh, displacement, t);
        match neohookean_density(deformation_gradient(&g, &y), params) {
            Some(w) => total += area * w,
            None => return f64::INFINITY,
        }
    }
    total
}

/// Nodal gradient of [`energy_neohookean`]. Fails on inverted elements.
pub fn energy_neohookean_gradient(
    mesh: &TriangleMesh,
    displacement: &NodalField,
    params: &NeoHookeanParams,
) -> Result<Vec<f64>> {
    mesh.check_field(displacement, 2)?;
    let mut grad = vec![0.0; 2 * mesh.n_nodes()];
    let mut inverted = 0;
    for t in 0..mesh.n_triangles() {
        let (g, area, y) = element_data(mesh, displacement, t);
        let f = deformation_gradient(&g, &y);
        if !(f[0][0] * f[1][1] - f[0][1] * f[1][0] > 0.0) {
            inverted += 1;
            continue;
        }
        let p = neohookean_stress(f, params);
        for (a, &node) in mesh.triangles()[t].iter().enumerate() {
            for i in 0..2 {
                grad[2 * node + i] += area * (p[i][0] * g[a][0] + p[i][1] * g[a][1]);
            }
        }
    }
    if inverted > 0 {
        return Err(Error::Inverted { count: inverted });
    }
    Ok(grad)
}

pub fn energy_neohookean_differential(
    mesh: &TriangleMesh,
    displacement: &NodalField,
    direction: &NodalField,
    params: &NeoHookeanParams,
) -> Result<f64> {
    Ok(dot(
        &energy_neohookean_gradient(mesh, displacement, params)?,
        direction.values(),
    ))
}

/// [`energy_neohookean`] of a morphing state.
pub fn state_energy_neohookean(state: &MorphingState, params: &NeoHookeanParams) -> f64 {
    energy_neohookean(&state.reference, &state.displacement, params)
}
