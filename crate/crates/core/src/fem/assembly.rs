//! P1 assembly of the elasticity inner product, mass and stiffness matrices.
//!
//! Vector unknowns are interleaved per node: dof `2 * node + component`,
//! matching the layout of [`NodalField`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sparse::SparseOperator;
use crate::error::{Error, Result};
use crate::mesh::{edge_normal, shape_gradients, NodalField, Point, QuadratureRule, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticParams {
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub penalty_alpha: f64,
}

impl Default for ElasticParams {
    fn default() -> Self {
        Self {
            young_modulus: 1.0,
            poisson_ratio: 0.3,
            penalty_alpha: 1e12,
        }
    }
}

impl ElasticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.young_modulus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Young modulus must be positive, got {}",
                self.young_modulus
            )));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "Poisson ratio must lie in (-1, 1/2), got {}",
                self.poisson_ratio
            )));
        }
        if !(self.penalty_alpha >= 0.0) || !self.penalty_alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "penalty weight must be finite and >= 0, got {}",
                self.penalty_alpha
            )));
        }
        Ok(())
    }

    /// `(2 mu, lambda)` of the plane-stress law
    /// `sigma = E/(1+nu) eps + E nu/((1+nu)(1-nu)) tr(eps) I`.
    fn lame(&self) -> (f64, f64) {
        let e = self.young_modulus;
        let nu = self.poisson_ratio;
        (e / (1.0 + nu), e * nu / ((1.0 + nu) * (1.0 - nu)))
    }
}

/// Outward normal and length of every boundary edge in some configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFrame {
    pub normals: Vec<[f64; 2]>,
    pub lengths: Vec<f64>,
}

impl BoundaryFrame {
    pub fn reference(mesh: &TriangleMesh) -> Self {
        Self::from_positions(mesh, mesh.nodes())
    }

    /// Boundary of the mesh with nodes moved to `positions`.
    pub fn from_positions(mesh: &TriangleMesh, positions: &[Point]) -> Self {
        let mut normals = Vec::with_capacity(mesh.boundary_edges().len());
        let mut lengths = Vec::with_capacity(mesh.boundary_edges().len());
        for be in mesh.boundary_edges() {
            let a = positions[be.nodes[0]];
            let b = positions[be.nodes[1]];
            normals.push(edge_normal(a, b));
            lengths.push((b[0] - a[0]).hypot(b[1] - a[1]));
        }
        Self { normals, lengths }
    }
}

fn elasticity_element(params: &ElasticParams, v: [Point; 3]) -> [[f64; 6]; 6] {
    let (g, area) = shape_gradients(v);
    let (two_mu, lambda) = params.lame();
    let mu = 0.5 * two_mu;
    // D in Voigt notation (xx, yy, engineering xy)
    let d = [
        [two_mu + lambda, lambda, 0.0],
        [lambda, two_mu + lambda, 0.0],
        [0.0, 0.0, mu],
    ];
    let mut b = [[0.0; 6]; 3];
    for k in 0..3 {
        b[0][2 * k] = g[k][0];
        b[1][2 * k + 1] = g[k][1];
        b[2][2 * k] = g[k][1];
        b[2][2 * k + 1] = g[k][0];
    }
    let mut db = [[0.0; 6]; 3];
    for i in 0..3 {
        for j in 0..6 {
            db[i][j] = (0..3).map(|k| d[i][k] * b[k][j]).sum();
        }
    }
    let mut ke = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            ke[i][j] = area * (0..3).map(|k| b[k][i] * db[k][j]).sum::<f64>();
        }
    }
    ke
}

fn elastic_triplets(mesh: &TriangleMesh, params: &ElasticParams) -> Vec<(usize, usize, f64)> {
    (0..mesh.n_triangles())
        .into_par_iter()
        .flat_map_iter(|t| {
            let tri = mesh.triangles()[t];
            let ke = elasticity_element(params, mesh.vertices(t));
            let dofs = [
                2 * tri[0],
                2 * tri[0] + 1,
                2 * tri[1],
                2 * tri[1] + 1,
                2 * tri[2],
                2 * tri[2] + 1,
            ];
            let mut out = Vec::with_capacity(36);
            for i in 0..6 {
                for j in 0..6 {
                    out.push((dofs[i], dofs[j], ke[i][j]));
                }
            }
            out
        })
        .collect()
}

/// Trace of the unpenalized elasticity matrix, used to scale regularization.
pub fn elastic_trace(mesh: &TriangleMesh, params: &ElasticParams) -> f64 {
    (0..mesh.n_triangles())
        .map(|t| {
            let ke = elasticity_element(params, mesh.vertices(t));
            (0..6).map(|i| ke[i][i]).sum::<f64>()
        })
        .sum()
}

/// `a(u, v) = int sigma(u) : eps(v) + alpha * sum_e |e|/2 (u.n_e)(v.n_e)` at both
/// end nodes of each boundary edge, with normals and lengths from `frame`.
pub fn assemble_elasticity(
    mesh: &TriangleMesh,
    params: &ElasticParams,
    frame: &BoundaryFrame,
) -> Result<SparseOperator> {
    params.validate()?;
    if frame.normals.len() != mesh.boundary_edges().len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.boundary_edges().len(),
            got: frame.normals.len(),
        });
    }
    let mut triplets = elastic_triplets(mesh, params);
    if params.penalty_alpha > 0.0 {
        for ((be, n), len) in mesh
            .boundary_edges()
            .iter()
            .zip(&frame.normals)
            .zip(&frame.lengths)
        {
            let w = params.penalty_alpha * 0.5 * len;
            for &node in &be.nodes {
                for p in 0..2 {
                    for q in 0..2 {
                        triplets.push((2 * node + p, 2 * node + q, w * n[p] * n[q]));
                    }
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(2 * mesh.n_nodes(), triplets))
}

/// Elasticity form with the reference facet normals, for polytopal domains
/// whose facets each map onto themselves. Assemble once and reuse.
pub fn assemble_elasticity_fixed(
    mesh: &TriangleMesh,
    params: &ElasticParams,
    facet_invariant: bool,
) -> Result<SparseOperator> {
    if !facet_invariant || !mesh.is_polytopal() {
        return Err(Error::InvalidParameter(
            "fixed-normal elasticity requires a polytopal domain whose facets map onto themselves"
                .into(),
        ));
    }
    assemble_elasticity(mesh, params, &BoundaryFrame::reference(mesh))
}

/// Consistent P1 mass matrix for `components` interleaved components.
pub fn assemble_mass(mesh: &TriangleMesh, components: usize) -> SparseOperator {
    let mut triplets = Vec::with_capacity(9 * components * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[t];
        let [a, b, c] = mesh.vertices(t);
        let area = crate::mesh::triangle_area(a, b, c);
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                for d in 0..components {
                    triplets.push((components * tri[i] + d, components * tri[j] + d, m));
                }
            }
        }
    }
    SparseOperator::from_triplets(components * mesh.n_nodes(), triplets)
}

/// Scalar P1 stiffness matrix of `-Laplace`.
pub fn assemble_laplacian(mesh: &TriangleMesh) -> SparseOperator {
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[t];
        let (g, area) = shape_gradients(mesh.vertices(t));
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((
                    tri[i],
                    tri[j],
                    area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]),
                ));
            }
        }
    }
    SparseOperator::from_triplets(mesh.n_nodes(), triplets)
}

/// `int_Omega f . g` by quadrature (exact for products of P1 fields).
pub fn l2_inner_product(mesh: &TriangleMesh, f: &NodalField, g: &NodalField) -> Result<f64> {
    let c = f.components();
    mesh.check_field(f, c)?;
    mesh.check_field(g, c)?;
    let rule = QuadratureRule::degree4();
    let (fv, gv) = (f.values(), g.values());
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[t];
        let [a, b, cc] = mesh.vertices(t);
        let area = crate::mesh::triangle_area(a, b, cc);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let mut s = 0.0;
            for d in 0..c {
                let fq: f64 = (0..3).map(|k| bary[k] * fv[c * tri[k] + d]).sum();
                let gq: f64 = (0..3).map(|k| bary[k] * gv[c * tri[k] + d]).sum();
                s += fq * gq;
            }
            total += area * w * s;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn no_penalty() -> ElasticParams {
        ElasticParams {
            penalty_alpha: 0.0,
            ..Default::default()
        }
    }

    fn random_field(n: usize, c: usize, seed: u64) -> NodalField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NodalField::new(c, (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let toy = structured::toy_domain(8, 10).unwrap();
        let one = NodalField::from_fn_scalar(toy.nodes(), |_| 1.0);
        let x = NodalField::from_fn_scalar(toy.nodes(), |p| p[0]);
        assert!((l2_inner_product(&toy, &one, &one).unwrap() - 5.0).abs() < 1e-13);
        assert!(l2_inner_product(&toy, &one, &x).unwrap().abs() < 1e-13);

        let sq = structured::rectangle([0.0, 0.0], [1.0, 1.0], 5, 7).unwrap();
        let x = NodalField::from_fn_scalar(sq.nodes(), |p| p[0]);
        assert!((l2_inner_product(&sq, &x, &x).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn inner_product_mesh_mismatch() {
        let sq = structured::rectangle([0.0, 0.0], [1.0, 1.0], 2, 2).unwrap();
        let f = NodalField::zeros(3, 1);
        assert!(matches!(
            l2_inner_product(&sq, &f, &f),
            Err(Error::MeshMismatch(_))
        ));
    }

    #[test]
    fn mass_matrix_matches_quadrature() {
        let toy = structured::toy_domain(6, 7).unwrap();
        let m = assemble_mass(&toy, 1);
        let ones = vec![1.0; toy.n_nodes()];
        assert!((m.apply(&ones).iter().sum::<f64>() - 5.0).abs() < 1e-13);
        assert!((m.form(&ones, &ones) - 5.0).abs() < 1e-13);
        for c in [1, 2] {
            let m = assemble_mass(&toy, c);
            for s in 0..10 {
                let f = random_field(toy.n_nodes(), c, 2 * s);
                let g = random_field(toy.n_nodes(), c, 2 * s + 1);
                let q = l2_inner_product(&toy, &f, &g).unwrap();
                assert!((m.form(f.values(), g.values()) - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rigid_motions_have_zero_energy() {
        let mesh = structured::rectangle([0.0, 0.0], [1.0, 2.0], 5, 6).unwrap();
        let a =
            assemble_elasticity(&mesh, &no_penalty(), &BoundaryFrame::reference(&mesh)).unwrap();
        for f in [
            NodalField::from_fn_vector(mesh.nodes(), |_| [1.0, 0.0]),
            NodalField::from_fn_vector(mesh.nodes(), |_| [0.0, 1.0]),
            NodalField::from_fn_vector(mesh.nodes(), |p| [-p[1], p[0]]),
        ] {
            assert!(a.form(f.values(), f.values()).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_of_translation() {
        let mesh = structured::rectangle([0.0, 0.0], [1.0, 1.0], 4, 4).unwrap();
        let params = ElasticParams::default();
        let a = assemble_elasticity(&mesh, &params, &BoundaryFrame::reference(&mesh)).unwrap();
        let u = NodalField::from_fn_vector(mesh.nodes(), |_| [1.0, 0.0]);
        // The two facets with normal +-(1, 0) each have length 1.
        let expected = params.penalty_alpha * 2.0;
        let got = a.form(u.values(), u.values());
        assert!((got - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn symmetric_and_psd() {
        let mesh = structured::toy_domain(6, 8).unwrap();
        let a = assemble_elasticity(
            &mesh,
            &ElasticParams::default(),
            &BoundaryFrame::reference(&mesh),
        )
        .unwrap();
        assert!(a.asymmetry() < 1e-10);
        for s in 0..20 {
            let u = random_field(mesh.n_nodes(), 2, s);
            let v = random_field(mesh.n_nodes(), 2, 100 + s);
            let q = a.form(u.values(), u.values()) / u.values().iter().map(|x| x * x).sum::<f64>();
            assert!(q >= -1e-10);
            let (uv, vu) = (
                a.form(u.values(), v.values()),
                a.form(v.values(), u.values()),
            );
            assert!((uv - vu).abs() <= 1e-10 * uv.abs().max(1.0));
        }
    }

    #[test]
    fn fixed_assembly_matches_general_at_identity() {
        let mesh = structured::toy_domain(6, 8).unwrap();
        let p = ElasticParams::default();
        let fixed = assemble_elasticity_fixed(&mesh, &p, true).unwrap();
        let general = assemble_elasticity(
            &mesh,
            &p,
            &BoundaryFrame::from_positions(&mesh, mesh.nodes()),
        )
        .unwrap();
        assert!(fixed.max_abs_diff(&general) <= 1e-12);
        assert_eq!(fixed.dim(), 2 * mesh.n_nodes());
        assert!(assemble_elasticity_fixed(&mesh, &p, false).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        let mesh = structured::toy_domain(2, 2).unwrap();
        let frame = BoundaryFrame::reference(&mesh);
        for p in [
            ElasticParams {
                young_modulus: 0.0,
                ..Default::default()
            },
            ElasticParams {
                poisson_ratio: 0.5,
                ..Default::default()
            },
            ElasticParams {
                penalty_alpha: -1.0,
                ..Default::default()
            },
        ] {
            assert!(assemble_elasticity(&mesh, &p, &frame).is_err());
        }
    }

    #[test]
    fn assembly_is_bit_reproducible_across_thread_counts() {
        let mesh = structured::toy_domain(12, 15).unwrap();
        let p = ElasticParams::default();
        let frame = BoundaryFrame::reference(&mesh);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| assemble_elasticity(&mesh, &p, &frame).unwrap());
        let b = four.install(|| assemble_elasticity(&mesh, &p, &frame).unwrap());
        assert_eq!(a, b);
    }
}
