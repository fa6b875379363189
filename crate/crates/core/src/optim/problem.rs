//! Snapshots pulled back through the current morphings and sampled at the
//! quadrature points of the reference mesh. Every integral over the
//! reference domain (correlation matrix, sensitivity loads, directional
//! derivatives) uses the same samples, so the discrete gradient is the exact
//! derivative of the discrete objective.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, dot, SkylineCholesky, Smoother};
use crate::mesh::{scalar_gradient, NodalField, Point, PointLocator, QuadratureRule, TriangleMesh};
use crate::pod::Spectrum;

/// One scalar snapshot on its own domain.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub mesh: Arc<TriangleMesh>,
    pub field: NodalField,
}

impl Snapshot {
    pub fn new(mesh: Arc<TriangleMesh>, field: NodalField) -> Result<Self> {
        mesh.check_field(&field, 1)?;
        Ok(Self { mesh, field })
    }
}

#[derive(Debug, Clone)]
struct ActiveField {
    field: NodalField,
    /// Piecewise-constant gradient per triangle of the snapshot mesh.
    grads: Vec<[f64; 2]>,
}

impl ActiveField {
    fn new(mesh: &TriangleMesh, field: NodalField) -> Self {
        let grads = (0..mesh.n_triangles())
            .map(|t| scalar_gradient(mesh, &field, t))
            .collect();
        Self { field, grads }
    }
}

/// Reference mesh, snapshots and quadrature for the morphing problem.
#[derive(Debug, Clone)]
pub struct MorphingProblem {
    reference: Arc<TriangleMesh>,
    rule: QuadratureRule,
    snapshots: Vec<Snapshot>,
    /// Distinct snapshot meshes, and the index into them for each snapshot.
    meshes: Vec<Arc<TriangleMesh>>,
    mesh_of: Vec<usize>,
    active: Vec<ActiveField>,
    c2: Option<f64>,
    /// `area_t * w_q`, indexed `t * nq + q`.
    weights: Vec<f64>,
}

fn same_mesh(a: &Arc<TriangleMesh>, b: &Arc<TriangleMesh>) -> bool {
    Arc::ptr_eq(a, b) || (a.nodes() == b.nodes() && a.triangles() == b.triangles())
}

impl MorphingProblem {
    pub fn new(reference: Arc<TriangleMesh>, snapshots: Vec<Snapshot>) -> Result<Self> {
        Self::with_rule(reference, snapshots, QuadratureRule::default())
    }

    pub fn with_rule(
        reference: Arc<TriangleMesh>,
        snapshots: Vec<Snapshot>,
        rule: QuadratureRule,
    ) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidParameter("no snapshots given".into()));
        }
        if reference.n_triangles() == 0 {
            return Err(Error::EmptyMesh);
        }
        let mut meshes: Vec<Arc<TriangleMesh>> = Vec::new();
        let mut mesh_of = Vec::with_capacity(snapshots.len());
        for s in &snapshots {
            s.mesh.check_field(&s.field, 1)?;
            match meshes.iter().position(|m| same_mesh(m, &s.mesh)) {
                Some(k) => mesh_of.push(k),
                None => {
                    mesh_of.push(meshes.len());
                    meshes.push(s.mesh.clone());
                }
            }
        }
        let active = snapshots
            .iter()
            .map(|s| ActiveField::new(&s.mesh, s.field.clone()))
            .collect();
        let nq = rule.len();
        let mut weights = Vec::with_capacity(reference.n_triangles() * nq);
        for t in 0..reference.n_triangles() {
            let area = reference.signed_area(t)?;
            weights.extend(rule.weights.iter().map(|w| w * area));
        }
        Ok(Self {
            reference,
            rule,
            snapshots,
            meshes,
            mesh_of,
            active,
            c2: None,
            weights,
        })
    }

    pub fn reference(&self) -> &Arc<TriangleMesh> {
        &self.reference
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Current smoothing parameter, `None` when the raw fields are used.
    pub fn c2(&self) -> Option<f64> {
        self.c2
    }

    /// True when every snapshot lives on the reference mesh itself.
    pub fn shared_domain(&self) -> bool {
        self.meshes.len() == 1 && same_mesh(&self.meshes[0], &self.reference)
    }

    /// Replaces the sampled fields by their reaction-diffusion smoothing with
    /// parameter `c2`, or restores the raw fields for `None`.
    pub fn set_smoothing(&mut self, c2: Option<f64>) -> Result<()> {
        if c2 == self.c2 {
            return Ok(());
        }
        self.active = match c2 {
            None => self
                .snapshots
                .iter()
                .map(|s| ActiveField::new(&s.mesh, s.field.clone()))
                .collect(),
            Some(c2) => {
                let smoothers = self
                    .meshes
                    .iter()
                    .map(|m| Smoother::new(m, c2))
                    .collect::<Result<Vec<_>>>()?;
                self.snapshots
                    .par_iter()
                    .zip(&self.mesh_of)
                    .map(|(s, &k)| Ok(ActiveField::new(&s.mesh, smoothers[k].apply(&s.field)?)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        self.c2 = c2;
        Ok(())
    }

    pub fn with_smoothing(&self, c2: Option<f64>) -> Result<Self> {
        let mut p = self.clone();
        p.set_smoothing(c2)?;
        Ok(p)
    }

    fn check_displacements(&self, displacements: &[NodalField]) -> Result<()> {
        if displacements.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: displacements.len(),
            });
        }
        for d in displacements {
            self.reference.check_field(d, 2)?;
        }
        Ok(())
    }

    /// Samples `u_i o phi_i` and `grad u_i o phi_i` at every quadrature point.
    /// `hints` are the containing triangles from a previous call and only
    /// speed up point location.
    pub fn sample(
        &self,
        displacements: &[NodalField],
        hints: Option<&[Vec<u32>]>,
    ) -> Result<Samples> {
        self.check_displacements(displacements)?;
        let locators: Vec<PointLocator> =
            self.meshes.iter().map(|m| PointLocator::new(m)).collect();
        let per: Vec<(Vec<f64>, Vec<[f64; 2]>, Vec<u32>, usize)> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                self.sample_one(
                    i,
                    &locators[self.mesh_of[i]],
                    &displacements[i],
                    hints.map(|h| &h[i][..]),
                )
            })
            .collect();
        let mut samples = Samples::default();
        for (v, g, h, c) in per {
            samples.values.push(v);
            samples.grads.push(g);
            samples.hints.push(h);
            samples.clamped += c;
        }
        Ok(samples)
    }

    fn sample_one(
        &self,
        i: usize,
        locator: &PointLocator,
        displacement: &NodalField,
        hints: Option<&[u32]>,
    ) -> (Vec<f64>, Vec<[f64; 2]>, Vec<u32>, usize) {
        let nodes = self.reference.nodes();
        let d = displacement.values();
        let target = locator.mesh();
        let field = self.active[i].field.values();
        let grads = &self.active[i].grads;
        let nq = self.rule.len();
        let total = self.weights.len();
        let mut values = Vec::with_capacity(total);
        let mut gout = Vec::with_capacity(total);
        let mut hout = Vec::with_capacity(total);
        let mut clamped = 0;
        for (t, tri) in self.reference.triangles().iter().enumerate() {
            let y: [Point; 3] = tri.map(|a| [nodes[a][0] + d[2 * a], nodes[a][1] + d[2 * a + 1]]);
            for (q, b) in self.rule.points.iter().enumerate() {
                let p = [
                    b[0] * y[0][0] + b[1] * y[1][0] + b[2] * y[2][0],
                    b[0] * y[0][1] + b[1] * y[1][1] + b[2] * y[2][1],
                ];
                let hint = match hints {
                    Some(h) => h[t * nq + q] as usize,
                    None => t.min(target.n_triangles() - 1),
                };
                let loc = locator.locate(p, Some(hint));
                let tt = target.triangles()[loc.triangle];
                values.push(
                    loc.bary[0] * field[tt[0]]
                        + loc.bary[1] * field[tt[1]]
                        + loc.bary[2] * field[tt[2]],
                );
                gout.push(grads[loc.triangle]);
                hout.push(loc.triangle as u32);
                clamped += loc.clamped as usize;
            }
        }
        (values, gout, hout, clamped)
    }

    /// Correlation matrix `C_ij = <u_i o phi_i, u_j o phi_j>` of sampled values.
    pub fn correlation(&self, samples: &Samples) -> DMatrix<f64> {
        let n = samples.values.len();
        let weighted: Vec<Vec<f64>> = samples
            .values
            .par_iter()
            .map(|v| v.iter().zip(&self.weights).map(|(a, w)| a * w).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..=i)
                    .map(|j| dot(&weighted[i], &samples.values[j]))
                    .collect()
            })
            .collect();
        let mut c = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        c
    }

    pub fn evaluate(
        &self,
        displacements: &[NodalField],
        hints: Option<&[Vec<u32>]>,
    ) -> Result<Evaluation> {
        let samples = self.sample(displacements, hints)?;
        let correlation = self.correlation(&samples);
        let spectrum = Spectrum::new(&correlation)?;
        Ok(Evaluation {
            samples,
            correlation,
            spectrum,
        })
    }

    /// `J_r` of the pulled-back family.
    pub fn efficiency(&self, displacements: &[NodalField], r: usize) -> Result<f64> {
        self.evaluate(displacements, None)?.efficiency(r)
    }

    /// Values of the P1 basis functions at the quadrature points of one triangle.
    fn shape_values(&self) -> &[[f64; 3]] {
        &self.rule.points
    }
}

/// `J_r` computed on the fields smoothed with parameter `c2`.
pub fn multiscale_objective(
    problem: &MorphingProblem,
    displacements: &[NodalField],
    r: usize,
    c2: f64,
) -> Result<f64> {
    if !(c2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smoothing parameter c2 must be positive, got {c2}"
        )));
    }
    problem
        .with_smoothing(Some(c2))?
        .efficiency(displacements, r)
}

/// Pulled-back values and gradients at the quadrature points, per snapshot.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
    pub hints: Vec<Vec<u32>>,
    /// Number of quadrature points that fell outside their target mesh.
    pub clamped: usize,
}

/// The objective and everything needed for its differential at one state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub samples: Samples,
    pub correlation: DMatrix<f64>,
    pub spectrum: Spectrum,
}

impl Evaluation {
    pub fn efficiency(&self, r: usize) -> Result<f64> {
        self.spectrum.efficiency(r)
    }

    /// `K_ij = sum_{k<=r} (2 zeta_ki zeta_kj / tr C - 2 lambda_k delta_ij / tr C^2)`,
    /// so that `DJ_r = sum_ij K_ij <u_i o phi_i, (grad u_j o phi_j) . psi_j>`.
    pub fn coefficients(&self, r: usize) -> Result<DMatrix<f64>> {
        let j = self.efficiency(r)?;
        let tr = self.spectrum.trace;
        let n = self.spectrum.len();
        let z = self.spectrum.eigenvectors.columns(0, r);
        let mut k = (z * z.transpose()) * (2.0 / tr);
        for i in 0..n {
            k[(i, i)] -= 2.0 * j / tr;
        }
        Ok(k)
    }

    /// Load vectors `<f_i, v>` for every nodal test function `v`, with
    /// `f_i = sum_j K_ij (u_j o phi_j) (grad u_i o phi_i)`.
    pub fn sensitivity_loads(&self, problem: &MorphingProblem, r: usize) -> Result<Vec<Vec<f64>>> {
        let k = self.coefficients(r)?;
        let n = self.samples.values.len();
        let mesh = problem.reference();
        let nq = problem.rule.len();
        let shape = problem.shape_values();
        let loads = (0..n)
            .into_par_iter()
            .map(|i| {
                let nsamp = problem.weights.len();
                let mut s = vec![0.0; nsamp];
                for j in 0..n {
                    let kij = k[(i, j)];
                    if kij != 0.0 {
                        for (o, v) in s.iter_mut().zip(&self.samples.values[j]) {
                            *o += kij * v;
                        }
                    }
                }
                let g = &self.samples.grads[i];
                let mut b = vec![0.0; 2 * mesh.n_nodes()];
                for (t, tri) in mesh.triangles().iter().enumerate() {
                    for q in 0..nq {
                        let idx = t * nq + q;
                        let w = problem.weights[idx] * s[idx];
                        let f = [w * g[idx][0], w * g[idx][1]];
                        for (a, &node) in tri.iter().enumerate() {
                            let phi = shape[q][a];
                            b[2 * node] += phi * f[0];
                            b[2 * node + 1] += phi * f[1];
                        }
                    }
                }
                b
            })
            .collect();
        Ok(loads)
    }

    /// Nodal `L^2` projections of the sensitivity fields `f_i`.
    pub fn sensitivity_fields(
        &self,
        problem: &MorphingProblem,
        r: usize,
    ) -> Result<Vec<NodalField>> {
        let loads = self.sensitivity_loads(problem, r)?;
        let mass = SkylineCholesky::factor(&assemble_mass(problem.reference(), 2))?;
        loads
            .iter()
            .map(|b| NodalField::new(2, mass.solve(b)))
            .collect()
    }

    /// `DJ_r[Phi][Psi] = sum_i <f_i, psi_i>`.
    pub fn differential(
        &self,
        problem: &MorphingProblem,
        r: usize,
        directions: &[NodalField],
    ) -> Result<f64> {
        problem.check_displacements(directions)?;
        let loads = self.sensitivity_loads(problem, r)?;
        Ok(loads
            .iter()
            .zip(directions)
            .map(|(b, psi)| dot(b, psi.values()))
            .sum())
    }

    /// The same differential through the double sum over eigenvector
    /// products and the matrix `Z_ij = <u_i o phi_i, (grad u_j o phi_j) . psi_j>`.
    pub fn differential_lemma(
        &self,
        problem: &MorphingProblem,
        r: usize,
        directions: &[NodalField],
    ) -> Result<f64> {
        problem.check_displacements(directions)?;
        let n = self.samples.values.len();
        let mesh = problem.reference();
        let nq = problem.rule.len();
        let shape = problem.shape_values();
        // (grad u_j o phi_j) . psi_j at each quadrature point
        let dir: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let psi = directions[j].values();
                let g = &self.samples.grads[j];
                let mut out = Vec::with_capacity(problem.weights.len());
                for (t, tri) in mesh.triangles().iter().enumerate() {
                    for q in 0..nq {
                        let mut p = [0.0; 2];
                        for (a, &node) in tri.iter().enumerate() {
                            p[0] += shape[q][a] * psi[2 * node];
                            p[1] += shape[q][a] * psi[2 * node + 1];
                        }
                        let gq = g[t * nq + q];
                        out.push(problem.weights[t * nq + q] * (gq[0] * p[0] + gq[1] * p[1]));
                    }
                }
                out
            })
            .collect();
        let z = DMatrix::from_fn(n, n, |i, j| dot(&self.samples.values[i], &dir[j]));
        let tr = self.spectrum.trace;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut c = 0.0;
                for k in 0..r {
                    let zk = self.spectrum.eigenvectors.column(k);
                    c += 2.0 * zk[i] * zk[j] / tr;
                    if i == j {
                        c -= 2.0 * self.spectrum.eigenvalues[k] / (tr * tr);
                    }
                }
                total += c * z[(i, j)];
            }
        }
        Ok(total)
    }
}
