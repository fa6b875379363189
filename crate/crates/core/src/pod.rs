//! Proper orthogonal decomposition by the method of snapshots.
//!
//! The correlation matrix `C_ij = <u_i, u_j>` is diagonalized; its
//! eigenvalues are the energies captured by each mode and
//! `J_r = (lambda_1 + .. + lambda_r) / tr C` is the efficiency of the first
//! `r` modes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, SparseOperator};
use crate::mesh::{NodalField, TriangleMesh};

/// Eigenvalues at or below this fraction of the trace count as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Two eigenvalues closer than this fraction of the trace form a cluster.
pub const CLUSTER_TOL: f64 = 1e-10;

/// Snapshot fields sharing one reference mesh.
#[derive(Debug, Clone)]
pub struct SnapshotFamily {
    mesh: Arc<TriangleMesh>,
    fields: Vec<NodalField>,
    mass: SparseOperator,
}

impl SnapshotFamily {
    pub fn new(mesh: Arc<TriangleMesh>, fields: Vec<NodalField>) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::InvalidParameter("snapshot family is empty".into()))?;
        let components = first.components();
        for f in &fields {
            mesh.check_field(f, components)?;
        }
        let mass = assemble_mass(&mesh, components);
        Ok(Self { mesh, fields, mass })
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn fields(&self) -> &[NodalField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn components(&self) -> usize {
        self.fields[0].components()
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    pub fn inner(&self, a: &NodalField, b: &NodalField) -> f64 {
        self.mass.form(a.values(), b.values())
    }
}

/// `C_ij = <u_i, u_j>` through the consistent mass matrix.
pub fn correlation_matrix(family: &SnapshotFamily) -> DMatrix<f64> {
    let n = family.len();
    let mf: Vec<Vec<f64>> = family
        .fields
        .par_iter()
        .map(|f| family.mass.apply(f.values()))
        .collect();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = crate::fem::dot(family.fields[i].values(), &mf[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Eigen-decomposition of a correlation matrix, sorted by decreasing energy.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Nonincreasing and nonnegative.
    pub eigenvalues: Vec<f64>,
    /// Column k is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    pub trace: f64,
}

impl Spectrum {
    pub fn new(c: &DMatrix<f64>) -> Result<Self> {
        let n = c.nrows();
        if n == 0 || c.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.ncols(),
            });
        }
        let sym = (c + c.transpose()) * 0.5;
        let trace = sym.trace();
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let scale = trace.abs().max(f64::MIN_POSITIVE);
        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (k, &o) in order.iter().enumerate() {
            let mut lam = eig.eigenvalues[o];
            if lam < 0.0 {
                if lam < -CLUSTER_TOL * scale {
                    log::warn!("correlation matrix has eigenvalue {lam:e} < 0");
                }
                lam = 0.0;
            }
            eigenvalues.push(lam);
            let mut v: DVector<f64> = eig.eigenvectors.column(o).into_owned();
            let vmax = v.amax();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * vmax) {
                if *first < 0.0 {
                    v = -v;
                }
            }
            eigenvectors.set_column(k, &v);
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
            trace,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `(sum_{k<=r} lambda_k) / tr C`.
    pub fn efficiency(&self, r: usize) -> Result<f64> {
        check_r(r, self.len())?;
        if !(self.trace > 0.0) {
            return Err(Error::ZeroTrace);
        }
        Ok(self.eigenvalues[..r].iter().sum::<f64>() / self.trace)
    }

    /// True when `lambda_r` and `lambda_{r+1}` are numerically equal.
    pub fn splits_cluster(&self, r: usize) -> bool {
        r < self.len()
            && (self.eigenvalues[r - 1] - self.eigenvalues[r]).abs() <= CLUSTER_TOL * self.trace
            && self.eigenvalues[r - 1] > RANK_TOL * self.trace
    }

    /// Number of eigenvalues above the rank tolerance.
    pub fn rank(&self) -> usize {
        self.eigenvalues
            .iter()
            .filter(|&&l| l > RANK_TOL * self.trace)
            .count()
    }
}

fn check_r(r: usize, n: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::ModeCount { r, n });
    }
    Ok(())
}

pub fn efficiency(c: &DMatrix<f64>, r: usize) -> Result<f64> {
    check_r(r, c.nrows())?;
    Spectrum::new(c)?.efficiency(r)
}

/// Full POD of a snapshot family.
#[derive(Debug, Clone)]
pub struct PodResult {
    pub spectrum: Spectrum,
    pub r: usize,
    /// `psi_k = sum_i zeta_{k,i} u_i / sqrt(lambda_k)`, for nonzero `lambda_k`, k < r.
    pub modes: Vec<NodalField>,
    /// `gamma[(i, j)] = <psi_j, u_i>`.
    pub coordinates: DMatrix<f64>,
}

pub fn pod(family: &SnapshotFamily, r: usize) -> Result<PodResult> {
    check_r(r, family.len())?;
    let c = correlation_matrix(family);
    pod_from_correlation(family, &c, r)
}

pub fn pod_from_correlation(
    family: &SnapshotFamily,
    c: &DMatrix<f64>,
    r: usize,
) -> Result<PodResult> {
    check_r(r, family.len())?;
    let spectrum = Spectrum::new(c)?;
    if !(spectrum.trace > 0.0) {
        return Err(Error::ZeroTrace);
    }
    if spectrum.splits_cluster(r) {
        log::warn!("r = {r} splits a cluster of equal eigenvalues; modes within it are arbitrary");
    }
    let modes = build_modes(family, &spectrum, r);
    let coordinates = coordinates(family, &modes)?;
    Ok(PodResult {
        spectrum,
        r,
        modes,
        coordinates,
    })
}

fn build_modes(family: &SnapshotFamily, spectrum: &Spectrum, r: usize) -> Vec<NodalField> {
    let n = family.len();
    let components = family.components();
    let len = family.fields[0].values().len();
    (0..r)
        .filter(|&k| spectrum.eigenvalues[k] > RANK_TOL * spectrum.trace)
        .map(|k| {
            let inv = 1.0 / spectrum.eigenvalues[k].sqrt();
            let mut v = vec![0.0; len];
            for i in 0..n {
                let z = spectrum.eigenvectors[(i, k)] * inv;
                for (o, x) in v.iter_mut().zip(family.fields[i].values()) {
                    *o += z * x;
                }
            }
            NodalField::new(components, v).expect("finite mode")
        })
        .collect()
}

/// Projections `<psi_j, u_i>` of every snapshot onto every mode.
pub fn coordinates(family: &SnapshotFamily, modes: &[NodalField]) -> Result<DMatrix<f64>> {
    for m in modes {
        family.mesh.check_field(m, family.components())?;
    }
    let n = family.len();
    let mm: Vec<Vec<f64>> = modes
        .iter()
        .map(|m| family.mass.apply(m.values()))
        .collect();
    let mut g = DMatrix::zeros(n, modes.len());
    for i in 0..n {
        for (j, m) in mm.iter().enumerate() {
            g[(i, j)] = crate::fem::dot(family.fields[i].values(), m);
        }
    }
    Ok(g)
}

/// `sum_j coeffs[j] * modes[j]`.
pub fn reconstruct(modes: &[NodalField], coeffs: &[f64]) -> Result<NodalField> {
    let first = modes
        .first()
        .ok_or_else(|| Error::InvalidParameter("no modes to reconstruct from".into()))?;
    if coeffs.len() != modes.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            got: coeffs.len(),
        });
    }
    let mut out = NodalField::zeros(first.n_nodes(), first.components());
    for (m, &c) in modes.iter().zip(coeffs) {
        out.axpy(c, m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh() -> Arc<TriangleMesh> {
        Arc::new(structured::rectangle([-1.0, -1.0], [1.0, 1.0], 12, 12).unwrap())
    }

    fn random_family(n: usize, seed: u64) -> SnapshotFamily {
        let m = mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fields = (0..n)
            .map(|_| {
                let (a, b, c) = (
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-1.0..1.0),
                );
                NodalField::from_fn_scalar(m.nodes(), |p| {
                    (a * p[0]).sin() + (b * p[1]).cos() * c + a * b * p[0] * p[1]
                })
            })
            .collect();
        SnapshotFamily::new(m, fields).unwrap()
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose()
    }

    #[test]
    fn identical_unit_snapshots() {
        let m = mesh();
        let area: f64 = 4.0;
        let u = NodalField::from_fn_scalar(m.nodes(), |_| 1.0 / area.sqrt());
        let fam = SnapshotFamily::new(m, vec![u.clone(), u]).unwrap();
        let c = correlation_matrix(&fam);
        for v in c.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((efficiency(&c, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_snapshots() {
        let m = mesh();
        let f = NodalField::from_fn_scalar(m.nodes(), |p| (std::f64::consts::PI * p[0]).sin());
        let g = NodalField::from_fn_scalar(m.nodes(), |p| (std::f64::consts::PI * p[0]).cos());
        let c = correlation_matrix(&SnapshotFamily::new(m, vec![f, g]).unwrap());
        assert!(c[(0, 1)].abs() <= 1e-8);
    }

    #[test]
    fn gram_matches_quadrature_inner_product() {
        let fam = random_family(4, 9);
        let c = correlation_matrix(&fam);
        for i in 0..4 {
            for j in 0..4 {
                let q =
                    crate::fem::l2_inner_product(fam.mesh(), &fam.fields()[i], &fam.fields()[j])
                        .unwrap();
                assert!((c[(i, j)] - q).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn diagonal_spectrum() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let s = Spectrum::new(&c).unwrap();
        assert_eq!(s.eigenvalues, vec![3.0, 1.0]);
        assert!((s.eigenvectors[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((s.eigenvectors[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((efficiency(&c, 1).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rank_one_family() {
        let m = mesh();
        let u = NodalField::from_fn_scalar(m.nodes(), |p| p[0] + 2.0);
        let fam = SnapshotFamily::new(m, vec![u.clone(); 5]).unwrap();
        let norm2 = fam.inner(&u, &u);
        let res = pod(&fam, 2).unwrap();
        assert!((res.spectrum.eigenvalues[0] - 5.0 * norm2).abs() < 1e-10 * norm2);
        assert!(res.spectrum.eigenvalues[1..]
            .iter()
            .all(|&l| l.abs() < 1e-10 * norm2));
        assert_eq!(res.modes.len(), 1);
        assert!((res.spectrum.efficiency(1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruct_psd_matrix() {
        let c = random_psd(5, 1);
        let s = Spectrum::new(&c).unwrap();
        let l = DMatrix::from_diagonal(&DVector::from_vec(s.eigenvalues.clone()));
        let back = &s.eigenvectors * l * s.eigenvectors.transpose();
        assert!((back - &c).amax() < 1e-10);
        let gram = s.eigenvectors.transpose() * &s.eigenvectors;
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-10);
    }

    #[test]
    fn r_out_of_range() {
        let c = random_psd(3, 2);
        assert!(matches!(efficiency(&c, 0), Err(Error::ModeCount { .. })));
        assert!(matches!(efficiency(&c, 4), Err(Error::ModeCount { .. })));
        assert!(matches!(
            efficiency(&DMatrix::zeros(2, 2), 1),
            Err(Error::ZeroTrace)
        ));
    }

    #[test]
    fn coordinates_of_mode_and_completeness() {
        let fam = random_family(4, 3);
        let res = pod(&fam, 4).unwrap();
        let mode_fam = SnapshotFamily::new(fam.mesh().clone(), vec![res.modes[0].clone()]).unwrap();
        let g = coordinates(&mode_fam, &res.modes).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-10);
        for j in 1..g.ncols() {
            assert!(g[(0, j)].abs() < 1e-10);
        }
        for i in 0..fam.len() {
            let u = &fam.fields()[i];
            let coeffs: Vec<f64> = (0..res.modes.len())
                .map(|j| res.coordinates[(i, j)])
                .collect();
            let mut diff = reconstruct(&res.modes, &coeffs).unwrap();
            diff.axpy(-1.0, u);
            let rel = (fam.inner(&diff, &diff) / fam.inner(u, u)).sqrt();
            assert!(rel <= 1e-7, "{rel}");
        }
    }

    #[test]
    fn bessel_inequality() {
        let fam = random_family(5, 4);
        let res = pod(&fam, 2).unwrap();
        for i in 0..fam.len() {
            let u = &fam.fields()[i];
            let s: f64 = (0..res.modes.len())
                .map(|j| res.coordinates[(i, j)].powi(2))
                .sum();
            assert!(fam.inner(u, u) - s >= -1e-8);
        }
    }

    #[test]
    fn eigenvalue_perturbation_identity() {
        let c = random_psd(6, 11);
        let p = {
            let a = random_psd(6, 12) - random_psd(6, 13);
            (&a + a.transpose()) * 0.5
        };
        let s = Spectrum::new(&c).unwrap();
        let eps = 1e-6;
        let plus = Spectrum::new(&(&c + &p * eps)).unwrap();
        let minus = Spectrum::new(&(&c - &p * eps)).unwrap();
        for k in 0..6 {
            let fd = (plus.eigenvalues[k] - minus.eigenvalues[k]) / (2.0 * eps);
            let z = s.eigenvectors.column(k);
            let an = (z.transpose() * &p * z)[(0, 0)];
            assert!(
                (fd - an).abs() <= 1e-4 * an.abs().max(1e-3),
                "k={k}: {fd} vs {an}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn efficiency_properties(seed in 0u64..10_000, n in 2usize..7, scale in 0.1f64..10.0) {
            let c = random_psd(n, seed);
            let s = Spectrum::new(&c).unwrap();
            let mut prev = 0.0;
            for r in 1..=n {
                let j = s.efficiency(r).unwrap();
                prop_assert!(j >= prev - 1e-14);
                prev = j;
            }
            prop_assert!((s.efficiency(n).unwrap() - 1.0).abs() < 1e-10);
            prop_assert!((s.eigenvalues.iter().sum::<f64>() - c.trace()).abs() <= 1e-8 * c.trace());
            let scaled = &c * (scale * scale);
            prop_assert!((efficiency(&scaled, 1).unwrap() - s.efficiency(1).unwrap()).abs() < 1e-10);
        }
    }
}
