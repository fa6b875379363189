//! O-MMGP surrogate: geometric morphings onto each training domain, optimal
//! morphings on the reference domain, three PODs and two Gaussian-process
//! regressors from parameters to reduced coordinates.

mod gp;
mod rbf;

pub use gp::{
    log_marginal_likelihood, GpConfig, GpCoordinate, GpHyper, GpModel, GpModelData, Standardizer,
};
pub use rbf::{rbf_geometric_morphing, GeometricMorphing, MorphMethod, ThinPlateSpline};

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, l2_inner_product, SparseOperator};
use crate::mesh::io::{read_field, read_mesh, write_field, write_mesh};
use crate::mesh::{MorphingState, NodalField, Point, PointLocator, TriangleMesh};
use crate::optim::{optimize, MorphingProblem, OptimizeResult, OptimizerConfig, Snapshot};
use crate::pod::{pod, SnapshotFamily, Spectrum};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;
pub const BUNDLE_FILE: &str = "bundle.json";
const REFERENCE_FILE: &str = "reference.morphmesh";

/// Points located farther than this (relative to the diameter) outside the
/// composed mesh are reported as failures rather than clamped.
pub const CLAMP_TOL: f64 = 1e-2;

/// Number of POD modes kept: the fewest reaching `energy`, at most `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSelection {
    pub energy: f64,
    pub max: usize,
}

impl Default for ModeSelection {
    fn default() -> Self {
        Self {
            energy: 0.999,
            max: 32,
        }
    }
}

impl ModeSelection {
    pub fn fixed(count: usize) -> Self {
        Self {
            energy: 1.0,
            max: count,
        }
    }

    fn count(&self, spectrum: &Spectrum) -> usize {
        let rank = spectrum.rank();
        let cap = self.max.min(rank);
        (1..=cap)
            .find(|&k| spectrum.efficiency(k).is_ok_and(|j| j >= self.energy))
            .unwrap_or(cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub n_geo: ModeSelection,
    pub n_opt: ModeSelection,
    /// Field modes; also the `r` whose efficiency the optimizer maximizes.
    pub r: usize,
    pub optimizer: OptimizerConfig,
    pub gp: GpConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_geo: ModeSelection::default(),
            n_opt: ModeSelection::default(),
            r: 1,
            optimizer: OptimizerConfig::default(),
            gp: GpConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidParameter("r must be at least 1".into()));
        }
        for (name, s) in [("n_geo", &self.n_geo), ("n_opt", &self.n_opt)] {
            if !(s.energy > 0.0 && s.energy <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name}.energy must lie in (0, 1], got {}",
                    s.energy
                )));
            }
        }
        self.optimizer.validate()
    }
}

/// One training triplet: geometry, parameters and the field on that geometry.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub mesh: Arc<TriangleMesh>,
    pub params: Vec<f64>,
    pub field: NodalField,
}

/// Orthonormal POD modes with their spectrum.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    pub modes: Vec<NodalField>,
    /// Full spectrum of the snapshot correlation matrix.
    pub eigenvalues: Vec<f64>,
    mass: SparseOperator,
}

impl ReducedBasis {
    fn empty(mesh: &TriangleMesh, components: usize) -> Self {
        Self {
            modes: Vec::new(),
            eigenvalues: Vec::new(),
            mass: assemble_mass(mesh, components),
        }
    }

    /// POD of `fields` keeping the modes chosen by `select`.
    pub fn build(
        mesh: &Arc<TriangleMesh>,
        fields: Vec<NodalField>,
        select: ModeSelection,
    ) -> Result<Self> {
        let Some(first) = fields.first() else {
            return Err(Error::InvalidParameter("no fields to decompose".into()));
        };
        let components = first.components();
        if fields.iter().all(|f| f.max_abs() == 0.0) {
            return Ok(Self::empty(mesh, components));
        }
        let family = SnapshotFamily::new(mesh.clone(), fields)?;
        let n = family.len();
        let full = pod(&family, n)?;
        let k = select.count(&full.spectrum).min(full.modes.len());
        Ok(Self {
            modes: full.modes[..k].to_vec(),
            eigenvalues: full.spectrum.eigenvalues.clone(),
            mass: family.mass().clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Captured energy fraction of the kept modes.
    pub fn energy(&self) -> f64 {
        let tr: f64 = self.eigenvalues.iter().sum();
        if tr > 0.0 {
            self.eigenvalues[..self.len()].iter().sum::<f64>() / tr
        } else {
            1.0
        }
    }

    pub fn project(&self, f: &NodalField) -> Vec<f64> {
        let mf = self.mass.apply(f.values());
        self.modes
            .iter()
            .map(|m| crate::fem::dot(m.values(), &mf))
            .collect()
    }

    /// `sum_j c_j mode_j`; zero when there are no modes.
    pub fn reconstruct(
        &self,
        coeffs: &[f64],
        n_nodes: usize,
        components: usize,
    ) -> Result<NodalField> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let mut out = NodalField::zeros(n_nodes, components);
        for (m, &c) in self.modes.iter().zip(coeffs) {
            out.axpy(c, m);
        }
        Ok(out)
    }
}

/// Everything needed to predict a field on a new geometry.
#[derive(Debug, Clone)]
pub struct SurrogateBundle {
    pub reference: Arc<TriangleMesh>,
    pub n_params: usize,
    pub geo: ReducedBasis,
    pub opt: ReducedBasis,
    pub field: ReducedBasis,
    /// `(mu, alpha) -> beta`.
    pub model_r: GpModel,
    /// `(mu, alpha) -> gamma`.
    pub model_o: GpModel,
}

/// By-products of training, for diagnostics and consistency checks.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub optimization: OptimizeResult,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    /// Relative `L^2` error of each training field rebuilt from its exact
    /// reduced coordinates, on its own mesh.
    pub reconstruction_errors: Vec<f64>,
}

fn same_geometry(a: &TriangleMesh, b: &TriangleMesh) -> bool {
    a.nodes() == b.nodes() && a.triangles() == b.triangles()
}

fn geometric_morphing(
    reference: &Arc<TriangleMesh>,
    target: &TriangleMesh,
) -> Result<GeometricMorphing> {
    if same_geometry(reference, target) {
        Ok(GeometricMorphing::identity(reference.clone()))
    } else {
        GeometricMorphing::to_mesh(reference.clone(), target)
    }
}

/// `phi_geo(x)` for a point `x` of the reference domain.
fn apply_geo(
    geo: &GeometricMorphing,
    locator: &PointLocator,
    x: Point,
    hint: Option<usize>,
) -> (Point, usize) {
    if geo.method == MorphMethod::Identity {
        return (x, hint.unwrap_or(0));
    }
    let loc = locator.locate(x, hint);
    let mut d = [0.0; 2];
    locator.eval(&geo.displacement, &loc, &mut d);
    ([x[0] + d[0], x[1] + d[1]], loc.triangle)
}

/// `u o phi_geo o phi_opt` at every reference node, `u` living on `mesh`.
fn pull_back(
    reference: &Arc<TriangleMesh>,
    geo: &GeometricMorphing,
    opt: Option<&NodalField>,
    mesh: &TriangleMesh,
    u: &NodalField,
) -> Result<NodalField> {
    if opt.is_none() && geo.method == MorphMethod::Identity && same_geometry(reference, mesh) {
        return Ok(u.clone());
    }
    let ref_loc = PointLocator::new(reference);
    let target = PointLocator::new(mesh);
    let mut hint_ref = None;
    let mut hint_t = None;
    let mut out = Vec::with_capacity(reference.n_nodes());
    for (k, x) in reference.nodes().iter().enumerate() {
        let p = match opt {
            Some(d) => {
                let v = d.vector(k);
                [x[0] + v[0], x[1] + v[1]]
            }
            None => *x,
        };
        let (q, t) = apply_geo(geo, &ref_loc, p, hint_ref);
        hint_ref = Some(t);
        let loc = target.locate(q, hint_t);
        hint_t = Some(loc.triangle);
        let mut v = [0.0];
        target.eval(u, &loc, &mut v);
        out.push(v[0]);
    }
    NodalField::scalar(out)
}

fn inputs(params: &[f64], alpha: &[f64]) -> Vec<f64> {
    params.iter().chain(alpha).copied().collect()
}

/// Trains a surrogate on samples sharing the reference connectivity.
pub fn train(
    reference: Arc<TriangleMesh>,
    samples: &[TrainSample],
    config: &TrainConfig,
) -> Result<(SurrogateBundle, TrainReport)> {
    config.validate()?;
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no training samples".into()));
    }
    if config.r > n {
        return Err(Error::ModeCount { r: config.r, n });
    }
    let n_params = samples[0].params.len();
    for s in samples {
        if s.params.len() != n_params {
            return Err(Error::DimensionMismatch {
                expected: n_params,
                got: s.params.len(),
            });
        }
        if s.mesh.triangles() != reference.triangles() {
            return Err(Error::MeshMismatch(
                "training geometries must share the reference connectivity".into(),
            ));
        }
        s.mesh.check_field(&s.field, 1)?;
    }

    // Geometric morphings and their POD.
    let geos = samples
        .par_iter()
        .map(|s| geometric_morphing(&reference, &s.mesh))
        .collect::<Result<Vec<_>>>()?;
    let geo = ReducedBasis::build(
        &reference,
        geos.iter().map(|g| g.displacement.clone()).collect(),
        config.n_geo,
    )?;
    let alpha: Vec<Vec<f64>> = geos.iter().map(|g| geo.project(&g.displacement)).collect();
    log::info!("geometric POD keeps {} modes", geo.len());

    // Optimal morphings of the fields pulled back to the reference.
    let pulled = samples
        .par_iter()
        .zip(&geos)
        .map(|(s, g)| pull_back(&reference, g, None, &s.mesh, &s.field))
        .collect::<Result<Vec<_>>>()?;
    let snapshots = pulled
        .into_iter()
        .map(|f| Snapshot::new(reference.clone(), f))
        .collect::<Result<Vec<_>>>()?;
    let problem = MorphingProblem::new(reference.clone(), snapshots)?;
    let opt_config = OptimizerConfig {
        r: config.r,
        ..config.optimizer.clone()
    };
    let optimization = optimize(problem, opt_config, None)?;
    log::info!(
        "optimal morphings: J_{} {:.6} -> {:.6}",
        config.r,
        optimization.initial_j,
        optimization.final_j
    );
    let inverted: usize = optimization.family.inverted_counts().iter().sum();
    if inverted > 0 {
        log::warn!("{inverted} inverted elements among the optimal morphings");
    }
    let displacements = &optimization.family.displacements;
    let opt = ReducedBasis::build(&reference, displacements.clone(), config.n_opt)?;
    let beta: Vec<Vec<f64>> = displacements.iter().map(|d| opt.project(d)).collect();
    log::info!("optimal-morphing POD keeps {} modes", opt.len());

    // Fields in the optimal configuration.
    let morphed = samples
        .par_iter()
        .zip(&geos)
        .zip(displacements)
        .map(|((s, g), d)| pull_back(&reference, g, Some(d), &s.mesh, &s.field))
        .collect::<Result<Vec<_>>>()?;
    let field = ReducedBasis::build(&reference, morphed.clone(), ModeSelection::fixed(config.r))?;
    let gamma: Vec<Vec<f64>> = morphed.iter().map(|f| field.project(f)).collect();
    log::info!("field POD captures {:.6} of the energy", field.energy());

    let x: Vec<Vec<f64>> = samples
        .iter()
        .zip(&alpha)
        .map(|(s, a)| inputs(&s.params, a))
        .collect();
    let model_r = GpModel::fit(&x, &beta, &config.gp)?;
    let model_o = GpModel::fit(&x, &gamma, &config.gp)?;
    let bundle = SurrogateBundle {
        reference,
        n_params,
        geo,
        opt,
        field,
        model_r,
        model_o,
    };

    let reconstruction_errors = samples
        .par_iter()
        .zip(&geos)
        .zip(beta.par_iter().zip(&gamma))
        .map(|((s, g), (b, c))| {
            let rec = bundle.compose(g, b, c, &s.mesh)?;
            relative_l2_error(&s.mesh, &rec.field, &s.field)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        bundle,
        TrainReport {
            optimization,
            alpha,
            beta,
            gamma,
            reconstruction_errors,
        },
    ))
}

/// A predicted field and the reduced coordinates behind it.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub field: NodalField,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Nodes of the target mesh that fell (slightly) outside the composed mesh.
    pub clamped: usize,
    /// Inverted elements of the composed morphing.
    pub inverted: usize,
}

impl SurrogateBundle {
    /// Field on `target` from explicit reduced coordinates `beta`, `gamma`.
    pub fn compose(
        &self,
        geo: &GeometricMorphing,
        beta: &[f64],
        gamma: &[f64],
        target: &TriangleMesh,
    ) -> Result<Prediction> {
        let mesh = &self.reference;
        let nn = mesh.n_nodes();
        let d_opt = self.opt.reconstruct(beta, nn, 2)?;
        let u_opt = self.field.reconstruct(gamma, nn, 1)?;
        let ref_loc = PointLocator::new(mesh);
        let mut hint = None;
        let mut positions = Vec::with_capacity(nn);
        for (k, x) in mesh.nodes().iter().enumerate() {
            let v = d_opt.vector(k);
            let (q, t) = apply_geo(geo, &ref_loc, [x[0] + v[0], x[1] + v[1]], hint);
            hint = Some(t);
            positions.push(q);
        }
        let composed = mesh.with_positions(positions)?;
        let inverted = MorphingState {
            reference: mesh.clone(),
            displacement: displacement_to(mesh, composed.nodes())?,
            target: mesh.clone(),
        }
        .detect_inverted()
        .len();
        if inverted > 0 {
            log::warn!("composed morphing inverts {inverted} elements; evaluation is clamped");
        }
        let locator = PointLocator::new(&composed);
        let tol = CLAMP_TOL * composed.diameter();
        let mut hint = None;
        let mut clamped = 0;
        let mut out = Vec::with_capacity(target.n_nodes());
        for y in target.nodes() {
            let loc = locator.locate(*y, hint);
            hint = Some(loc.triangle);
            if loc.clamped {
                clamped += 1;
                let dist = composed.distance_to_boundary(*y);
                if dist > tol {
                    return Err(Error::Numerical(format!(
                        "point ({}, {}) lies {dist:e} outside the composed mesh",
                        y[0], y[1]
                    )));
                }
            }
            let mut v = [0.0];
            locator.eval(&u_opt, &loc, &mut v);
            out.push(v[0]);
        }
        Ok(Prediction {
            field: NodalField::scalar(out)?,
            alpha: Vec::new(),
            beta: beta.to_vec(),
            gamma: gamma.to_vec(),
            clamped,
            inverted,
        })
    }

    /// Predicts the field on `target` (reference connectivity) for `params`.
    pub fn predict(&self, target: &TriangleMesh, params: &[f64]) -> Result<Prediction> {
        if params.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                expected: self.n_params,
                got: params.len(),
            });
        }
        if target.triangles() != self.reference.triangles() {
            return Err(Error::MeshMismatch(
                "prediction geometry must share the reference connectivity".into(),
            ));
        }
        let geo = geometric_morphing(&self.reference, target)?;
        let alpha = self.geo.project(&geo.displacement);
        let x = inputs(params, &alpha);
        let beta = self.model_r.predict(&x)?;
        let gamma = self.model_o.predict(&x)?;
        let mut p = self.compose(&geo, &beta, &gamma, target)?;
        p.alpha = alpha;
        Ok(p)
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_mesh(dir.join(REFERENCE_FILE), &self.reference)?;
        let mut files = BundleFiles::default();
        for (tag, basis, list) in [
            ("geo", &self.geo, &mut files.geo_modes),
            ("opt", &self.opt, &mut files.opt_modes),
            ("field", &self.field, &mut files.field_modes),
        ] {
            for (k, m) in basis.modes.iter().enumerate() {
                let name = format!("{tag}_mode_{k:04}.field");
                write_field(dir.join(&name), &format!("{tag}_{k}"), m)?;
                list.push(name);
            }
        }
        let doc = BundleDocument {
            schema_version: BUNDLE_SCHEMA_VERSION,
            reference: REFERENCE_FILE.into(),
            n_params: self.n_params,
            geo_eigenvalues: self.geo.eigenvalues.clone(),
            opt_eigenvalues: self.opt.eigenvalues.clone(),
            field_eigenvalues: self.field.eigenvalues.clone(),
            files,
            model_r: self.model_r.to_data(),
            model_o: self.model_o.to_data(),
        };
        fs::write(dir.join(BUNDLE_FILE), serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join(BUNDLE_FILE))?;
        let doc: BundleDocument = serde_json::from_str(&text)?;
        if doc.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::Version(format!(
                "bundle schema {}",
                doc.schema_version
            )));
        }
        let (mesh, _) = read_mesh(dir.join(&doc.reference))?;
        let reference = Arc::new(mesh);
        let load = |names: &[String], eig: Vec<f64>, components: usize| -> Result<ReducedBasis> {
            let modes = names
                .iter()
                .map(|n| {
                    let (_, f) = read_field(dir.join(n))?;
                    reference.check_field(&f, components)?;
                    Ok(f)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ReducedBasis {
                modes,
                eigenvalues: eig,
                mass: assemble_mass(&reference, components),
            })
        };
        let geo = load(&doc.files.geo_modes, doc.geo_eigenvalues, 2)?;
        let opt = load(&doc.files.opt_modes, doc.opt_eigenvalues, 2)?;
        let field = load(&doc.files.field_modes, doc.field_eigenvalues, 1)?;
        let model_r = GpModel::from_data(&doc.model_r)?;
        let model_o = GpModel::from_data(&doc.model_o)?;
        if model_r.output_dim() != opt.len() || model_o.output_dim() != field.len() {
            return Err(Error::InvalidParameter(
                "bundle models do not match the stored modes".into(),
            ));
        }
        Ok(Self {
            reference,
            n_params: doc.n_params,
            geo,
            opt,
            field,
            model_r,
            model_o,
        })
    }
}

fn displacement_to(mesh: &TriangleMesh, positions: &[Point]) -> Result<NodalField> {
    let v = mesh
        .nodes()
        .iter()
        .zip(positions)
        .flat_map(|(x, y)| [y[0] - x[0], y[1] - x[1]])
        .collect();
    NodalField::new(2, v)
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFiles {
    geo_modes: Vec<String>,
    opt_modes: Vec<String>,
    field_modes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleDocument {
    schema_version: u32,
    reference: String,
    n_params: usize,
    geo_eigenvalues: Vec<f64>,
    opt_eigenvalues: Vec<f64>,
    field_eigenvalues: Vec<f64>,
    files: BundleFiles,
    model_r: GpModelData,
    model_o: GpModelData,
}

/// `||pred - truth|| / ||truth||` in `L^2(mesh)`.
pub fn relative_l2_error(
    mesh: &TriangleMesh,
    pred: &NodalField,
    truth: &NodalField,
) -> Result<f64> {
    let mut diff = pred.clone();
    diff.axpy(-1.0, truth);
    let num = l2_inner_product(mesh, &diff, &diff)?;
    let den = l2_inner_product(mesh, truth, truth)?;
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    /// Root mean square nodal error over every sample and node.
    pub rmse: f64,
    pub per_sample: Vec<f64>,
}

/// RMSE of predicted against true nodal values, pooled over samples.
pub fn rmse_report(predictions: &[NodalField], truths: &[NodalField]) -> Result<RmseReport> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut per_sample = Vec::with_capacity(truths.len());
    for (p, t) in predictions.iter().zip(truths) {
        if p.values().len() != t.values().len() {
            return Err(Error::DimensionMismatch {
                expected: t.values().len(),
                got: p.values().len(),
            });
        }
        let sq: f64 = p
            .values()
            .iter()
            .zip(t.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        per_sample.push((sq / t.values().len().max(1) as f64).sqrt());
        total += sq;
        count += t.values().len();
    }
    Ok(RmseReport {
        rmse: if count == 0 {
            0.0
        } else {
            (total / count as f64).sqrt()
        },
        per_sample,
    })
}

/// Leave-one-out evaluation: one surrogate per held-out sample.
#[derive(Debug, Clone)]
pub struct LooReport {
    pub predictions: Vec<NodalField>,
    pub relative_errors: Vec<f64>,
    pub mean_relative_error: f64,
    pub rmse: RmseReport,
}

pub fn leave_one_out(
    reference: Arc<TriangleMesh>,
    samples: &[TrainSample],
    config: &TrainConfig,
) -> Result<LooReport> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "leave-one-out needs at least two samples".into(),
        ));
    }
    let predictions = (0..samples.len())
        .map(|i| {
            let rest: Vec<TrainSample> = samples
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, s)| s.clone())
                .collect();
            let (bundle, _) = train(reference.clone(), &rest, config)?;
            let p = bundle.predict(&samples[i].mesh, &samples[i].params)?;
            log::info!("leave-one-out fold {i} done");
            Ok(p.field)
        })
        .collect::<Result<Vec<_>>>()?;
    let relative_errors = samples
        .iter()
        .zip(&predictions)
        .map(|(s, p)| relative_l2_error(&s.mesh, p, &s.field))
        .collect::<Result<Vec<_>>>()?;
    let truths: Vec<NodalField> = samples.iter().map(|s| s.field.clone()).collect();
    let rmse = rmse_report(&predictions, &truths)?;
    let mean_relative_error = relative_errors.iter().sum::<f64>() / relative_errors.len() as f64;
    Ok(LooReport {
        predictions,
        relative_errors,
        mean_relative_error,
        rmse,
    })
}
