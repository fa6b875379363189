//! Riesz-preconditioned gradient ascent on the penalized objective
//! `I_r = J_r - c1 * sum_i E(phi_i)`, with backtracking and the c1/c2
//! continuation schedules.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_elasticity, assemble_elasticity_fixed, dot, BoundaryFrame, ElasticParams, RieszSolver,
    SparseOperator,
};
use crate::mesh::{MorphingState, NodalField, TriangleMesh};
use crate::pod::Spectrum;

use super::checkpoint::Checkpoint;
use super::config::{LineSearch, OptimizerConfig, PenaltyKind};
use super::energy::{energy_linear, energy_neohookean, energy_neohookean_gradient};
use super::problem::{Evaluation, MorphingProblem};
use super::trace::{IterationRecord, OptimizerTrace};

/// Load vectors at or below this magnitude count as a stationary point.
pub const STATIONARY_TOL: f64 = 1e-12;
/// Drift beyond this fraction of the diameter triggers boundary projection.
pub const SAFEGUARD_DRIFT: f64 = 1e-3;

/// Displacements `phi_i - Id` on a common reference mesh.
#[derive(Debug, Clone)]
pub struct MorphingFamily {
    pub reference: Arc<TriangleMesh>,
    pub displacements: Vec<NodalField>,
}

impl MorphingFamily {
    pub fn identity(reference: Arc<TriangleMesh>, n: usize) -> Self {
        let displacements = vec![NodalField::zeros(reference.n_nodes(), 2); n];
        Self {
            reference,
            displacements,
        }
    }

    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacements.is_empty()
    }

    /// Morphing `i` as a state whose target is `target`.
    pub fn state(&self, i: usize, target: Arc<TriangleMesh>) -> MorphingState {
        MorphingState {
            reference: self.reference.clone(),
            displacement: self.displacements[i].clone(),
            target,
        }
    }

    /// Number of inverted elements in each morphing.
    pub fn inverted_counts(&self) -> Vec<usize> {
        self.displacements
            .iter()
            .map(|d| inverted_count(&self.reference, d))
            .collect()
    }
}

fn inverted_count(mesh: &TriangleMesh, d: &NodalField) -> usize {
    (0..mesh.n_triangles())
        .filter(|&t| deformed_area(mesh, d, t) <= 0.0)
        .count()
}

fn deformed_area(mesh: &TriangleMesh, d: &NodalField, t: usize) -> f64 {
    let tri = mesh.triangles()[t];
    let p = tri.map(|a| {
        let x = mesh.nodes()[a];
        let u = d.vector(a);
        [x[0] + u[0], x[1] + u[1]]
    });
    crate::mesh::triangle_area(p[0], p[1], p[2])
}

fn min_area(mesh: &TriangleMesh, d: &NodalField) -> f64 {
    (0..mesh.n_triangles())
        .map(|t| deformed_area(mesh, d, t))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    /// `1 - J_r < rel_tol` with every schedule finished.
    Converged,
    /// The sensitivities vanished, or no step size could improve the objective.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Accepted(f64),
    Stationary,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub family: MorphingFamily,
    pub trace: OptimizerTrace,
    pub initial_j: f64,
    /// Efficiency of the unsmoothed fields at the final morphings.
    pub final_j: f64,
    pub spectrum: Spectrum,
    pub stop: StopReason,
    pub c1: f64,
}

/// Ascent state. Create with [`Optimizer::new`], then call [`Optimizer::run`]
/// or drive it one [`Optimizer::step`] at a time.
pub struct Optimizer {
    problem: MorphingProblem,
    config: OptimizerConfig,
    fast_path: bool,
    /// Factorized operator shared by every snapshot when the domain is fixed.
    fixed: Option<RieszSolver>,
    /// Unpenalized elasticity form for the linear energy off the fast path.
    elastic_form: Option<SparseOperator>,
    displacements: Vec<NodalField>,
    eval: Evaluation,
    energies: Vec<f64>,
    c1: f64,
    next_event_c1: bool,
    iteration: usize,
    trace: OptimizerTrace,
    initial_j: f64,
    checkpoint_dir: Option<PathBuf>,
}

impl Optimizer {
    pub fn new(
        problem: MorphingProblem,
        config: OptimizerConfig,
        initial: Vec<NodalField>,
    ) -> Result<Self> {
        Self::build(problem, config, initial, None)
    }

    /// Continues a run from a checkpoint written by an earlier [`Optimizer`].
    pub fn resume(problem: MorphingProblem, checkpoint: Checkpoint) -> Result<Self> {
        let Checkpoint {
            config,
            iteration,
            c1,
            c2,
            next_event_c1,
            trace,
            initial_j,
            displacements,
        } = checkpoint;
        let mut opt = Self::build(problem, config, displacements, Some(c2))?;
        opt.iteration = iteration;
        opt.c1 = c1;
        opt.next_event_c1 = next_event_c1;
        opt.trace = trace;
        opt.initial_j = initial_j;
        opt.energies = opt.energies_of(&opt.displacements)?;
        Ok(opt)
    }

    fn build(
        mut problem: MorphingProblem,
        config: OptimizerConfig,
        initial: Vec<NodalField>,
        c2: Option<Option<f64>>,
    ) -> Result<Self> {
        config.validate()?;
        if config.r > problem.len() {
            return Err(Error::ModeCount {
                r: config.r,
                n: problem.len(),
            });
        }
        let mesh = problem.reference().clone();
        let fixed_domain = problem.shared_domain() && mesh.is_polytopal();
        if config.polytopal_fast_path && !fixed_domain {
            return Err(Error::InvalidParameter(
                "polytopal_fast_path needs every snapshot on the (polytopal) reference domain"
                    .into(),
            ));
        }
        let guard = matches!(config.line_search, LineSearch::Backtracking { .. });
        if guard {
            let bad: usize = initial.iter().map(|d| inverted_count(&mesh, d)).sum();
            if bad > 0 {
                return Err(Error::Inverted { count: bad });
            }
        }
        let initial_c2 = match c2 {
            Some(c2) => c2,
            None if config.continuation_c2.enabled => Some(config.continuation_c2.start),
            None => None,
        };
        let initial_j = problem.evaluate(&initial, None)?.efficiency(config.r)?;
        problem.set_smoothing(initial_c2)?;
        let eval = problem.evaluate(&initial, None)?;

        let mut trace = OptimizerTrace::default();
        let fixed = if fixed_domain {
            let a = assemble_elasticity_fixed(&mesh, &config.elastic, true)?;
            trace.assemblies += 1;
            Some(RieszSolver::new(&mesh, &config.elastic, a, config.solver)?)
        } else {
            None
        };
        let elastic_form = if config.penalty == PenaltyKind::Linear && !config.polytopal_fast_path {
            let params = ElasticParams {
                penalty_alpha: 0.0,
                ..config.elastic
            };
            Some(assemble_elasticity(
                &mesh,
                &params,
                &BoundaryFrame::reference(&mesh),
            )?)
        } else {
            None
        };
        let mut opt = Self {
            fast_path: config.polytopal_fast_path,
            c1: config.c1,
            problem,
            fixed,
            elastic_form,
            displacements: initial,
            eval,
            energies: Vec::new(),
            next_event_c1: true,
            iteration: 0,
            trace,
            initial_j,
            checkpoint_dir: None,
            config,
        };
        opt.energies = opt.energies_of(&opt.displacements)?;
        Ok(opt)
    }

    /// Writes a checkpoint into `dir` every `checkpoint_interval` iterations.
    pub fn with_checkpoints(mut self, dir: impl AsRef<Path>) -> Self {
        self.checkpoint_dir = Some(dir.as_ref().to_path_buf());
        self
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> Option<f64> {
        self.problem.c2()
    }

    pub fn displacements(&self) -> &[NodalField] {
        &self.displacements
    }

    pub fn trace(&self) -> &OptimizerTrace {
        &self.trace
    }

    pub fn evaluation(&self) -> &Evaluation {
        &self.eval
    }

    pub fn problem(&self) -> &MorphingProblem {
        &self.problem
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Current `J_r` of the objective being ascended.
    pub fn objective_j(&self) -> Result<f64> {
        self.eval.efficiency(self.config.r)
    }

    /// Current `I_r = J_r - c1 sum E`.
    pub fn objective_i(&self) -> Result<f64> {
        Ok(self.objective_j()? - self.c1 * self.energies.iter().sum::<f64>())
    }

    /// Form defining the linear energy: penalized on the fast path, pure
    /// elasticity otherwise.
    fn linear_form(&self) -> Option<&SparseOperator> {
        if self.fast_path {
            self.fixed.as_ref().map(|s| s.form())
        } else {
            self.elastic_form.as_ref()
        }
    }

    fn energies_of(&self, displacements: &[NodalField]) -> Result<Vec<f64>> {
        let mesh = self.problem.reference();
        Ok(match self.config.penalty {
            PenaltyKind::None => vec![0.0; displacements.len()],
            PenaltyKind::Linear => {
                let form = self
                    .linear_form()
                    .ok_or_else(|| Error::Numerical("linear penalty form missing".into()))?;
                displacements
                    .iter()
                    .map(|d| energy_linear(form, d))
                    .collect()
            }
            PenaltyKind::NeoHookean => displacements
                .par_iter()
                .map(|d| energy_neohookean(mesh, d, &self.config.neo_hookean))
                .collect(),
        })
    }

    fn penalty_gradient(&self, d: &NodalField) -> Result<Option<Vec<f64>>> {
        if self.c1 == 0.0 {
            return Ok(None);
        }
        Ok(match self.config.penalty {
            PenaltyKind::None => None,
            PenaltyKind::Linear => self.linear_form().map(|f| f.apply(d.values())),
            PenaltyKind::NeoHookean => Some(energy_neohookean_gradient(
                self.problem.reference(),
                d,
                &self.config.neo_hookean,
            )?),
        })
    }

    fn deformed_solver(&self, d: &NodalField) -> Result<RieszSolver> {
        let mesh = self.problem.reference();
        let positions: Vec<_> = mesh
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let u = d.vector(k);
                [p[0] + u[0], p[1] + u[1]]
            })
            .collect();
        let frame = BoundaryFrame::from_positions(mesh, &positions);
        let a = assemble_elasticity(mesh, &self.config.elastic, &frame)?;
        RieszSolver::new(mesh, &self.config.elastic, a, self.config.solver)
    }

    /// Ascent directions for every morphing and the directional derivative
    /// of `I_r` along them. `None` at a stationary point.
    fn directions(&mut self) -> Result<Option<(Vec<Vec<f64>>, f64)>> {
        let loads = self.eval.sensitivity_loads(&self.problem, self.config.r)?;
        let max_load = loads
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if max_load <= STATIONARY_TOL {
            return Ok(None);
        }
        let this = &*self;
        let out: Vec<(Vec<f64>, f64, f64)> = (0..loads.len())
            .into_par_iter()
            .map(|i| this.direction(i, &loads[i]))
            .collect::<Result<_>>()?;
        if self.fixed.is_none() {
            self.trace.assemblies += loads.len();
        }
        let mut slope = 0.0;
        let mut dirs = Vec::with_capacity(out.len());
        for (w, s, ratio) in out {
            slope += s;
            self.trace.max_direction_normal_ratio =
                self.trace.max_direction_normal_ratio.max(ratio);
            dirs.push(w);
        }
        Ok(Some((dirs, slope)))
    }

    fn direction(&self, i: usize, load: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
        let owned;
        let solver = match &self.fixed {
            Some(s) => s,
            None => {
                owned = self.deformed_solver(&self.displacements[i])?;
                &owned
            }
        };
        let d = self.displacements[i].values();
        let (w, rhs_dot_w, u) = if self.fast_path {
            let u = solver.solve(load)?;
            check_ascent(load, &u)?;
            let w: Vec<f64> = u.iter().zip(d).map(|(u, d)| u - self.c1 * d).collect();
            let ad = solver.form().apply(d);
            let slope = dot(load, &w) - self.c1 * dot(&ad, &w);
            (w, slope, u)
        } else {
            let mut rhs = load.to_vec();
            if let Some(g) = self.penalty_gradient(&self.displacements[i])? {
                for (r, g) in rhs.iter_mut().zip(&g) {
                    *r -= self.c1 * g;
                }
            }
            let w = solver.solve(&rhs)?;
            check_ascent(&rhs, &w)?;
            let slope = dot(&rhs, &w);
            (w.clone(), slope, w)
        };
        Ok((
            w,
            rhs_dot_w,
            normal_ratio(
                self.problem.reference(),
                &self.displacements[i],
                &u,
                self.fixed.is_some(),
            ),
        ))
    }

    /// One ascent iteration: direction, line search, safeguards, continuation.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let Some((dirs, slope)) = self.directions()? else {
            return Ok(StepOutcome::Stationary);
        };
        let r = self.config.r;
        let i_cur = self.objective_i()?;
        let j_cur = self.objective_j()?;
        let (max_halvings, guard) = match self.config.line_search {
            LineSearch::Backtracking { max_halvings } => (max_halvings, true),
            LineSearch::Fixed => (0, false),
        };
        let mesh = self.problem.reference().clone();
        let mut eps = self.config.step;
        let mut accepted = None;
        for _ in 0..=max_halvings {
            let trial: Vec<NodalField> = self
                .displacements
                .iter()
                .zip(&dirs)
                .map(|(d, w)| {
                    let v = d.values().iter().zip(w).map(|(d, w)| d + eps * w).collect();
                    NodalField::new(2, v)
                })
                .collect::<Result<_>>()?;
            if guard && trial.par_iter().any(|d| min_area(&mesh, d) <= 0.0) {
                eps *= 0.5;
                continue;
            }
            let eval = self
                .problem
                .evaluate(&trial, Some(&self.eval.samples.hints))?;
            let energies = self.energies_of(&trial)?;
            let i_new = eval.efficiency(r)? - self.c1 * energies.iter().sum::<f64>();
            if !guard || i_new >= i_cur {
                accepted = Some((trial, eval, energies));
                break;
            }
            eps *= 0.5;
        }
        let Some((trial, eval, energies)) = accepted else {
            // The smallest step tried would gain less than rounding noise.
            let smallest = self.config.step * 0.5f64.powi(max_halvings as i32);
            if slope * smallest <= 1e-12 * i_cur.abs().max(1.0) {
                return Ok(StepOutcome::Stationary);
            }
            return Err(Error::BacktrackingExhausted {
                iteration: self.iteration + 1,
                attempts: max_halvings,
                trace: Box::new(self.trace.clone()),
            });
        };
        self.displacements = trial;
        self.eval = eval;
        self.energies = energies;
        self.iteration += 1;

        let drift = self.safeguard()?;
        let j_new = self.objective_j()?;
        let min_a = self
            .displacements
            .par_iter()
            .map(|d| min_area(&mesh, d))
            .reduce(|| f64::INFINITY, f64::min);
        self.trace.push(IterationRecord {
            iter: self.iteration,
            j: j_new,
            i: self.objective_i()?,
            c1: self.c1,
            c2: self.problem.c2().unwrap_or(0.0),
            min_area: min_a,
            max_normal_violation: drift,
            step: eps,
        });
        log::debug!(
            "iter {} J = {:.12} 1-J = {:.3e} c1 = {:.3e} step = {}",
            self.iteration,
            j_new,
            1.0 - j_new,
            self.c1,
            eps
        );
        if ((j_new - j_cur) / j_new).abs() < self.event_trigger() {
            self.continuation_event()?;
        }
        if let Some(dir) = &self.checkpoint_dir {
            let k = self.config.checkpoint_interval;
            if k > 0 && self.iteration.is_multiple_of(k) {
                self.checkpoint().write(dir)?;
            }
        }
        Ok(StepOutcome::Accepted(eps))
    }

    /// Projects drifted boundary nodes back onto their targets. Returns the
    /// largest boundary drift after any projection.
    fn safeguard(&mut self) -> Result<f64> {
        let mesh = self.problem.reference().clone();
        let tol = SAFEGUARD_DRIFT * mesh.diameter();
        let targets: Vec<Arc<TriangleMesh>> = self
            .problem
            .snapshots()
            .iter()
            .map(|s| s.mesh.clone())
            .collect();
        let results: Vec<(f64, Option<NodalField>)> = self
            .displacements
            .par_iter()
            .zip(&targets)
            .map(|(d, target)| {
                let mut state = MorphingState {
                    reference: mesh.clone(),
                    displacement: d.clone(),
                    target: target.clone(),
                };
                let drift = state.max_boundary_drift();
                if drift <= tol {
                    return (drift, None);
                }
                state.project_boundary(1e-12 * mesh.diameter());
                if state.is_bijective() || inverted_count(&mesh, d) > 0 {
                    (state.max_boundary_drift(), Some(state.displacement))
                } else {
                    log::warn!("boundary projection would invert elements; skipped");
                    (drift, None)
                }
            })
            .collect();
        let mut moved = false;
        let mut worst = 0.0f64;
        for (i, (drift, new)) in results.into_iter().enumerate() {
            worst = worst.max(drift);
            if let Some(d) = new {
                self.displacements[i] = d;
                moved = true;
            }
        }
        if moved {
            log::info!(
                "projected drifted boundary nodes at iteration {}",
                self.iteration
            );
            self.eval = self
                .problem
                .evaluate(&self.displacements, Some(&self.eval.samples.hints))?;
            self.energies = self.energies_of(&self.displacements)?;
        }
        Ok(worst)
    }

    fn c1_moving(&self) -> bool {
        let c = &self.config.continuation_c1;
        c.enabled && self.c1 >= c.min_c1
    }

    fn c2_moving(&self) -> bool {
        self.config.continuation_c2.enabled && self.problem.c2().is_some()
    }

    /// True when no continuation schedule will change the objective again.
    pub fn schedules_settled(&self) -> bool {
        !self.c1_moving() && !self.c2_moving()
    }

    fn event_moves_c1(&self) -> Option<bool> {
        match (self.c1_moving(), self.c2_moving()) {
            (true, true) => Some(self.next_event_c1),
            (true, false) => Some(true),
            (false, true) => Some(false),
            (false, false) => None,
        }
    }

    fn event_trigger(&self) -> f64 {
        match self.event_moves_c1() {
            Some(true) => self.config.continuation_c1.trigger,
            Some(false) => self.config.continuation_c2.trigger,
            None => 0.0,
        }
    }

    fn continuation_event(&mut self) -> Result<()> {
        let Some(move_c1) = self.event_moves_c1() else {
            return Ok(());
        };
        if move_c1 {
            self.c1 *= self.config.continuation_c1.factor;
            log::info!("iteration {}: c1 -> {:e}", self.iteration, self.c1);
        } else {
            let c = &self.config.continuation_c2;
            let next = self
                .problem
                .c2()
                .map(|v| v * c.growth)
                .filter(|&v| v <= c.max_c2);
            self.problem.set_smoothing(next)?;
            self.eval = self
                .problem
                .evaluate(&self.displacements, Some(&self.eval.samples.hints))?;
            log::info!("iteration {}: c2 -> {:?}", self.iteration, next);
        }
        self.next_event_c1 = !move_c1;
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            iteration: self.iteration,
            c1: self.c1,
            c2: self.problem.c2(),
            next_event_c1: self.next_event_c1,
            trace: self.trace.clone(),
            initial_j: self.initial_j,
            displacements: self.displacements.clone(),
        }
    }

    /// Iterates until `max_iters`, convergence or a stationary point.
    pub fn run(mut self) -> Result<OptimizeResult> {
        let stop = loop {
            if self.iteration >= self.config.max_iters {
                break StopReason::MaxIterations;
            }
            if self.schedules_settled() && 1.0 - self.objective_j()? < self.config.rel_tol {
                break StopReason::Converged;
            }
            match self.step()? {
                StepOutcome::Accepted(_) => {}
                StepOutcome::Stationary if !self.schedules_settled() => {
                    // Nothing left to gain at these parameters: move a schedule.
                    self.continuation_event()?;
                }
                StepOutcome::Stationary => break StopReason::Stationary,
            }
        };
        if let Some(dir) = &self.checkpoint_dir {
            self.checkpoint().write(dir)?;
        }
        let raw = self.problem.with_smoothing(None)?;
        let final_eval = raw.evaluate(&self.displacements, Some(&self.eval.samples.hints))?;
        Ok(OptimizeResult {
            final_j: final_eval.efficiency(self.config.r)?,
            spectrum: final_eval.spectrum,
            family: MorphingFamily {
                reference: self.problem.reference().clone(),
                displacements: self.displacements,
            },
            trace: self.trace,
            initial_j: self.initial_j,
            stop,
            c1: self.c1,
        })
    }
}

/// Runs the ascent from `initial` (identity morphings when `None`).
pub fn optimize(
    problem: MorphingProblem,
    config: OptimizerConfig,
    initial: Option<Vec<NodalField>>,
) -> Result<OptimizeResult> {
    let n = problem.len();
    let initial =
        initial.unwrap_or_else(|| vec![NodalField::zeros(problem.reference().n_nodes(), 2); n]);
    Optimizer::new(problem, config, initial)?.run()
}

/// `a(u, u) = <rhs, u>` must be nonnegative for a Riesz representative.
fn check_ascent(rhs: &[f64], u: &[f64]) -> Result<()> {
    let s = dot(rhs, u);
    let scale = crate::fem::norm(rhs) * crate::fem::norm(u);
    if s < -1e-10 * scale {
        return Err(Error::Numerical(format!(
            "Riesz direction is not an ascent direction: <f, u> = {s:e}"
        )));
    }
    Ok(())
}

/// Largest `|u . n|` over boundary edge end nodes relative to `max |u|`.
/// Normals are taken on the reference boundary for a fixed domain and on
/// the deformed boundary otherwise.
fn normal_ratio(mesh: &TriangleMesh, d: &NodalField, u: &[f64], fixed: bool) -> f64 {
    let max = u.chunks(2).map(|v| v[0].hypot(v[1])).fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let frame = if fixed {
        BoundaryFrame::reference(mesh)
    } else {
        let pos: Vec<_> = mesh
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let v = d.vector(k);
                [p[0] + v[0], p[1] + v[1]]
            })
            .collect();
        BoundaryFrame::from_positions(mesh, &pos)
    };
    let mut worst = 0.0f64;
    for (be, n) in mesh.boundary_edges().iter().zip(&frame.normals) {
        for &k in &be.nodes {
            worst = worst.max((u[2 * k] * n[0] + u[2 * k + 1] * n[1]).abs());
        }
    }
    worst / max
}
