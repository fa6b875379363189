//! Optimal morphings: sensitivities of the POD efficiency, penalty energies
//! and the Riesz-preconditioned ascent.

mod ascent;
mod checkpoint;
mod config;
mod energy;
mod problem;
mod trace;

pub use ascent::{
    optimize, MorphingFamily, OptimizeResult, Optimizer, StepOutcome, StopReason, SAFEGUARD_DRIFT,
    STATIONARY_TOL,
};
pub use checkpoint::{Checkpoint, CHECKPOINT_FILE, CHECKPOINT_VERSION};
pub use config::{
    C1Continuation, C2Continuation, LineSearch, NeoHookeanParams, OptimizerConfig, PenaltyKind,
};
pub use energy::{
    energy_linear, energy_linear_differential, energy_linear_gradient, energy_neohookean,
    energy_neohookean_differential, energy_neohookean_gradient, neohookean_density,
    state_energy_neohookean,
};
pub use problem::{multiscale_objective, Evaluation, MorphingProblem, Samples, Snapshot};
pub use trace::{IterationRecord, OptimizerTrace, TRACE_CSV_HEADER};
