use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{ElasticParams, SolverBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// `E = 1/2 a(phi - Id, phi - Id)`.
    #[default]
    Linear,
    /// Compressible Neo-Hookean energy with a logarithmic barrier at `det F = 0`.
    NeoHookean,
    None,
}

/// Lame constants of the Neo-Hookean penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeoHookeanParams {
    pub mu: f64,
    pub lambda: f64,
    /// Constant subtracted from `tr(F^T F)`; 2 makes the identity energy zero in 2D.
    pub trace_offset: f64,
}

impl Default for NeoHookeanParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.1,
            trace_offset: 2.0,
        }
    }
}

impl NeoHookeanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.lambda > 0.0) || !self.trace_offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Neo-Hookean constants must be positive, got mu = {}, lambda = {}",
                self.mu, self.lambda
            )));
        }
        Ok(())
    }
}

/// Halves `c1` whenever the objective stalls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct C1Continuation {
    pub enabled: bool,
    /// Event fires when `|J_m - J_{m-1}| / |J_m|` drops below this.
    pub trigger: f64,
    pub factor: f64,
    /// No further halving once `c1` is below this value.
    pub min_c1: f64,
}

impl Default for C1Continuation {
    fn default() -> Self {
        Self {
            enabled: false,
            trigger: 1e-4,
            factor: 0.5,
            min_c1: 1e-8,
        }
    }
}

/// Coarse-to-fine schedule on the smoothing parameter `c2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct C2Continuation {
    pub enabled: bool,
    pub start: f64,
    pub growth: f64,
    /// Once `c2` would exceed this, smoothing is switched off.
    pub max_c2: f64,
    pub trigger: f64,
}

impl Default for C2Continuation {
    fn default() -> Self {
        Self {
            enabled: false,
            start: 1.0,
            growth: 10.0,
            max_c2: 1e6,
            trigger: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum LineSearch {
    /// Halve the step until the penalized objective does not decrease and no
    /// element inverts.
    Backtracking { max_halvings: usize },
    /// Always take the configured step, inverted elements included.
    Fixed,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self::Backtracking { max_halvings: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Number of POD modes whose energy is maximized.
    pub r: usize,
    pub step: f64,
    pub c1: f64,
    pub penalty: PenaltyKind,
    pub neo_hookean: NeoHookeanParams,
    pub elastic: ElasticParams,
    pub max_iters: usize,
    /// Stop once `1 - J_r` falls below this and no schedule is still moving.
    pub rel_tol: f64,
    pub continuation_c1: C1Continuation,
    pub continuation_c2: C2Continuation,
    /// Use the closed-form update `u - c1 (phi - Id)` with one fixed operator.
    pub polytopal_fast_path: bool,
    pub line_search: LineSearch,
    /// Write a checkpoint every this many iterations (0 disables).
    pub checkpoint_interval: usize,
    pub solver: SolverBackend,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            r: 1,
            step: 2.5,
            c1: 1.0,
            penalty: PenaltyKind::Linear,
            neo_hookean: NeoHookeanParams::default(),
            elastic: ElasticParams::default(),
            max_iters: 500,
            rel_tol: 0.0,
            continuation_c1: C1Continuation::default(),
            continuation_c2: C2Continuation::default(),
            polytopal_fast_path: false,
            line_search: LineSearch::default(),
            checkpoint_interval: 50,
            solver: SolverBackend::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.r == 0 {
            return bad("r must be at least 1".into());
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.c1 >= 0.0) || !self.c1.is_finite() {
            return bad(format!("c1 must be nonnegative, got {}", self.c1));
        }
        if !(self.rel_tol >= 0.0) {
            return bad(format!("rel_tol must be nonnegative, got {}", self.rel_tol));
        }
        self.elastic.validate()?;
        if self.penalty == PenaltyKind::NeoHookean {
            self.neo_hookean.validate()?;
        }
        if self.polytopal_fast_path && self.penalty != PenaltyKind::Linear {
            return bad("polytopal_fast_path requires the linear penalty".into());
        }
        let c1c = &self.continuation_c1;
        if c1c.enabled && !(c1c.factor > 0.0 && c1c.factor < 1.0 && c1c.trigger > 0.0) {
            return bad("continuation_c1 needs 0 < factor < 1 and trigger > 0".into());
        }
        let c2c = &self.continuation_c2;
        if c2c.enabled && !(c2c.start > 0.0 && c2c.growth > 1.0 && c2c.trigger > 0.0) {
            return bad("continuation_c2 needs start > 0, growth > 1 and trigger > 0".into());
        }
        Ok(())
    }
}
