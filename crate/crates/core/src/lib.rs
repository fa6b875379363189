//! Optimal mesh morphings for model-order reduction.
//!
//! Given snapshot fields on planar triangulated domains, this crate computes
//! morphings of a reference mesh that maximize the energy captured by the
//! leading POD modes of the pulled-back fields, and builds a Gaussian-process
//! surrogate (O-MMGP) on top of the resulting reduced coordinates.
//!
//! - [`mesh`]: triangle meshes, nodal fields, point location, file I/O
//! - [`fem`]: P1 assembly, elasticity inner product, linear solves, smoothing
//! - [`pod`]: correlation matrices, eigendecomposition, efficiency `J_r`
//! - [`optim`]: sensitivities, penalty energies, Riesz-preconditioned ascent
//! - [`ommgp`]: RBF geometric morphing, GP regression, train/predict
//! - [`toy`]: the tilted-Gaussian-ridge dataset generator

pub mod error;
pub mod fem;
pub mod mesh;
pub mod ommgp;
pub mod optim;
pub mod pod;
pub mod toy;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
