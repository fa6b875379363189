//! Gaussian-process regression with an anisotropic squared-exponential
//! kernel, one independent process per output coordinate.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameter search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpConfig {
    /// Nelder-Mead restarts in log-hyperparameter space.
    pub starts: usize,
    pub max_iters: u64,
    pub seed: u64,
    /// Lower bound on the noise variance of the standardized targets.
    pub min_noise: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            max_iters: 400,
            seed: 0,
            min_noise: 1e-10,
        }
    }
}

/// Log-space hyperparameters of one output coordinate, in standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub log_lengths: Vec<f64>,
    pub log_signal_var: f64,
    pub log_noise_var: f64,
}

impl GpHyper {
    fn from_vec(v: &[f64]) -> Self {
        let d = v.len() - 2;
        Self {
            log_lengths: v[..d].to_vec(),
            log_signal_var: v[d],
            log_noise_var: v[d + 1],
        }
    }

    pub fn noise_var(&self) -> f64 {
        self.log_noise_var.exp()
    }
}

/// Bounds keeping the search away from degenerate kernels.
const LOG_LENGTH: (f64, f64) = (-6.0, 6.0);
const LOG_SIGNAL: (f64, f64) = (-8.0, 8.0);
const LOG_NOISE_MAX: f64 = 2.0;

fn clamp_hyper(v: &[f64], min_noise: f64) -> Vec<f64> {
    let d = v.len() - 2;
    let mut out = v.to_vec();
    for x in &mut out[..d] {
        *x = x.clamp(LOG_LENGTH.0, LOG_LENGTH.1);
    }
    out[d] = out[d].clamp(LOG_SIGNAL.0, LOG_SIGNAL.1);
    out[d + 1] = out[d + 1].clamp(min_noise.ln(), LOG_NOISE_MAX);
    out
}

fn kernel(a: &[f64], b: &[f64], h: &GpHyper) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .zip(&h.log_lengths)
        .map(|((x, y), l)| ((x - y) / l.exp()).powi(2))
        .sum();
    h.log_signal_var.exp() * (-0.5 * s).exp()
}

fn gram(x: &[Vec<f64>], h: &GpHyper) -> DMatrix<f64> {
    let n = x.len();
    let noise = h.noise_var();
    DMatrix::from_fn(n, n, |i, j| {
        kernel(&x[i], &x[j], h) + if i == j { noise } else { 0.0 }
    })
}

/// Log marginal likelihood of standardized targets `y`, with the factor and
/// weights `K^{-1} y` when the kernel matrix is positive definite.
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    y: &DVector<f64>,
    h: &GpHyper,
) -> Option<(f64, Cholesky<f64, Dyn>, DVector<f64>)> {
    let chol = gram(x, h).cholesky()?;
    let alpha = chol.solve(y);
    let logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let n = y.len() as f64;
    let lml = -0.5 * y.dot(&alpha) - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    lml.is_finite().then_some((lml, chol, alpha))
}

struct NegLml<'a> {
    x: &'a [Vec<f64>],
    y: &'a DVector<f64>,
    min_noise: f64,
}

impl CostFunction for NegLml<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let h = GpHyper::from_vec(&clamp_hyper(p, self.min_noise));
        Ok(log_marginal_likelihood(self.x, self.y, &h).map_or(f64::INFINITY, |(l, _, _)| -l))
    }
}

/// Per-dimension mean and standard deviation; constant dimensions get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>], dim: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..dim)
            .map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n)
            .collect();
        let std = (0..dim)
            .map(|d| {
                let v = rows.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n;
                let s = v.sqrt();
                if s > 1e-12 * mean[d].abs() && s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// One fitted output coordinate.
#[derive(Debug, Clone)]
pub struct GpCoordinate {
    pub hyper: GpHyper,
    pub log_likelihood: f64,
    alpha: DVector<f64>,
}

/// Independent GPs sharing standardized training inputs.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub inputs: Standardizer,
    pub outputs: Standardizer,
    /// Standardized training inputs.
    x: Vec<Vec<f64>>,
    /// Training targets in original units.
    y: Vec<Vec<f64>>,
    pub coordinates: Vec<GpCoordinate>,
}

/// Serializable form of a [`GpModel`]; factors are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpModelData {
    pub inputs: Standardizer,
    pub outputs: Standardizer,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<Vec<f64>>,
    pub hypers: Vec<GpHyper>,
}

impl GpModel {
    /// Fits one GP per column of `y` by maximizing the log marginal likelihood.
    pub fn fit(x: &[Vec<f64>], y: &[Vec<f64>], config: &GpConfig) -> Result<Self> {
        let (n, din, dout) = check_shapes(x, y)?;
        if n == 0 {
            return Err(Error::InvalidParameter("no training samples".into()));
        }
        if config.starts == 0 || !(config.min_noise > 0.0) {
            return Err(Error::InvalidParameter(
                "gp search needs at least one start and a positive noise floor".into(),
            ));
        }
        let inputs = Standardizer::fit(x, din);
        let outputs = Standardizer::fit(y, dout);
        let xs: Vec<Vec<f64>> = x.iter().map(|r| inputs.apply(r)).collect();
        let ys: Vec<Vec<f64>> = y.iter().map(|r| outputs.apply(r)).collect();
        let coordinates = (0..dout)
            .into_par_iter()
            .map(|k| {
                let col = DVector::from_iterator(n, ys.iter().map(|r| r[k]));
                fit_coordinate(&xs, &col, config, k as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            inputs,
            outputs,
            x: xs,
            y: y.to_vec(),
            coordinates,
        })
    }

    pub fn from_data(data: &GpModelData) -> Result<Self> {
        let (n, din, dout) = check_shapes(&data.train_x, &data.train_y)?;
        if data.hypers.len() != dout {
            return Err(Error::DimensionMismatch {
                expected: dout,
                got: data.hypers.len(),
            });
        }
        let xs: Vec<Vec<f64>> = data.train_x.iter().map(|r| data.inputs.apply(r)).collect();
        let coordinates = data
            .hypers
            .iter()
            .enumerate()
            .map(|(k, h)| {
                if h.log_lengths.len() != din {
                    return Err(Error::DimensionMismatch {
                        expected: din,
                        got: h.log_lengths.len(),
                    });
                }
                let col = DVector::from_iterator(
                    n,
                    data.train_y
                        .iter()
                        .map(|r| (r[k] - data.outputs.mean[k]) / data.outputs.std[k]),
                );
                let (lml, _, alpha) = log_marginal_likelihood(&xs, &col, h).ok_or_else(|| {
                    Error::Numerical("stored kernel is not positive definite".into())
                })?;
                Ok(GpCoordinate {
                    hyper: h.clone(),
                    log_likelihood: lml,
                    alpha,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            inputs: data.inputs.clone(),
            outputs: data.outputs.clone(),
            x: xs,
            y: data.train_y.clone(),
            coordinates,
        })
    }

    pub fn to_data(&self) -> GpModelData {
        GpModelData {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            train_x: self.x.iter().map(|r| self.inputs.invert(r)).collect(),
            train_y: self.y.clone(),
            hypers: self.coordinates.iter().map(|c| c.hyper.clone()).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn n_train(&self) -> usize {
        self.x.len()
    }

    /// Posterior mean at `input`, in original output units.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let q = self.inputs.apply(input);
        let mean: Vec<f64> = self
            .coordinates
            .iter()
            .map(|c| {
                self.x
                    .iter()
                    .zip(c.alpha.iter())
                    .map(|(xi, a)| kernel(&q, xi, &c.hyper) * a)
                    .sum()
            })
            .collect();
        Ok(self.outputs.invert(&mean))
    }

    /// Learned noise standard deviation of each output, in original units.
    pub fn noise_std(&self) -> Vec<f64> {
        self.coordinates
            .iter()
            .zip(&self.outputs.std)
            .map(|(c, s)| c.hyper.noise_var().sqrt() * s)
            .collect()
    }
}

fn check_shapes(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<(usize, usize, usize)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let din = x.first().map_or(0, Vec::len);
    let dout = y.first().map_or(0, Vec::len);
    for r in x {
        if r.len() != din {
            return Err(Error::DimensionMismatch {
                expected: din,
                got: r.len(),
            });
        }
    }
    for r in y {
        if r.len() != dout {
            return Err(Error::DimensionMismatch {
                expected: dout,
                got: r.len(),
            });
        }
    }
    Ok((x.len(), din, dout))
}

fn fit_coordinate(
    x: &[Vec<f64>],
    y: &DVector<f64>,
    config: &GpConfig,
    stream: u64,
) -> Result<GpCoordinate> {
    let d = x.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let problem = NegLml {
        x,
        y,
        min_noise: config.min_noise,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..config.starts {
        // The first start is a neutral guess; the rest are random.
        let start: Vec<f64> = if s == 0 {
            let mut v = vec![0.0; d];
            v.push(0.0);
            v.push(-6.0);
            v
        } else {
            let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            v.push(rng.gen_range(-1.5..1.5));
            v.push(rng.gen_range(config.min_noise.ln().max(-18.0)..-1.0));
            v
        };
        let start = clamp_hyper(&start, config.min_noise);
        let mut simplex = vec![start.clone()];
        for k in 0..start.len() {
            let mut v = start.clone();
            v[k] += 1.0;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-9)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let res = Executor::new(
            NegLml {
                x,
                y,
                min_noise: config.min_noise,
            },
            solver,
        )
        .configure(|st| st.max_iters(config.max_iters))
        .timer(false)
        .run()
        .map_err(|e| Error::Numerical(e.to_string()))?;
        let state = res.state();
        let cost = state.get_best_cost();
        if let Some(p) = state.get_best_param() {
            if cost.is_finite() && best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, clamp_hyper(p, config.min_noise)));
            }
        }
    }
    let (_, p) = best.ok_or_else(|| {
        Error::Numerical("no hyperparameters give a positive definite kernel".into())
    })?;
    let hyper = GpHyper::from_vec(&p);
    let (lml, _, alpha) = log_marginal_likelihood(problem.x, problem.y, &hyper)
        .ok_or_else(|| Error::Numerical("kernel lost positive definiteness".into()))?;
    Ok(GpCoordinate {
        hyper,
        log_likelihood: lml,
        alpha,
    })
}
