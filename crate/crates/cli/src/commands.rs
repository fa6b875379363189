use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use morphopt::mesh::io::{read_mesh, vtk_from_str, write_field, write_vtk};
use morphopt::mesh::{NodalField, TriangleMesh};
use morphopt::ommgp::{
    leave_one_out, relative_l2_error, rmse_report, train, GpModel, SurrogateBundle, TrainSample,
    BUNDLE_FILE,
};
use morphopt::optim::{Checkpoint, MorphingProblem, Optimizer, OptimizerTrace, CHECKPOINT_FILE};
use morphopt::pod::Spectrum;
use morphopt::toy::ToyDataset;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{io_err, CliError, CliResult};

pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub resume: Option<PathBuf>,
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(morphopt::Error::from)?;
    write_text(path, &text)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn load_dataset(cfg: &RunConfig) -> CliResult<ToyDataset> {
    match &cfg.dataset {
        Some(dir) => read_dataset(dir),
        None => Ok(ToyDataset::generate(
            cfg.toy.n,
            cfg.toy.beta_range,
            cfg.toy.resolution,
        )?),
    }
}

fn read_dataset(dir: &Path) -> CliResult<ToyDataset> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "dataset directory {} does not exist",
            dir.display()
        )));
    }
    Ok(ToyDataset::read(dir)?)
}

fn samples(data: &ToyDataset) -> Vec<TrainSample> {
    data.fields
        .iter()
        .zip(&data.betas)
        .map(|(f, &b)| TrainSample {
            mesh: data.mesh.clone(),
            params: vec![b],
            field: f.clone(),
        })
        .collect()
}

fn read_checkpoint(dir: &Path) -> CliResult<Checkpoint> {
    if !dir.join(CHECKPOINT_FILE).is_file() {
        return Err(CliError::Usage(format!(
            "no optimizer checkpoint in {}",
            dir.display()
        )));
    }
    Ok(Checkpoint::read(dir)?)
}

fn read_bundle(dir: Option<&PathBuf>) -> CliResult<SurrogateBundle> {
    let dir = dir.ok_or_else(|| {
        CliError::Usage("no trained bundle given (use --bundle or the `bundle` key)".into())
    })?;
    if !dir.join(BUNDLE_FILE).is_file() {
        return Err(CliError::Usage(format!(
            "no trained bundle in {}",
            dir.display()
        )));
    }
    Ok(SurrogateBundle::read(dir)?)
}

fn read_any_mesh(path: &Path) -> CliResult<TriangleMesh> {
    if path.extension().is_some_and(|e| e == "vtk") {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(vtk_from_str(&text)?.0)
    } else {
        Ok(read_mesh(path)?.0)
    }
}

pub fn gen_toy(ctx: &Context) -> CliResult<()> {
    let t = &ctx.config.toy;
    let data = ToyDataset::generate(t.n, t.beta_range, t.resolution)?;
    data.write(&ctx.out)?;
    println!(
        "wrote {} fields on a {}x{} grid ({} nodes) to {}",
        data.len(),
        t.resolution.0,
        t.resolution.1,
        data.mesh.n_nodes(),
        ctx.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct OptimizeReport {
    r: usize,
    iterations: usize,
    stop: String,
    initial_j: f64,
    final_j: f64,
    one_minus_j: f64,
    c1: f64,
    /// `lambda_k / tr C` at the final morphings.
    mode_energies: Vec<f64>,
    inverted_counts: Vec<usize>,
    total_inverted: usize,
    min_area_over_run: f64,
    max_direction_normal_ratio: f64,
    stiffness_assemblies: usize,
}

fn convergence_csv(trace: &OptimizerTrace) -> String {
    let mut s = String::from("iter,one_minus_J,c1,c2\n");
    for r in &trace.records {
        s.push_str(&format!(
            "{},{:e},{:e},{:e}\n",
            r.iter,
            1.0 - r.j,
            r.c1,
            r.c2
        ));
    }
    s
}

fn fractions(s: &Spectrum) -> Vec<f64> {
    s.eigenvalues.iter().map(|l| l / s.trace).collect()
}

pub fn optimize(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let data = load_dataset(cfg)?;
    let problem = MorphingProblem::new(data.mesh.clone(), data.snapshots())?;
    let optimizer = match &ctx.resume {
        Some(dir) => {
            let mut checkpoint = read_checkpoint(dir)?;
            // Everything but the iteration budget comes from the checkpoint.
            checkpoint.config.max_iters = cfg.optimizer.max_iters;
            log::info!("resuming from iteration {}", checkpoint.iteration);
            Optimizer::resume(problem, checkpoint)?
        }
        None => {
            let zeros = vec![NodalField::zeros(data.mesh.n_nodes(), 2); data.len()];
            Optimizer::new(problem, cfg.optimizer.clone(), zeros)?
        }
    };
    create_dir(&ctx.out)?;
    let r = optimizer.config().r;
    let result = optimizer.with_checkpoints(ctx.out.join("checkpoint")).run();
    let result = match result {
        Ok(res) => res,
        Err(e) => {
            if let morphopt::Error::BacktrackingExhausted { trace, .. } = &e {
                write_text(&ctx.out.join(TRACE_FILE), &trace.to_csv())?;
            }
            return Err(e.into());
        }
    };
    let trace = &result.trace;
    write_text(&ctx.out.join(TRACE_FILE), &trace.to_csv())?;
    write_text(&ctx.out.join("convergence.csv"), &convergence_csv(trace))?;
    let inverted_counts = result.family.inverted_counts();
    let report = OptimizeReport {
        r,
        iterations: trace.len(),
        stop: format!("{:?}", result.stop),
        initial_j: result.initial_j,
        final_j: result.final_j,
        one_minus_j: 1.0 - result.final_j,
        c1: result.c1,
        mode_energies: fractions(&result.spectrum),
        total_inverted: inverted_counts.iter().sum(),
        inverted_counts,
        min_area_over_run: trace
            .records
            .iter()
            .map(|r| r.min_area)
            .fold(f64::INFINITY, f64::min),
        max_direction_normal_ratio: trace.max_direction_normal_ratio,
        stiffness_assemblies: trace.assemblies,
    };
    write_json(&ctx.out.join(REPORT_FILE), &report)?;
    println!(
        "J_{r}: {:.6} -> {:.8} (1 - J = {:.3e}) after {} iterations, {} inverted elements",
        report.initial_j,
        report.final_j,
        report.one_minus_j,
        report.iterations,
        report.total_inverted
    );
    Ok(())
}

pub fn checkpoint_resume(ctx: &Context) -> CliResult<()> {
    if ctx.resume.is_none() {
        return Err(CliError::Usage(
            "checkpoint-resume needs --resume <checkpoint dir>".into(),
        ));
    }
    optimize(ctx)
}

#[derive(Serialize)]
struct SpectrumReport {
    eigenvalues: Vec<f64>,
    trace: f64,
    j_r: f64,
}

impl SpectrumReport {
    fn new(s: &Spectrum, r: usize) -> CliResult<Self> {
        Ok(Self {
            eigenvalues: s.eigenvalues.clone(),
            trace: s.trace,
            j_r: s.efficiency(r)?,
        })
    }
}

#[derive(Serialize)]
struct PodReport {
    n: usize,
    r: usize,
    raw: SpectrumReport,
    morphed: Option<SpectrumReport>,
    /// Morphed cumulative energy at least the raw one for every `k`.
    morphed_dominates: Option<bool>,
}

fn cumulative(f: &[f64]) -> Vec<f64> {
    f.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

pub fn pod(ctx: &Context, morphings: Option<&PathBuf>) -> CliResult<()> {
    let cfg = &ctx.config;
    let data = load_dataset(cfg)?;
    let n = data.len();
    let r = cfg.optimizer.r;
    if r == 0 || r > n {
        return Err(morphopt::Error::ModeCount { r, n }.into());
    }
    let problem = MorphingProblem::new(data.mesh.clone(), data.snapshots())?;
    let zeros = vec![NodalField::zeros(data.mesh.n_nodes(), 2); n];
    let raw = problem.evaluate(&zeros, None)?.spectrum;
    let morphed = match morphings.or(cfg.morphings.as_ref()) {
        Some(dir) => {
            let ck = read_checkpoint(dir)?;
            Some(problem.evaluate(&ck.displacements, None)?.spectrum)
        }
        None => None,
    };
    create_dir(&ctx.out)?;
    let raw_f = fractions(&raw);
    let raw_c = cumulative(&raw_f);
    let (m_f, m_c) = match &morphed {
        Some(s) => {
            let f = fractions(s);
            let c = cumulative(&f);
            (Some(f), Some(c))
        }
        None => (None, None),
    };
    let mut csv =
        String::from("k,raw_fraction,raw_cumulative,morphed_fraction,morphed_cumulative\n");
    for k in 0..n {
        let (mf, mc) = match (&m_f, &m_c) {
            (Some(f), Some(c)) => (format!("{:e}", f[k]), format!("{:e}", c[k])),
            _ => (String::new(), String::new()),
        };
        csv.push_str(&format!(
            "{},{:e},{:e},{mf},{mc}\n",
            k + 1,
            raw_f[k],
            raw_c[k]
        ));
    }
    write_text(&ctx.out.join("eigen_decay.csv"), &csv)?;
    let report = PodReport {
        n,
        r,
        raw: SpectrumReport::new(&raw, r)?,
        morphed: morphed
            .as_ref()
            .map(|s| SpectrumReport::new(s, r))
            .transpose()?,
        morphed_dominates: m_c
            .as_ref()
            .map(|c| c.iter().zip(&raw_c).all(|(m, r)| *m >= r - 1e-12)),
    };
    write_json(&ctx.out.join(REPORT_FILE), &report)?;
    match &report.morphed {
        Some(m) => println!("J_{r}: raw {:.6}, morphed {:.8}", report.raw.j_r, m.j_r),
        None => println!("J_{r}: raw {:.6}", report.raw.j_r),
    }
    Ok(())
}

#[derive(Serialize)]
struct CoordinateFit {
    log_likelihood: f64,
    log_lengths: Vec<f64>,
    log_signal_var: f64,
    log_noise_var: f64,
    noise_std: f64,
    /// Largest `|prediction - target|` over the training inputs.
    max_residual: f64,
    max_residual_over_noise: f64,
}

fn coordinate_fits(
    model: &GpModel,
    x: &[Vec<f64>],
    y: &[Vec<f64>],
) -> CliResult<Vec<CoordinateFit>> {
    let noise = model.noise_std();
    let preds = x
        .iter()
        .map(|xi| model.predict(xi))
        .collect::<morphopt::Result<Vec<_>>>()?;
    Ok(model
        .coordinates
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let max_residual = preds
                .iter()
                .zip(y)
                .map(|(p, t)| (p[k] - t[k]).abs())
                .fold(0.0, f64::max);
            CoordinateFit {
                log_likelihood: c.log_likelihood,
                log_lengths: c.hyper.log_lengths.clone(),
                log_signal_var: c.hyper.log_signal_var,
                log_noise_var: c.hyper.log_noise_var,
                noise_std: noise[k],
                max_residual,
                max_residual_over_noise: max_residual / noise[k],
            }
        })
        .collect())
}

#[derive(Serialize)]
struct TrainReportDoc {
    n: usize,
    n_geo: usize,
    n_opt: usize,
    r: usize,
    initial_j: f64,
    final_j: f64,
    opt_energy: f64,
    field_energy: f64,
    reconstruction_errors: Vec<f64>,
    model_r: Vec<CoordinateFit>,
    model_o: Vec<CoordinateFit>,
}

pub fn train_cmd(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let data = load_dataset(cfg)?;
    let samples = samples(&data);
    let (bundle, report) = train(data.mesh.clone(), &samples, &cfg.train_config())?;
    create_dir(&ctx.out)?;
    bundle.write(ctx.out.join("bundle"))?;
    write_text(
        &ctx.out.join(TRACE_FILE),
        &report.optimization.trace.to_csv(),
    )?;
    let x: Vec<Vec<f64>> = samples
        .iter()
        .zip(&report.alpha)
        .map(|(s, a)| s.params.iter().chain(a).copied().collect())
        .collect();
    let doc = TrainReportDoc {
        n: samples.len(),
        n_geo: bundle.geo.len(),
        n_opt: bundle.opt.len(),
        r: bundle.field.len(),
        initial_j: report.optimization.initial_j,
        final_j: report.optimization.final_j,
        opt_energy: bundle.opt.energy(),
        field_energy: bundle.field.energy(),
        reconstruction_errors: report.reconstruction_errors.clone(),
        model_r: coordinate_fits(&bundle.model_r, &x, &report.beta)?,
        model_o: coordinate_fits(&bundle.model_o, &x, &report.gamma)?,
    };
    write_json(&ctx.out.join(REPORT_FILE), &doc)?;
    println!(
        "trained on {} samples: n_geo {}, n_opt {}, r {}, field energy {:.6}",
        doc.n, doc.n_geo, doc.n_opt, doc.r, doc.field_energy
    );
    Ok(())
}

#[derive(Serialize)]
struct PredictionDoc {
    params: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    clamped: usize,
    inverted: usize,
}

pub fn predict(
    ctx: &Context,
    bundle: Option<&PathBuf>,
    params: Option<&Vec<f64>>,
    mesh: Option<&PathBuf>,
) -> CliResult<()> {
    let cfg = &ctx.config;
    let bundle = read_bundle(bundle.or(cfg.bundle.as_ref()))?;
    let params = params.unwrap_or(&cfg.predict.params);
    let target = match mesh.or(cfg.predict.mesh.as_ref()) {
        Some(path) => Arc::new(read_any_mesh(path)?),
        None => bundle.reference.clone(),
    };
    let p = bundle.predict(&target, params)?;
    create_dir(&ctx.out)?;
    write_field(ctx.out.join("prediction.field"), "prediction", &p.field)?;
    write_vtk(
        ctx.out.join("prediction.vtk"),
        &target,
        &[("prediction", &p.field)],
    )?;
    let doc = PredictionDoc {
        params: params.clone(),
        alpha: p.alpha,
        beta: p.beta,
        gamma: p.gamma,
        clamped: p.clamped,
        inverted: p.inverted,
    };
    write_json(&ctx.out.join(REPORT_FILE), &doc)?;
    println!(
        "predicted {} nodes ({} clamped)",
        target.n_nodes(),
        doc.clamped
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    mode: &'static str,
    n: usize,
    mean_relative_error: f64,
    max_relative_error: f64,
    rmse: f64,
    relative_errors: Vec<f64>,
    per_sample_rmse: Vec<f64>,
}

pub fn eval(ctx: &Context, bundle: Option<&PathBuf>) -> CliResult<()> {
    let cfg = &ctx.config;
    let (mode, data, predictions) = match &cfg.test_dataset {
        Some(dir) => {
            let bundle = read_bundle(bundle.or(cfg.bundle.as_ref()))?;
            let data = read_dataset(dir)?;
            let preds = samples(&data)
                .iter()
                .map(|s| bundle.predict(&s.mesh, &s.params).map(|p| p.field))
                .collect::<morphopt::Result<Vec<_>>>()?;
            ("test_split", data, preds)
        }
        None => {
            let data = load_dataset(cfg)?;
            let loo = leave_one_out(data.mesh.clone(), &samples(&data), &cfg.train_config())?;
            ("leave_one_out", data, loo.predictions)
        }
    };
    let relative_errors = data
        .fields
        .iter()
        .zip(&predictions)
        .map(|(t, p)| relative_l2_error(&data.mesh, p, t))
        .collect::<morphopt::Result<Vec<_>>>()?;
    let rmse = rmse_report(&predictions, &data.fields)?;
    let n = relative_errors.len();
    let report = EvalReport {
        mode,
        n,
        mean_relative_error: relative_errors.iter().sum::<f64>() / n as f64,
        max_relative_error: relative_errors.iter().copied().fold(0.0, f64::max),
        rmse: rmse.rmse,
        per_sample_rmse: rmse.per_sample.clone(),
        relative_errors,
    };
    create_dir(&ctx.out)?;
    let mut csv = String::from("sample,beta,relative_l2,rmse\n");
    for (i, (b, (e, r))) in data
        .betas
        .iter()
        .zip(report.relative_errors.iter().zip(&report.per_sample_rmse))
        .enumerate()
    {
        csv.push_str(&format!("{i},{b},{e:e},{r:e}\n"));
    }
    write_text(&ctx.out.join("eval.csv"), &csv)?;
    write_json(&ctx.out.join(REPORT_FILE), &report)?;
    println!(
        "{mode} over {n} samples: mean relative L2 {:.4e}, max {:.4e}, RMSE {:.4e}",
        report.mean_relative_error, report.max_relative_error, report.rmse
    );
    Ok(())
}
