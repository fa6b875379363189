use std::sync::Arc;

use morphopt::mesh::{structured, NodalField, TriangleMesh};
use morphopt::optim::{
    multiscale_objective, Checkpoint, LineSearch, MorphingProblem, Optimizer, OptimizerConfig,
    PenaltyKind, Snapshot, StepOutcome,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> Arc<TriangleMesh> {
    Arc::new(structured::rectangle([-1.0, -1.0], [1.0, 1.0], n, n).unwrap())
}

fn bump(mesh: &TriangleMesh, c: [f64; 2], w: f64) -> NodalField {
    NodalField::from_fn_scalar(mesh.nodes(), |p| {
        (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / w).exp()
    })
}

fn random_problem(mesh: &Arc<TriangleMesh>, n: usize, rng: &mut ChaCha8Rng) -> MorphingProblem {
    let snaps = (0..n)
        .map(|_| {
            let c = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)];
            Snapshot::new(mesh.clone(), bump(mesh, c, rng.gen_range(0.2..0.5))).unwrap()
        })
        .collect();
    MorphingProblem::new(mesh.clone(), snaps).unwrap()
}

/// Smooth vector field vanishing on the boundary of the square.
fn interior_field(mesh: &TriangleMesh, amp: f64, rng: &mut ChaCha8Rng) -> NodalField {
    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    NodalField::from_fn_vector(mesh.nodes(), |p| {
        let b = (1.0 - p[0] * p[0]) * (1.0 - p[1] * p[1]);
        [
            amp * b * (c[0] + c[1] * p[1]),
            amp * b * (c[2] + c[3] * p[0]),
        ]
    })
}

fn shifted(d: &[NodalField], psi: &[NodalField], s: f64) -> Vec<NodalField> {
    d.iter()
        .zip(psi)
        .map(|(d, p)| {
            let mut x = d.clone();
            x.axpy(s, p);
            x
        })
        .collect()
}

#[test]
fn differential_matches_finite_differences() {
    let mesh = square(12);
    assert!(mesh.n_nodes() <= 200);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..5 {
        let n = 2 + seed % 3;
        let problem = random_problem(&mesh, n, &mut rng);
        let d: Vec<_> = (0..n)
            .map(|_| interior_field(&mesh, 0.05, &mut rng))
            .collect();
        let psi: Vec<_> = (0..n)
            .map(|_| interior_field(&mesh, 1.0, &mut rng))
            .collect();
        let eval = problem.evaluate(&d, None).unwrap();
        for r in 1..n {
            let an = eval.differential(&problem, r, &psi).unwrap();
            let h = 1e-5;
            let jp = problem.efficiency(&shifted(&d, &psi, h), r).unwrap();
            let jm = problem.efficiency(&shifted(&d, &psi, -h), r).unwrap();
            let fd = (jp - jm) / (2.0 * h);
            let rel = (fd - an).abs() / an.abs();
            assert!(rel <= 1e-3, "seed {seed} r {r}: fd {fd:e} vs {an:e}");

            let other = eval.differential_lemma(&problem, r, &psi).unwrap();
            assert!(
                (other - an).abs() <= 1e-10 * an.abs().max(1e-12),
                "{other} vs {an}"
            );
        }
    }
}

#[test]
fn differential_vanishes_on_zero_direction_and_full_rank() {
    let mesh = square(8);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let problem = random_problem(&mesh, 3, &mut rng);
    let d: Vec<_> = (0..3)
        .map(|_| interior_field(&mesh, 0.05, &mut rng))
        .collect();
    let eval = problem.evaluate(&d, None).unwrap();
    let zero = vec![NodalField::zeros(mesh.n_nodes(), 2); 3];
    assert_eq!(eval.differential(&problem, 1, &zero).unwrap(), 0.0);
    let psi: Vec<_> = (0..3)
        .map(|_| interior_field(&mesh, 1.0, &mut rng))
        .collect();
    // J_n = 1 for every family.
    let full = eval.differential(&problem, 3, &psi).unwrap();
    let partial = eval.differential(&problem, 1, &psi).unwrap();
    assert!(full.abs() <= 1e-12 * partial.abs().max(1.0), "{full}");
}

#[test]
fn single_or_identical_snapshots_have_no_sensitivity() {
    let mesh = square(8);
    let u = bump(&mesh, [0.1, -0.2], 0.3);
    let one = MorphingProblem::new(
        mesh.clone(),
        vec![Snapshot::new(mesh.clone(), u.clone()).unwrap()],
    )
    .unwrap();
    let eval = one
        .evaluate(&[NodalField::zeros(mesh.n_nodes(), 2)], None)
        .unwrap();
    let loads = eval.sensitivity_loads(&one, 1).unwrap();
    assert!(loads[0].iter().all(|&v| v.abs() < 1e-14));

    let same = MorphingProblem::new(
        mesh.clone(),
        (0..4)
            .map(|_| Snapshot::new(mesh.clone(), u.clone()).unwrap())
            .collect(),
    )
    .unwrap();
    let eval = same
        .evaluate(&vec![NodalField::zeros(mesh.n_nodes(), 2); 4], None)
        .unwrap();
    for b in eval.sensitivity_loads(&same, 1).unwrap() {
        assert!(
            b.iter().all(|&v| v.abs() < 1e-12),
            "{:e}",
            b.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        );
    }
    let mut opt = Optimizer::new(
        same,
        OptimizerConfig::default(),
        vec![NodalField::zeros(mesh.n_nodes(), 2); 4],
    )
    .unwrap();
    assert_eq!(opt.step().unwrap(), StepOutcome::Stationary);
}

fn ridge_problem(nx: usize, betas: &[f64]) -> MorphingProblem {
    let mesh = Arc::new(structured::toy_domain(nx, nx + nx / 4).unwrap());
    let snaps = betas
        .iter()
        .map(|&b| Snapshot::new(mesh.clone(), morphopt::toy::ridge_field(&mesh, b)).unwrap())
        .collect();
    MorphingProblem::new(mesh, snaps).unwrap()
}

#[test]
fn fast_path_step_increases_efficiency() {
    let problem = ridge_problem(16, &[-0.3, 0.0, 0.3]);
    let n = problem.reference().n_nodes();
    let config = OptimizerConfig {
        polytopal_fast_path: true,
        ..Default::default()
    };
    let mut opt = Optimizer::new(problem, config, vec![NodalField::zeros(n, 2); 3]).unwrap();
    let j0 = opt.objective_j().unwrap();
    assert!(matches!(opt.step().unwrap(), StepOutcome::Accepted(_)));
    assert!(opt.objective_j().unwrap() > j0);
    assert!(opt.trace().max_direction_normal_ratio <= 1e-4);
}

#[test]
fn stiff_step_is_accepted_after_halving() {
    let problem = ridge_problem(16, &[-0.3, 0.3]);
    let n = problem.reference().n_nodes();
    let config = OptimizerConfig {
        step: 1e4,
        ..Default::default()
    };
    let mut opt = Optimizer::new(problem, config, vec![NodalField::zeros(n, 2); 2]).unwrap();
    let i0 = opt.objective_i().unwrap();
    match opt.step().unwrap() {
        StepOutcome::Accepted(eps) => assert!(eps < 1e4),
        other => panic!("{other:?}"),
    }
    assert!(opt.objective_i().unwrap() >= i0);
    assert!(opt.trace().last().unwrap().min_area > 0.0);
}

#[test]
fn neohookean_general_path_steps() {
    let problem = ridge_problem(12, &[-0.3, 0.0, 0.3]);
    let n = problem.reference().n_nodes();
    let config = OptimizerConfig {
        penalty: PenaltyKind::NeoHookean,
        c1: 5e-3,
        ..Default::default()
    };
    let mut opt = Optimizer::new(problem, config, vec![NodalField::zeros(n, 2); 3]).unwrap();
    let j0 = opt.objective_j().unwrap();
    for _ in 0..5 {
        opt.step().unwrap();
    }
    assert!(opt.objective_j().unwrap() > j0);
    assert!(opt.trace().records.iter().all(|r| r.min_area > 0.0));
}

#[test]
fn multiscale_objective_limits() {
    let problem = ridge_problem(16, &[-0.38, -0.1, 0.2, 0.38]);
    let zero = vec![NodalField::zeros(problem.reference().n_nodes(), 2); 4];
    let raw = problem.efficiency(&zero, 1).unwrap();
    let sharp = multiscale_objective(&problem, &zero, 1, 1e8).unwrap();
    assert!((sharp - raw).abs() <= 1e-3, "{sharp} vs {raw}");
    let blurred = multiscale_objective(&problem, &zero, 1, 1.0).unwrap();
    assert!(blurred >= raw);
    assert!(multiscale_objective(&problem, &zero, 1, 0.0).is_err());

    let mesh = problem.reference().clone();
    let constants = MorphingProblem::new(
        mesh.clone(),
        [1.0, -2.0, 0.5]
            .iter()
            .map(|&c| {
                Snapshot::new(
                    mesh.clone(),
                    NodalField::from_fn_scalar(mesh.nodes(), |_| c),
                )
                .unwrap()
            })
            .collect(),
    )
    .unwrap();
    let zero = vec![NodalField::zeros(mesh.n_nodes(), 2); 3];
    for c2 in [0.1, 1.0, 1e4] {
        let j = multiscale_objective(&constants, &zero, 1, c2).unwrap();
        assert!((j - 1.0).abs() < 1e-12);
    }
}

#[test]
fn c2_continuation_ends_unsmoothed() {
    let problem = ridge_problem(12, &[-0.3, 0.0, 0.3]);
    let n = problem.reference().n_nodes();
    let mut config = OptimizerConfig {
        polytopal_fast_path: true,
        max_iters: 400,
        ..Default::default()
    };
    config.continuation_c2.enabled = true;
    config.continuation_c2.trigger = 1e-2;
    let mut opt = Optimizer::new(problem, config, vec![NodalField::zeros(n, 2); 3]).unwrap();
    assert_eq!(opt.c2(), Some(1.0));
    let mut seen = vec![1.0];
    for _ in 0..400 {
        if opt.step().unwrap() == StepOutcome::Stationary {
            break;
        }
        match opt.c2() {
            Some(c) if c != *seen.last().unwrap() => seen.push(c),
            None => break,
            _ => {}
        }
    }
    assert_eq!(opt.c2(), None, "schedule {seen:?}");
    assert!(seen.windows(2).all(|w| (w[1] / w[0] - 10.0).abs() < 1e-12));
}

#[test]
fn checkpoint_resume_is_deterministic() {
    let problem = ridge_problem(12, &[-0.3, 0.1, 0.3]);
    let n = problem.reference().n_nodes();
    let mut config = OptimizerConfig {
        polytopal_fast_path: true,
        max_iters: 8,
        ..Default::default()
    };
    config.continuation_c1.enabled = true;
    config.continuation_c1.trigger = 1e-2;
    let zero = vec![NodalField::zeros(n, 2); 3];

    let straight = Optimizer::new(problem.clone(), config.clone(), zero.clone())
        .unwrap()
        .run()
        .unwrap();

    let mut first = Optimizer::new(problem.clone(), config.clone(), zero).unwrap();
    for _ in 0..4 {
        first.step().unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    first.checkpoint().write(dir.path()).unwrap();
    let back = Checkpoint::read(dir.path()).unwrap();
    assert_eq!(back.iteration, 4);
    assert_eq!(back.displacements, first.displacements());
    let resumed = Optimizer::resume(problem, back).unwrap().run().unwrap();

    assert_eq!(resumed.trace.to_csv(), straight.trace.to_csv());
    assert_eq!(resumed.family.displacements, straight.family.displacements);
    assert_eq!(resumed.final_j, straight.final_j);
}

#[test]
fn fixed_line_search_takes_full_step() {
    let problem = ridge_problem(12, &[-0.3, 0.3]);
    let n = problem.reference().n_nodes();
    let config = OptimizerConfig {
        polytopal_fast_path: true,
        c1: 5e-3,
        line_search: LineSearch::Fixed,
        ..Default::default()
    };
    let mut opt = Optimizer::new(problem, config, vec![NodalField::zeros(n, 2); 2]).unwrap();
    assert_eq!(opt.step().unwrap(), StepOutcome::Accepted(2.5));
}

#[test]
fn mode_count_above_n_is_rejected() {
    let problem = ridge_problem(8, &[-0.3, 0.3]);
    let n = problem.reference().n_nodes();
    let config = OptimizerConfig {
        r: 3,
        ..Default::default()
    };
    assert!(Optimizer::new(problem, config, vec![NodalField::zeros(n, 2); 2]).is_err());
}
