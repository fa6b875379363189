use std::sync::Arc;

use morphopt::fem::{
    assemble_elasticity, l2_inner_product, BoundaryFrame, ElasticParams, Smoother,
};
use morphopt::mesh::{structured, MorphingState, NodalField, PointLocator, TriangleMesh};
use morphopt::ommgp::{ModeSelection, ReducedBasis};
use morphopt::optim::{MorphingProblem, Optimizer, OptimizerConfig, Snapshot, StepOutcome};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit square with interior nodes jittered by up to a quarter cell.
fn jittered(n: usize, seed: u64) -> TriangleMesh {
    let mesh = structured::rectangle([0.0, 0.0], [1.0, 1.0], n, n).unwrap();
    let boundary = mesh.boundary_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.25 / n as f64;
    let nodes = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if boundary.contains(&i) {
                *p
            } else {
                [p[0] + rng.gen_range(-h..h), p[1] + rng.gen_range(-h..h)]
            }
        })
        .collect();
    mesh.with_positions(nodes).unwrap()
}

fn random_scalar(mesh: &TriangleMesh, rng: &mut ChaCha8Rng) -> NodalField {
    NodalField::scalar(
        (0..mesh.n_nodes())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn affine_fields_are_reproduced(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
        let mesh = jittered(7, seed);
        let f = NodalField::from_fn_scalar(mesh.nodes(), |p| a + b * p[0] + c * p[1]);
        let loc = PointLocator::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        for _ in 0..20 {
            let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let v = loc.interpolate(&f, p).unwrap()[0];
            prop_assert!((v - (a + b * p[0] + c * p[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn walk_agrees_with_brute_force(seed in 0u64..1000, hint in 0usize..98) {
        let mesh = jittered(7, seed);
        let loc = PointLocator::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_scalar(&mesh, &mut rng);
        for _ in 0..20 {
            let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let walk = loc.locate(p, Some(hint % mesh.n_triangles()));
            let brute = loc.locate_brute_force(p).unwrap();
            let (mut x, mut y) = ([0.0], [0.0]);
            loc.eval(&f, &walk, &mut x);
            loc.eval(&f, &brute, &mut y);
            prop_assert!(!walk.clamped);
            prop_assert!((x[0] - y[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn inversion_detection_matches_min_area(seed in 0u64..1000, amp in 0.0f64..0.4) {
        let mesh = Arc::new(structured::rectangle([0.0, 0.0], [1.0, 1.0], 6, 6).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = NodalField::new(2, (0..2 * mesh.n_nodes()).map(|_| rng.gen_range(-amp..amp)).collect()).unwrap();
        let state = MorphingState::new(mesh.clone(), d, mesh).unwrap();
        prop_assert_eq!(state.detect_inverted().is_empty(), state.min_deformed_area() > 0.0);
        prop_assert_eq!(state.is_bijective(), state.min_deformed_area() > 0.0);
    }

    #[test]
    fn l2_product_is_symmetric_and_bilinear(seed in 0u64..1000, s in -5.0f64..5.0) {
        let mesh = jittered(6, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, g, h) = (random_scalar(&mesh, &mut rng), random_scalar(&mesh, &mut rng), random_scalar(&mesh, &mut rng));
        let fg = l2_inner_product(&mesh, &f, &g).unwrap();
        prop_assert!((fg - l2_inner_product(&mesh, &g, &f).unwrap()).abs() < 1e-13);
        let mut comb = f.clone();
        comb.axpy(s, &h);
        let lhs = l2_inner_product(&mesh, &comb, &g).unwrap();
        let rhs = fg + s * l2_inner_product(&mesh, &h, &g).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        prop_assert!(l2_inner_product(&mesh, &f, &f).unwrap() > 0.0);
    }

    #[test]
    fn elasticity_is_psd_with_rigid_kernel(seed in 0u64..1000, nu in 0.0f64..0.45, e in 0.1f64..10.0) {
        let mesh = jittered(5, seed);
        let params = ElasticParams { young_modulus: e, poisson_ratio: nu, penalty_alpha: 0.0 };
        let a = assemble_elasticity(&mesh, &params, &BoundaryFrame::reference(&mesh)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let u: Vec<f64> = (0..2 * mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            prop_assert!(a.form(&u, &u) >= -1e-12);
        }
        let (t0, t1, w) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let rigid = NodalField::from_fn_vector(mesh.nodes(), |p| [t0 - w * p[1], t1 + w * p[0]]);
        prop_assert!(a.form(rigid.values(), rigid.values()).abs() < 1e-10 * e);
    }

    #[test]
    fn smoother_is_linear(seed in 0u64..1000, c2 in 0.1f64..100.0, s in -3.0f64..3.0) {
        let mesh = jittered(6, seed);
        let smoother = Smoother::new(&mesh, c2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, g) = (random_scalar(&mesh, &mut rng), random_scalar(&mesh, &mut rng));
        let mut comb = f.clone();
        comb.axpy(s, &g);
        let mut expect = smoother.apply(&f).unwrap();
        expect.axpy(s, &smoother.apply(&g).unwrap());
        let got = smoother.apply(&comb).unwrap();
        for (x, y) in got.values().iter().zip(expect.values()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn basis_projection_is_idempotent(seed in 0u64..1000, n in 3usize..7, k in 1usize..3) {
        let mesh = Arc::new(structured::rectangle([0.0, 0.0], [1.0, 1.0], 6, 6).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fields: Vec<_> = (0..n).map(|_| random_scalar(&mesh, &mut rng)).collect();
        let basis = ReducedBasis::build(&mesh, fields.clone(), ModeSelection::fixed(k)).unwrap();
        for f in &fields {
            let c = basis.project(f);
            let once = basis.reconstruct(&c, mesh.n_nodes(), 1).unwrap();
            let again = basis.project(&once);
            for (x, y) in c.iter().zip(&again) {
                prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn ascent_keeps_morphings_valid(seed in 0u64..1000) {
        let mesh = Arc::new(structured::rectangle([-1.0, -1.0], [1.0, 1.0], 8, 8).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snaps = (0..3)
            .map(|_| {
                let (cx, cy) = (rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
                let f = NodalField::from_fn_scalar(mesh.nodes(), |p| (-((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / 0.1).exp());
                Snapshot::new(mesh.clone(), f).unwrap()
            })
            .collect();
        let problem = MorphingProblem::new(mesh.clone(), snaps).unwrap();
        let mut opt = Optimizer::new(problem, OptimizerConfig::default(), vec![NodalField::zeros(mesh.n_nodes(), 2); 3]).unwrap();
        let diameter = mesh.diameter();
        let mut prev_i = opt.objective_i().unwrap();
        let mut prev_drift = 0.0f64;
        let mut accepted = 0;
        for _ in 0..5 {
            let c1 = opt.c1();
            if opt.step().unwrap() == StepOutcome::Stationary {
                break;
            }
            accepted += 1;
            let i = opt.objective_i().unwrap();
            if opt.c1() == c1 {
                prop_assert!(i >= prev_i - 1e-12 * prev_i.abs().max(1.0), "{} < {}", i, prev_i);
            }
            prev_i = i;
            for d in opt.displacements() {
                let state = MorphingState::new(mesh.clone(), d.clone(), mesh.clone()).unwrap();
                prop_assert!(state.is_bijective());
                let drift = state.max_boundary_drift();
                prop_assert!(drift <= 10.0 * prev_drift + 1e-6 * diameter, "drift {}", drift);
                prev_drift = prev_drift.max(drift);
            }
        }
        prop_assert!(accepted > 0);
        prop_assert!(opt.displacements().iter().any(|d| d.max_abs() > 0.0));
    }
}
