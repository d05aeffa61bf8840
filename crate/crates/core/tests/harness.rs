use nlfc::fc2d::{FcParams, FourierField};
use nlfc::geometry::{build_cartesian_grid, classify_points, BoundaryCurve};
use nlfc::harness::{
    boundary_jump, build_manufactured, convergence_study, interface_curve, interior_jump, least_squares_order,
    relative_l2_error, run_diffusion, run_poisson, CaseId, BOUNDARY_JUMPS, DIFFUSION_MULTIPLIERS, INTERFACE_JUMPS,
    POISSON_MULTIPLIERS,
};
use nlfc::solvers::{GmresConfig, StepSettings};
use proptest::prelude::*;

#[test]
fn every_case_builds_with_its_reference_betas() {
    for id in CaseId::ALL {
        for &beta in id.betas() {
            let c = build_manufactured(id, beta).unwrap();
            assert_eq!(c.kernel.beta, beta);
            assert_eq!(c.kernel.delta, id.delta());
        }
    }
    assert_eq!(BOUNDARY_JUMPS.map(|r| r.0).as_slice(), CaseId::PoissonBoundaryJump.betas());
    assert_eq!(INTERFACE_JUMPS.map(|r| r.0).as_slice(), CaseId::PoissonInterfaceJump.betas());
}

#[test]
fn stored_multipliers_match_the_tables() {
    for (id, table) in [(CaseId::PoissonOscillatory, POISSON_MULTIPLIERS), (CaseId::DiffusionOscillatory, DIFFUSION_MULTIPLIERS)] {
        for (beta, m) in table {
            let c = build_manufactured(id, beta).unwrap();
            assert!(((c.multiplier - m) / m).abs() < 1e-10, "{id} β={beta}");
        }
    }
}

#[test]
fn piecewise_load_and_diffusion_source() {
    let c = build_manufactured(CaseId::PoissonInterfaceJump, 2.0).unwrap();
    assert_eq!(c.rhs(0.1, 0.1, 0.0), 80.0);
    assert_eq!(c.rhs(0.5, 0.0, 0.0), 4.0);
    assert_eq!(c.collar(0.3, 0.4, 0.0), 0.25);
    let d = build_manufactured(CaseId::DiffusionOscillatory, 1.0).unwrap();
    let (x, y, t) = (0.12, -0.31, 3e-5);
    let u = d.exact(x, y, t).unwrap();
    let k = 2.0 * std::f64::consts::PI.powi(2) * 0.1;
    assert!((d.rhs(x, y, t) - (-k - d.multiplier) * u).abs() < 1e-12 * d.multiplier.abs());
    assert_eq!((d.tau, d.t_final), (5e-7, 1e-4));
}

#[test]
fn relative_error_of_exact_and_shifted_fields() {
    let disk = BoundaryCurve::disk(1.0).unwrap();
    let grid = build_cartesian_grid(&disk, 0.05, 25, 0.05).unwrap();
    let (lx, ly) = grid.periods();
    let mode = move |x: f64, y: f64| 1.0 + (std::f64::consts::TAU * (3.0 * (x - grid.x0) / lx + 2.0 * (y - grid.y0) / ly)).cos();
    let vals: Vec<f64> = (0..grid.len()).map(|i| { let p = grid.node_at(i); mode(p.x, p.y) }).collect();
    let err = relative_l2_error(&FourierField::from_values(grid, vals), mode, &disk).unwrap();
    assert!(err.relative && err.value <= 1e-12, "{:e}", err.value);
    let c = 3e-4;
    let err = relative_l2_error(&FourierField::from_values(grid, vec![1.0 + c; grid.len()]), |_, _| 1.0, &disk).unwrap();
    assert!((err.value - c).abs() < 1e-14);
}

#[test]
fn zero_exact_solution_falls_back_to_absolute_norm() {
    let disk = BoundaryCurve::disk(1.0).unwrap();
    let grid = build_cartesian_grid(&disk, 0.1, 25, 0.1).unwrap();
    let err = relative_l2_error(&FourierField::from_values(grid, vec![0.5; grid.len()]), |_, _| 0.0, &disk).unwrap();
    assert!(!err.relative);
    assert!(err.value > 0.0);
}

#[test]
fn smooth_fields_have_vanishing_jumps() {
    let kite = BoundaryCurve::kite();
    let h = 0.01;
    let grid = build_cartesian_grid(&kite, h, 25, h).unwrap();
    let cls = classify_points(&grid, &kite, 0.0, 0.0).unwrap();
    let f = |x: f64, y: f64| x * x + y * y + 0.3 * (2.0 * x).sin();
    let u: Vec<f64> = (0..grid.len()).map(|i| { let p = grid.node_at(i); f(p.x, p.y) }).collect();
    let j = boundary_jump(&grid, &cls.interior_mask(), &u, &kite, f, 5).unwrap();
    assert!(j.min <= j.max && j.max < 1e-8, "{:e}", j.max);
    let inside = |x: f64, y: f64| x * x + 4.0 * y * y < 0.2;
    let j = interior_jump(&grid, &cls.interior_mask(), &u, &interface_curve(), inside, 5).unwrap();
    assert!(j.max < 1e-8, "{:e}", j.max);
    assert!(j.magnitude.iter().all(|m| *m >= 0.0));
    assert!(j.to_csv().starts_with("theta,jump\n"));
}

#[test]
fn quadratic_poisson_problem_is_solved_exactly() {
    let c = build_manufactured(CaseId::PoissonQuadratic, 2.0).unwrap();
    let run = run_poisson(&c, 0.04, FcParams::default(), &GmresConfig::default()).unwrap();
    assert!(run.max_error.unwrap() < 1e-7, "{:e}", run.max_error.unwrap());
    let j = run.boundary_jump(5).unwrap();
    assert!(j.max < 1e-6, "{:e}", j.max);
}

#[test]
fn wrong_problem_kind_is_rejected() {
    let c = build_manufactured(CaseId::PoissonQuadratic, 2.0).unwrap();
    assert!(run_diffusion(&c, 0.05, FcParams::default(), None).is_err());
    let d = build_manufactured(CaseId::DiffusionRing, 2.0).unwrap();
    assert!(run_poisson(&d, 0.05, FcParams::default(), &GmresConfig::default()).is_err());
}

#[test]
fn short_manufactured_diffusion_run_is_accurate() {
    let c = build_manufactured(CaseId::DiffusionOscillatory, 1.0).unwrap();
    let settings = StepSettings { tau: 5e-7, t_final: 5e-6, snapshots: vec![2e-6] };
    let run = run_diffusion(&c, 0.02, FcParams::default(), Some(settings)).unwrap();
    assert_eq!(run.series.steps, 10);
    assert_eq!(run.series.snapshots[0].step, 4);
    assert!(run.l2.unwrap().value < 1e-5, "{:e}", run.l2.unwrap().value);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn orders_are_scale_invariant(p in 1.0f64..8.0, scale in 1e-6f64..1e3, n0 in 50.0f64..200.0) {
        let ns = [n0, 1.5 * n0, 2.0 * n0, 3.0 * n0];
        let errs: Vec<f64> = ns.iter().map(|n| scale * n.powf(-p)).collect();
        prop_assert!((least_squares_order(&ns, &errs) - p).abs() < 1e-9);
        let big: Vec<f64> = errs.iter().map(|e| 1e4 * e).collect();
        let (r1, r2) = (convergence_study(&ns, &errs).unwrap(), convergence_study(&ns, &big).unwrap());
        for (a, b) in r1.iter().zip(&r2).skip(1) {
            if a.eps2 >= 1e-13 {
                prop_assert!((a.order - b.order).abs() < 1e-9);
            }
        }
    }
}
