use nlfc::fc2d::FcParams;
use nlfc::geometry::BoundaryCurve;
use nlfc::multipliers::KernelParams;
use nlfc::nlops::{OperatorConfig, OperatorContext};
use nlfc::solvers::{
    ab4_step, check_stability, gmres, integrate, rk4_step, solve_diffusion, solve_poisson, Ab4History, DiffusionProblem,
    GmresConfig, SolverError, StepSettings,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense LU with partial pivoting, the direct-solve oracle.
fn lu_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap();
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            for j in k..n {
                a[i * n + j] -= f * a[k * n + j];
            }
            b[i] -= f * b[k];
        }
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * b[j]).sum();
        b[i] = (b[i] - s) / a[i * n + i];
    }
    b
}

fn matvec(a: &[f64], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        y[i] = (0..n).map(|j| a[i * n + j] * x[j]).sum();
    }
}

fn random_system(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0) / (n as f64).sqrt()).collect();
    for i in 0..n {
        a[i * n + i] += 3.0;
    }
    let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (a, b)
}

fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = y.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

#[test]
fn gmres_matches_dense_lu_on_random_systems() {
    for seed in 0..8 {
        let (a, b) = random_system(seed, 50);
        let (x, rep) = gmres(
            |v, out| {
                matvec(&a, v, out);
                Ok::<(), SolverError>(())
            },
            &b,
            None,
            None,
            &GmresConfig::default(),
        )
        .unwrap();
        let direct = lu_solve(a.clone(), b.clone());
        assert!(rel_diff(&x, &direct) < 1e-10, "seed {seed}: {:e}", rel_diff(&x, &direct));
        assert!(rep.iterations <= 50);
    }
}

#[test]
fn residual_history_is_monotone_within_a_cycle() {
    let (a, b) = random_system(42, 80);
    let cfg = GmresConfig {
        restart: 20,
        ..GmresConfig::default()
    };
    let (x, rep) = gmres(
        |v, out| {
            matvec(&a, v, out);
            Ok::<(), SolverError>(())
        },
        &b,
        None,
        None,
        &cfg,
    )
    .unwrap();
    assert!(rep.restarts >= 1);
    for cycle in rep.history.chunks(cfg.restart) {
        assert!(cycle.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
    assert!(rel_diff(&x, &lu_solve(a, b)) < 1e-10);
}

#[test]
fn exhausted_budget_returns_best_iterate() {
    let (a, b) = random_system(3, 60);
    let cfg = GmresConfig {
        restart: 3,
        max_iter: 6,
        ..GmresConfig::default()
    };
    let err = gmres(
        |v, out| {
            matvec(&a, v, out);
            Ok::<(), SolverError>(())
        },
        &b,
        None,
        None,
        &cfg,
    )
    .unwrap_err();
    match err {
        SolverError::NotConverged { iterations, residual, best, history, .. } => {
            assert_eq!(iterations, 6);
            assert_eq!(history.len(), 6);
            assert!(residual < 1.0);
            assert_eq!(best.0.len(), 60);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn right_scaling_gives_the_same_solution() {
    let (a, b) = random_system(9, 40);
    let d: Vec<f64> = (0..40).map(|i| 0.5 + (i % 3) as f64).collect();
    let run = |p: Option<&[f64]>| {
        gmres(
            |v, out| {
                matvec(&a, v, out);
                Ok::<(), SolverError>(())
            },
            &b,
            None,
            p,
            &GmresConfig::default(),
        )
        .unwrap()
        .0
    };
    assert!(rel_diff(&run(Some(&d)), &run(None)) < 1e-10);
}

#[test]
fn ab4_global_order_on_exponential_decay() {
    // Exact startup values, then AB4 alone to t = 1.
    let err = |tau: f64| {
        let steps = (1.0 / tau).round() as usize;
        let mut hist = Ab4History::new();
        for k in 0..4 {
            hist.push(vec![-(-(k as f64) * tau).exp()]);
        }
        let mut u = vec![(-3.0 * tau).exp()];
        for _ in 3..steps {
            u = ab4_step(&u, &hist, tau).unwrap();
            hist.push(vec![-u[0]]);
        }
        (u[0] - (-1.0f64).exp()).abs()
    };
    let (e1, e2, e3) = (err(0.01), err(0.005), err(0.0025));
    for (a, b) in [(e1, e2), (e2, e3)] {
        let slope = (a / b).log2();
        assert!((3.7..=4.3).contains(&slope), "slope {slope}");
    }
}

#[test]
fn rk4_startup_plus_ab4_tracks_exponential() {
    let settings = StepSettings {
        tau: 1e-3,
        t_final: 0.5,
        snapshots: vec![0.25, 0.1004],
    };
    let ts = integrate(
        |_, u, out| {
            out[0] = -2.0 * u[0];
            Ok(())
        },
        &[1.0],
        &settings,
    )
    .unwrap();
    assert_eq!(ts.steps, 500);
    assert!((ts.u[0] - (-1.0f64).exp()).abs() < 1e-11);
    assert_eq!(ts.snapshots[1].step, 100);
    assert!((ts.snapshots[0].u[0] - (-0.5f64).exp()).abs() < 1e-11);
}

#[test]
fn rk4_with_zero_data_stays_zero() {
    let mut f = |_: f64, _: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        Ok(())
    };
    let mut u = vec![0.0; 5];
    for k in 0..3 {
        u = rk4_step(&mut f, k as f64 * 0.1, &u, 0.1).unwrap();
    }
    assert!(u.iter().all(|v| *v == 0.0));
}

#[test]
fn unstable_growth_is_detected() {
    let err = integrate(
        |_, u, out| {
            out[0] = 50.0 * u[0];
            Ok(())
        },
        &[1.0],
        &StepSettings {
            tau: 0.1,
            t_final: 10.0,
            snapshots: vec![],
        },
    )
    .unwrap_err();
    assert!(matches!(err, SolverError::Blowup { .. }), "{err}");
}

fn small_kite(beta: f64) -> OperatorContext {
    let cfg = OperatorConfig::new(KernelParams::new(0.3, beta).unwrap(), 0.05, FcParams::default());
    OperatorContext::new(&BoundaryCurve::kite(), cfg).unwrap()
}

#[test]
fn zero_data_give_zero_solutions() {
    let ctx = small_kite(2.0);
    let (ni, nc) = (ctx.layout().n_interior(), ctx.layout().n_collar());
    let sol = solve_poisson(&ctx, &vec![0.0; ni], &vec![0.0; nc], &GmresConfig::default()).unwrap();
    assert!(sol.u.iter().all(|v| *v == 0.0));
    let problem = DiffusionProblem {
        u0: vec![0.0; ni + nc],
        source: Box::new(|_, out: &mut [f64]| out.iter_mut().for_each(|o| *o = 0.0)),
        collar: Box::new(|_, out: &mut [f64]| out.iter_mut().for_each(|o| *o = 0.0)),
        settings: StepSettings {
            tau: 1e-6,
            t_final: 2e-5,
            snapshots: vec![],
        },
    };
    let ts = solve_diffusion(&ctx, &problem).unwrap();
    assert!(ts.u.iter().all(|v| *v == 0.0));
}

#[test]
fn collar_values_are_imposed_at_every_snapshot() {
    let ctx = small_kite(1.5);
    let b = ctx.sample_collar(|x, y| x * x - y);
    let u0 = ctx.sample(|x, y| x * x - y + (3.0 * x).sin() * 0.1);
    let b2 = b.clone();
    let problem = DiffusionProblem {
        u0,
        source: Box::new(|_, out: &mut [f64]| out.iter_mut().for_each(|o| *o = 1.0)),
        collar: Box::new(move |_, out: &mut [f64]| out.copy_from_slice(&b2)),
        settings: StepSettings {
            tau: 1e-5,
            t_final: 2e-4,
            snapshots: vec![0.0, 3e-5, 1e-4],
        },
    };
    let ts = solve_diffusion(&ctx, &problem).unwrap();
    let ni = ctx.layout().n_interior();
    for s in ts.snapshots.iter().chain(std::iter::once(&nlfc::solvers::Snapshot {
        step: ts.steps,
        t: ts.t,
        u: ts.u.clone(),
    })) {
        assert_eq!(&s.u[ni..], &b[..], "t = {}", s.t);
    }
}

#[test]
fn oversized_step_is_rejected() {
    let ctx = small_kite(2.0);
    assert!(matches!(check_stability(&ctx, 1.0), Err(SolverError::Unstable { .. })));
    assert!(check_stability(&ctx, 1e-9).unwrap().is_none());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rk4_step_is_degree_four_taylor(lambda in -5.0f64..5.0, tau in 0.001f64..0.5) {
        let mut f = |_: f64, u: &[f64], out: &mut [f64]| {
            out[0] = lambda * u[0];
            Ok(())
        };
        let u = rk4_step(&mut f, 0.0, &[1.0], tau).unwrap();
        let z = lambda * tau;
        let taylor = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        prop_assert!((u[0] - taylor).abs() <= 1e-14 * taylor.abs().max(1.0));
    }

    #[test]
    fn gmres_solves_diagonal_systems(n in 2usize..40, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, rep) = gmres(
            |v, out| {
                for i in 0..v.len() {
                    out[i] = d[i] * v[i];
                }
                Ok::<(), SolverError>(())
            },
            &b,
            None,
            None,
            &GmresConfig::default(),
        )
        .unwrap();
        prop_assert!(rep.residual <= 1e-12);
        for i in 0..n {
            prop_assert!((x[i] - b[i] / d[i]).abs() < 1e-10);
        }
    }
}
