//! Acceptance criteria, one printed PASS/FAIL line each.
//!
//! Criteria 1, 2 and 8 run with the default test invocation. The desk-scale
//! studies are ignored by default; run them with
//! `cargo test --release -p nlfc --test acceptance -- --include-ignored --test-threads=1`.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use nlfc::fc2d::{FcDomain, FcParams};
use nlfc::geometry::BoundaryCurve;
use nlfc::harness::{
    build_manufactured, convergence_study, least_squares_order, relative_l2_error, run_diffusion, run_poisson, CaseId,
    BOUNDARY_JUMPS, DIFFUSION_MULTIPLIERS, INTERFACE_JUMPS, POISSON_MULTIPLIERS, POISSON_R,
};
use nlfc::multipliers::{multiplier, multiplier_quadrature_oracle, KernelParams, MultiplierGrid};
use nlfc::nlops::{OperatorConfig, OperatorContext};
use nlfc::solvers::{ab4_step, gmres, Ab4History, GmresConfig, SolverError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: impl AsRef<str>) {
    println!("criterion {n}: {} {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(pass, "criterion {n} failed: {}", detail.as_ref());
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn fmt_orders(rows: &[nlfc::harness::ConvergenceRow]) -> String {
    rows.iter()
        .map(|r| format!("{}:{:.3e}({:.2})", r.resolution, r.eps2, r.order))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_1_multiplier_regression() {
    let nu_p = TAU * POISSON_R.0.hypot(POISSON_R.1);
    let nu_d = TAU * 15.6455 * 2f64.sqrt();
    let mut worst: f64 = 0.0;
    for (delta, nu, table) in [(0.4, nu_p, POISSON_MULTIPLIERS), (0.3, nu_d, DIFFUSION_MULTIPLIERS)] {
        for (beta, m) in table {
            let v = multiplier(nu, &KernelParams::new(delta, beta).unwrap()).unwrap();
            worst = worst.max(rel(v, m));
        }
    }
    report(1, worst <= 1e-10, format!("worst relative deviation over six table values {worst:.2e} (tol 1e-10)"));
}

#[test]
fn criterion_2_series_quadrature_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = KernelParams::new(rng.gen_range(0.1..0.5), rng.gen_range(1.0..3.9)).unwrap();
        let nu = rng.gen_range(0.0..2000.0);
        let (a, b) = (multiplier(nu, &p).unwrap(), multiplier_quadrature_oracle(nu, &p).unwrap());
        worst = worst.max(if b == 0.0 { a.abs() } else { rel(a, b) });
    }
    report(2, worst <= 1e-8, format!("200 samples, worst relative deviation {worst:.2e} (tol 1e-8)"));
}

#[test]
#[ignore = "desk-scale study; run with --release -- --include-ignored"]
fn criterion_3_fc_convergence() {
    let f = |x: f64, y: f64| -(x.powi(8) + y.powi(8)) * (8.0 * PI * x).sin() * (8.0 * PI * y).sin();
    let disk = BoundaryCurve::disk(1.0).unwrap();
    let ns = [100.0, 150.0, 200.0, 300.0];
    let mut pass = true;
    let mut detail = Vec::new();
    for d in [4usize, 5] {
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let dom = FcDomain::new(&disk, 2.0 / n, FcParams::with_order(d)).unwrap();
                let field = dom.extend(&dom.sample(f)).unwrap();
                relative_l2_error(&field, f, &disk).unwrap().value
            })
            .collect();
        let order = least_squares_order(&ns, &errs);
        let ok = order >= d as f64 + 0.5;
        pass &= ok;
        detail.push(format!(
            "d={d}: LS order {order:.2} (need {:.1}) [{}]",
            d as f64 + 0.5,
            fmt_orders(&convergence_study(&ns, &errs).unwrap())
        ));
    }
    report(3, pass, detail.join("; "));
}

#[test]
#[ignore = "desk-scale study; run with --release -- --include-ignored"]
fn criterion_4_poisson_exactness() {
    let mut pass = true;
    let mut detail = Vec::new();
    for beta in [1.0, 2.0, 3.0] {
        let case = build_manufactured(CaseId::PoissonQuadratic, beta).unwrap();
        let run = run_poisson(&case, 0.005, FcParams::default(), &GmresConfig::default()).unwrap();
        let e = run.max_error.unwrap();
        pass &= e <= 1e-7;
        detail.push(format!("β={beta}: {e:.2e} ({} it)", run.solution.report.iterations));
    }
    report(4, pass, format!("max-norm error, kite, h=0.005 (tol 1e-7): {}", detail.join(", ")));
}

#[test]
#[ignore = "desk-scale study; run with --release -- --include-ignored"]
fn criterion_5_poisson_convergence() {
    let ns = [300.0, 400.0, 500.0, 600.0];
    let mut pass = true;
    let mut detail = Vec::new();
    for beta in [1.2, 2.0, 2.5] {
        let case = build_manufactured(CaseId::PoissonOscillatory, beta).unwrap();
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                run_poisson(&case, 2.0 / n, FcParams::default(), &GmresConfig::default())
                    .unwrap()
                    .l2
                    .unwrap()
                    .value
            })
            .collect();
        let order = least_squares_order(&ns, &errs);
        pass &= order >= 6.0;
        detail.push(format!("β={beta}: LS order {order:.2} [{}]", fmt_orders(&convergence_study(&ns, &errs).unwrap())));
    }
    report(5, pass, format!("need order >= 6; {}", detail.join("; ")));
}

#[test]
#[ignore = "desk-scale study; run with --release -- --include-ignored"]
fn criterion_6_diffusion_convergence() {
    let hs = [0.02, 0.01, 0.005];
    let mut pass = true;
    let mut detail = Vec::new();
    for beta in [1.0, 2.0, 2.5] {
        let case = build_manufactured(CaseId::DiffusionOscillatory, beta).unwrap();
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| run_diffusion(&case, h, FcParams::default(), None).unwrap().l2.unwrap().value)
            .collect();
        let order = least_squares_order(&hs, &errs);
        pass &= order >= 5.5;
        if beta == 1.0 {
            let ratio = errs[0] / 1.13e-5;
            pass &= (1.0 / 3.0..=3.0).contains(&ratio);
            detail.push(format!("ε(0.02)/1.13e-5 = {ratio:.2}"));
        }
        detail.push(format!("β={beta}: LS order {order:.2} [{}]", fmt_orders(&convergence_study(&hs, &errs).unwrap())));
    }
    report(6, pass, format!("need order >= 5.5, τ=5e-7, T=1e-4; {}", detail.join("; ")));
}

fn within_band(value: f64, reference: f64) -> bool {
    if reference < 1e-4 {
        value <= 2.0 * reference && value >= 0.5 * reference
    } else {
        rel(value, reference) <= 0.05
    }
}

#[test]
#[ignore = "desk-scale study; run with --release -- --include-ignored"]
fn criterion_7_jump_tables() {
    let h = 0.005;
    let mut pass = true;
    let mut detail = Vec::new();
    for (id, table) in [(CaseId::PoissonBoundaryJump, BOUNDARY_JUMPS), (CaseId::PoissonInterfaceJump, INTERFACE_JUMPS)] {
        let mut maxima = Vec::new();
        for (beta, _, reference) in table {
            let case = build_manufactured(id, beta).unwrap();
            let run = run_poisson(&case, h, FcParams::default(), &GmresConfig::default()).unwrap();
            let j = if id == CaseId::PoissonBoundaryJump {
                run.boundary_jump(5).unwrap()
            } else {
                run.interior_jump(5).unwrap()
            };
            let ok = within_band(j.max, reference);
            pass &= ok;
            maxima.push(j.max);
            detail.push(format!("{id} β={beta}: {:.5} vs {reference} {}", j.max, if ok { "ok" } else { "out" }));
        }
        let monotone = maxima.windows(2).all(|w| w[1] < w[0]);
        pass &= monotone;
        detail.push(format!("{id} strictly decreasing: {monotone}"));
    }
    report(7, pass, format!("h={h}; {}", detail.join("; ")));
}

/// Dense LU with partial pivoting.
fn lu_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap();
        for j in 0..n {
            a.swap(k * n + j, p * n + j);
        }
        b.swap(k, p);
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

#[test]
fn criterion_8_property_suite() {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let ctx = OperatorContext::new(
        &BoundaryCurve::kite(),
        OperatorConfig::new(KernelParams::new(0.3, 2.0).unwrap(), 0.05, FcParams::default()),
    )
    .unwrap();
    let u = ctx.sample(|x, y| (1.7 * x).sin() * y);
    let v = ctx.sample(|x, y| x * x - (2.0 * y).cos());
    let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let w: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
    let (lu, lv, lw) = (
        ctx.apply_nonlocal_laplacian(&u).unwrap(),
        ctx.apply_nonlocal_laplacian(&v).unwrap(),
        ctx.apply_nonlocal_laplacian(&w).unwrap(),
    );
    let scale = lu.iter().chain(&lv).fold(1.0f64, |m, x| m.max(x.abs()));
    check("linearity", (0..lw.len()).all(|k| (lw[k] - a * lu[k] - b * lv[k]).abs() < 1e-11 * scale * 5.0));
    let lc = ctx.apply_nonlocal_laplacian(&vec![2.5; u.len()]).unwrap();
    // Exact up to the continuation error of the blended constant.
    check("constant annihilation", lc.iter().all(|x| x.abs() < 1e-6));

    let classical = KernelParams::new(0.3, 4.0).unwrap();
    check(
        "classical limit",
        (0..50).all(|_| {
            let nu = rng.gen_range(0.0..500.0);
            multiplier(nu, &classical).unwrap() == -nu * nu
        }),
    );
    check(
        "m <= 0 and m(0) = 0",
        (0..200).all(|_| {
            let p = KernelParams::new(rng.gen_range(0.05..1.0), rng.gen_range(0.5..4.0)).unwrap();
            multiplier(rng.gen_range(0.0..3000.0), &p).unwrap() <= 0.0 && multiplier(0.0, &p).unwrap() == 0.0
        }),
    );
    let mg = MultiplierGrid::new(16, 12, 1.0, 1.0, KernelParams::new(0.2, 2.2).unwrap()).unwrap();
    check("grid multipliers nonpositive", mg.full_values().iter().all(|m| *m <= 0.0));

    let mut gm_worst: f64 = 0.0;
    for _ in 0..5 {
        let n = 50;
        let mut mat: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0) / (n as f64).sqrt()).collect();
        for i in 0..n {
            mat[i * n + i] += 3.0;
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, _) = gmres(
            |p: &[f64], out: &mut [f64]| {
                for i in 0..n {
                    out[i] = (0..n).map(|j| mat[i * n + j] * p[j]).sum();
                }
                Ok::<(), SolverError>(())
            },
            &rhs,
            None,
            None,
            &GmresConfig::default(),
        )
        .unwrap();
        let y = lu_solve(mat.clone(), rhs.clone());
        let num: f64 = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum();
        let den: f64 = y.iter().map(|q| q * q).sum();
        gm_worst = gm_worst.max((num / den).sqrt());
    }
    check("GMRES vs dense LU", gm_worst < 1e-10);

    let ab4_err = |tau: f64| {
        let mut hist = Ab4History::new();
        for k in 0..4 {
            hist.push(vec![-(-(k as f64) * tau).exp()]);
        }
        let mut s = vec![(-3.0 * tau).exp()];
        for _ in 3..(1.0 / tau).round() as usize {
            s = ab4_step(&s, &hist, tau).unwrap();
            hist.push(vec![-s[0]]);
        }
        (s[0] - (-1.0f64).exp()).abs()
    };
    let slope = (ab4_err(0.01) / ab4_err(0.005)).log2();
    check("AB4 slope", (3.7..=4.3).contains(&slope));

    let dom = FcDomain::new(&BoundaryCurve::kite(), 0.05, FcParams::default()).unwrap();
    let f = dom.sample(|x, y| (x + 2.0 * y).sin());
    let ext = dom.plan.extend(&f).unwrap();
    check("FC interior exactness", dom.plan.data_nodes().iter().all(|&i| ext[i] == f[i]));
    let prox = dom.plan.proximity();
    check(
        "proximity-map totality",
        prox.nodes == dom.plan.strip_nodes() && prox.param.iter().all(|&p| p < prox.b),
    );

    let n_checks = 10;
    report(
        8,
        failures.is_empty(),
        format!(
            "{}/{n_checks} properties hold (GMRES/LU {gm_worst:.1e}, AB4 slope {slope:.3}){}",
            n_checks - failures.len(),
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    );
}

#[test]
#[ignore = "desk-scale study; run with --release -- --include-ignored"]
fn criterion_9_apply_scaling() {
    let kernel = KernelParams::new(0.4, 1.2).unwrap();
    let disk = BoundaryCurve::disk(1.0).unwrap();
    let times: Vec<f64> = [200.0, 400.0, 800.0]
        .iter()
        .map(|&n| {
            let ctx = OperatorContext::new(&disk, OperatorConfig::new(kernel, 2.0 / n, FcParams::default())).unwrap();
            let u = ctx.sample(|x, y| (3.0 * x).sin() + y);
            let mut out = vec![0.0; ctx.layout().n_interior()];
            ctx.apply_into(&u, &mut out).unwrap();
            let mut samples: Vec<f64> = (0..7)
                .map(|_| {
                    let t = Instant::now();
                    ctx.apply_into(&u, &mut out).unwrap();
                    t.elapsed().as_secs_f64()
                })
                .collect();
            samples.sort_by(f64::total_cmp);
            samples[samples.len() / 2]
        })
        .collect();
    let ratios = [times[1] / times[0], times[2] / times[1]];
    let pass = ratios.iter().all(|r| *r <= 4.6);
    report(
        9,
        pass,
        format!(
            "median apply times {:.1} / {:.1} / {:.1} ms at N=200/400/800, ratios {:.2}, {:.2} (max 4.6)",
            times[0] * 1e3,
            times[1] * 1e3,
            times[2] * 1e3,
            ratios[0],
            ratios[1]
        ),
    );
}
