use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use nlfc::fc2d::FcParams;
use nlfc::geometry::{BoundaryCurve, CartesianGrid};
use nlfc::multipliers::{multiplier, KernelParams, MultiplierGrid};
use nlfc::nlops::{apply_periodic, ExtensionDomain, OperatorConfig, OperatorContext};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kite_ctx() -> &'static OperatorContext {
    static CTX: OnceLock<OperatorContext> = OnceLock::new();
    CTX.get_or_init(|| {
        let cfg = OperatorConfig::new(KernelParams::new(0.3, 2.5).unwrap(), 0.04, FcParams::default());
        OperatorContext::new(&BoundaryCurve::kite(), cfg).unwrap()
    })
}

fn disk_ctx(beta: f64, h: f64, extension: ExtensionDomain) -> OperatorContext {
    let mut cfg = OperatorConfig::new(KernelParams::new(0.4, beta).unwrap(), h, FcParams::default());
    cfg.extension = extension;
    OperatorContext::new(&BoundaryCurve::disk(1.0).unwrap(), cfg).unwrap()
}

fn max_dev(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
}

#[test]
fn periodic_modes_are_eigenfunctions() {
    let (nx, ny, h) = (48, 40, 0.05);
    let grid = CartesianGrid::new(-1.0, -0.7, h, nx, ny).unwrap();
    let (lx, ly) = grid.periods();
    let kp = KernelParams::new(0.35, 1.7).unwrap();
    let mg = MultiplierGrid::new(nx, ny, lx, ly, kp).unwrap();
    let (p, q) = (5.0, 3.0);
    let u: Vec<f64> = (0..grid.len())
        .map(|i| {
            let n = grid.node_at(i);
            (TAU * p * n.x / lx).cos() * (TAU * q * n.y / ly + 0.3).sin()
        })
        .collect();
    let m = multiplier(TAU * (p / lx).hypot(q / ly), &kp).unwrap();
    let lu = apply_periodic(&mg, &u);
    let expect: Vec<f64> = u.iter().map(|v| m * v).collect();
    assert!(max_dev(&lu, &expect) < 1e-11 * m.abs(), "{:e}", max_dev(&lu, &expect));
}

#[test]
fn classical_limit_reproduces_laplacian_of_quadratic() {
    let ctx = disk_ctx(4.0, 0.025, ExtensionDomain::Collar);
    let lu = ctx.apply_nonlocal_laplacian(&ctx.sample(|x, y| 3.0 * x * x - y * y + x)).unwrap();
    // The classical symbol amplifies continuation error by |ν|².
    assert!(lu.iter().all(|v| (v - 4.0).abs() < 1e-4), "{:e}", lu.iter().fold(0.0f64, |a, v| a.max((v - 4.0).abs())));
}

#[test]
fn manufactured_wave_is_scaled_by_its_multiplier() {
    let ctx = disk_ctx(1.2, 0.02, ExtensionDomain::Collar);
    let kp = ctx.config().kernel;
    let (r1, r2) = (2.0, 3.0);
    let m = multiplier(TAU * f64::hypot(r1, r2), &kp).unwrap();
    let w = |x: f64, y: f64| (TAU * r1 * x).sin() * (TAU * r2 * y).sin();
    let lu = ctx.apply_nonlocal_laplacian(&ctx.sample(w)).unwrap();
    let ex = ctx.sample_interior(|x, y| m * w(x, y));
    assert!(max_dev(&lu, &ex) < 5e-5 * m.abs(), "{:e}", max_dev(&lu, &ex) / m.abs());
}

#[test]
fn boundary_continuation_keeps_data_and_roughly_agrees() {
    let f = |x: f64, y: f64| (PI * x).cos() * (0.5 + y * y);
    let a = disk_ctx(2.0, 0.02, ExtensionDomain::Collar);
    let b = disk_ctx(2.0, 0.02, ExtensionDomain::Boundary);
    let u = b.sample(f);
    let ext = b.extend(&u).unwrap();
    assert_eq!(b.layout().gather(&ext), u);
    let la = a.apply_nonlocal_laplacian(&a.sample(f)).unwrap();
    let lb = b.apply_nonlocal_laplacian(&u).unwrap();
    assert_eq!(la.len(), lb.len());
    // The seam between blended values and collar data at Γ + δn limits agreement.
    let scale = la.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max_dev(&la, &lb) < 1e-2 * scale, "{:e}", max_dev(&la, &lb) / scale);
}

#[test]
fn wrong_lengths_are_reported() {
    let ctx = kite_ctx();
    assert!(ctx.apply_nonlocal_laplacian(&[1.0, 2.0]).is_err());
    assert!(ctx.assemble_rhs(&[0.0], &[0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn operator_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
        let ctx = kite_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c1, c2) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0));
        let u = ctx.sample(|x, y| (c1 * x).sin() + y * y);
        let v = ctx.sample(|x, y| (c2 * y).cos() * x);
        let w: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
        let (lu, lv, lw) = (
            ctx.apply_nonlocal_laplacian(&u).unwrap(),
            ctx.apply_nonlocal_laplacian(&v).unwrap(),
            ctx.apply_nonlocal_laplacian(&w).unwrap(),
        );
        let scale = lu.iter().chain(&lv).fold(1.0f64, |m, x| m.max(x.abs())) * (1.0 + a.abs() + b.abs());
        for k in 0..lw.len() {
            prop_assert!((lw[k] - (a * lu[k] + b * lv[k])).abs() < 1e-11 * scale);
        }
    }

    #[test]
    fn constants_are_annihilated(c in -10.0f64..10.0) {
        let ctx = kite_ctx();
        let lu = ctx.apply_nonlocal_laplacian(&vec![c; ctx.layout().len()]).unwrap();
        // Zero up to the continuation error of the blended constant at this h.
        prop_assert!(lu.iter().all(|v| v.abs() < 1e-6 * c.abs().max(1.0)));
    }

    #[test]
    fn periodic_operator_is_negative_semidefinite(seed in 0u64..10_000, beta in 0.8f64..3.9) {
        let (nx, ny) = (24, 18);
        let mg = MultiplierGrid::new(nx, ny, 1.2, 0.9, KernelParams::new(0.2, beta).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lu = apply_periodic(&mg, &u);
        let ip: f64 = u.iter().zip(&lu).map(|(a, b)| a * b).sum();
        prop_assert!(ip <= 1e-10, "{}", ip);
        let sum: f64 = lu.iter().sum();
        prop_assert!(sum.abs() < 1e-9);
    }
}
