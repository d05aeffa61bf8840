use std::f64::consts::PI;
use std::sync::OnceLock;

use nlfc::fc2d::{line_stencil_weights, FcDomain, FcParams, FourierField, NormalEvaluation};
use nlfc::geometry::{BoundaryCurve, Vec2};
use nlfc::harness::relative_l2_error;
use proptest::prelude::*;

fn kite_domain() -> &'static FcDomain {
    static DOM: OnceLock<FcDomain> = OnceLock::new();
    DOM.get_or_init(|| FcDomain::new(&BoundaryCurve::kite(), 0.04, FcParams::default()).unwrap())
}

fn benchmark(x: f64, y: f64) -> f64 {
    -(x.powi(8) + y.powi(8)) * (8.0 * PI * x).sin() * (8.0 * PI * y).sin()
}

fn disk_error(n: usize, params: FcParams) -> f64 {
    let disk = BoundaryCurve::disk(1.0).unwrap();
    let dom = FcDomain::new(&disk, 2.0 / n as f64, params).unwrap();
    let field = dom.extend(&dom.sample(benchmark)).unwrap();
    relative_l2_error(&field, benchmark, &disk).unwrap().value
}

#[test]
fn benchmark_error_decreases_under_refinement() {
    let e1 = disk_error(60, FcParams::default());
    let e2 = disk_error(120, FcParams::default());
    assert!(e2 < e1 / 8.0, "{e1:e} -> {e2:e}");
}

#[test]
fn interpolated_normals_agree_with_direct_evaluation() {
    let mut p = FcParams::default();
    let direct = disk_error(100, p);
    p.evaluation = NormalEvaluation::Interpolated;
    let interp = disk_error(100, p);
    assert!(interp < 3.0 * direct && direct < 3.0 * interp, "{direct:e} vs {interp:e}");
}

#[test]
fn smooth_extension_has_decaying_spectrum() {
    let dom = kite_domain();
    let field = dom.extend(&dom.sample(|x, y| (1.3 * x - 0.4 * y).cos() + x * y)).unwrap();
    let g = field.grid;
    // Relative energy in the outer half of the frequency box.
    let (mut hi, mut all) = (0.0, 0.0);
    for (idx, c) in field.coeffs.iter().enumerate() {
        let (k, l) = (idx / g.ny, idx % g.ny);
        let l = l.min(g.ny - l);
        let e = c.norm_sqr();
        all += e;
        if 4 * k > g.nx || 4 * l > g.ny {
            hi += e;
        }
    }
    assert!(hi / all < 1e-8, "{:e}", hi / all);
}

#[test]
fn star_domain_is_supported() {
    let dom = FcDomain::new(&BoundaryCurve::star5(), 0.02, FcParams::default()).unwrap();
    let f = |x: f64, y: f64| (0.3 * x).sin() * (0.2 * y).cos();
    let field = dom.extend(&dom.sample(f)).unwrap();
    let err = relative_l2_error(&field, f, &dom.curve).unwrap();
    assert!(err.value < 1e-6, "{:e}", err.value);
}

#[test]
fn bad_parameters_are_rejected() {
    let mut p = FcParams::default();
    p.c = 2;
    assert!(p.validate().is_err());
    assert!(FcParams::with_order(13).validate().is_err());
    assert_eq!(FcParams::with_order(5).m, 6);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn interior_data_are_reproduced(a in -2.0f64..2.0, b in -2.0f64..2.0, w in 0.5f64..4.0) {
        let dom = kite_domain();
        let f = dom.sample(|x, y| a * (w * x).sin() + b * y * y);
        let ext = dom.plan.extend(&f).unwrap();
        for &i in dom.plan.data_nodes() {
            prop_assert_eq!(ext[i], f[i]);
        }
        let field = FourierField::from_values(*dom.grid(), ext.clone());
        let back = field.evaluate(&dom.plan.data_nodes().iter().take(50).map(|&i| dom.grid().node_at(i)).collect::<Vec<_>>());
        for (v, &i) in back.iter().zip(dom.plan.data_nodes()) {
            prop_assert!((v - ext[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn continuation_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let dom = kite_domain();
        let f = dom.sample(|x, y| (2.0 * x).cos() * y);
        let g = dom.sample(|x, y| x * x - (3.0 * y).sin());
        let comb: Vec<f64> = f.iter().zip(&g).map(|(u, v)| a * u + b * v).collect();
        let (ef, eg, ec) = (dom.plan.extend(&f).unwrap(), dom.plan.extend(&g).unwrap(), dom.plan.extend(&comb).unwrap());
        let scale = ef.iter().chain(&eg).fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..ec.len() {
            prop_assert!((ec[i] - (a * ef[i] + b * eg[i])).abs() < 1e-12 * scale * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn line_stencils_reproduce_low_degree_polynomials(t in 0.0f64..(2.0 * PI), c in prop::array::uniform6(-1.0f64..1.0)) {
        let dom = kite_domain();
        let grid = dom.grid();
        let mask = dom.classification.data_mask();
        let q = dom.curve.position(t);
        let inward = -dom.curve.normal(t);
        let p = |v: Vec2| c[0] + c[1] * v.x + c[2] * v.y + c[3] * v.x * v.y + c[4] * v.x.powi(4) + c[5] * v.y.powi(3) * v.x;
        let targets = [0.0, 0.02, 0.05];
        let rows = line_stencil_weights(grid, &mask, q, inward, &targets, 5).unwrap();
        for (row, &s) in rows.iter().zip(&targets) {
            let v: f64 = row.iter().map(|&(i, w)| w * p(grid.node_at(i))).sum();
            prop_assert!((v - p(q + inward * s)).abs() < 1e-10, "{} vs {}", v, p(q + inward * s));
        }
    }
}
