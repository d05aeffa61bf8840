use std::f64::consts::TAU;

use nlfc::fc2d::{FcDomain, FcParams};
use nlfc::geometry::{
    build_cartesian_grid, classify_points, offset_curve, sample_boundary, BoundaryCurve, GeometryError, PointLabel, Vec2,
};
use proptest::prelude::*;

#[test]
fn disk_labels_match_radial_distance() {
    let disk = BoundaryCurve::disk(1.0).unwrap();
    let h = 0.04;
    let (delta, strip) = (0.3, 0.5);
    let grid = build_cartesian_grid(&disk, h, 25, h).unwrap();
    let c = classify_points(&grid, &disk, delta, strip).unwrap();
    let mut counted = 0;
    for idx in 0..grid.len() {
        let r = grid.node_at(idx).norm();
        let expect = if r <= 1.0 {
            PointLabel::Interior
        } else if r <= 1.0 + delta {
            PointLabel::Collar
        } else if r <= 1.0 + delta + strip {
            PointLabel::ContinuationStrip
        } else {
            PointLabel::Exterior
        };
        let near_edge = [1.0, 1.0 + delta, 1.0 + delta + strip].iter().any(|e| (r - e).abs() < 1e-9);
        if !near_edge {
            assert_eq!(c.labels[idx], expect, "node {idx} at r = {r}");
            counted += 1;
        }
    }
    assert!(counted > grid.len() / 2);
    assert_eq!(c.interior.len() + c.collar.len() + c.strip.len(), c.labels.iter().filter(|l| **l != PointLabel::Exterior).count());
}

#[test]
fn offsets_of_a_disk_are_disks() {
    let disk = BoundaryCurve::disk(0.8).unwrap();
    let off = offset_curve(&disk, 0.25).unwrap();
    for k in 0..64 {
        let t = TAU * k as f64 / 64.0;
        assert!((off.position(t).norm() - 1.05).abs() < 1e-13);
        assert!((off.curvature(t) - 1.0 / 1.05).abs() < 1e-10);
    }
    assert!((off.perimeter() - TAU * 1.05).abs() < 1e-10);
}

#[test]
fn wide_collar_on_the_ring_exceeds_curvature_reach() {
    let err = offset_curve(&BoundaryCurve::ring(), 0.6).unwrap_err();
    assert!(matches!(err, GeometryError::OffsetReach { .. }), "{err}");
}

#[test]
fn proximity_map_covers_every_strip_node() {
    for curve in [BoundaryCurve::kite(), BoundaryCurve::ring(), BoundaryCurve::disk(1.0).unwrap()] {
        let dom = FcDomain::new(&curve, 0.02, FcParams::default()).unwrap();
        let prox = dom.plan.proximity();
        assert_eq!(prox.nodes, dom.plan.strip_nodes());
        assert_eq!(prox.nodes.len(), prox.param.len());
        assert!(!prox.nodes.is_empty());
        assert!(prox.param.iter().all(|&p| p < prox.b), "{}", curve.name());
    }
}

#[test]
fn tabulated_circle_matches_disk() {
    let pts: Vec<Vec2> = (0..32)
        .map(|j| {
            let t = TAU * j as f64 / 32.0;
            Vec2::new(t.cos(), t.sin())
        })
        .collect();
    let c = BoundaryCurve::from_samples(&pts).unwrap();
    let s = sample_boundary(&c, 100).unwrap();
    for p in 0..s.len() {
        assert!((s.point[p].norm() - 1.0).abs() < 1e-13);
        assert!((s.curvature[p] - 1.0).abs() < 1e-10);
        assert!((s.normal[p] - s.point[p]).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn disk_signed_distance_is_radial(r in 0.2f64..2.5, t in 0.0f64..TAU) {
        let disk = BoundaryCurve::disk(1.0).unwrap();
        let (theta, s) = disk.signed_distance(Vec2::new(r * t.cos(), r * t.sin()));
        prop_assert!((s - (r - 1.0)).abs() < 1e-12);
        let dt = (theta - t).rem_euclid(TAU);
        prop_assert!(dt.min(TAU - dt) < 1e-9);
    }

    #[test]
    fn kite_nearest_point_is_orthogonal(t in 0.0f64..TAU, s in -0.15f64..0.4) {
        let kite = BoundaryCurve::kite();
        let y = kite.position(t) + kite.normal(t) * s;
        let (theta, dist) = kite.signed_distance(y);
        prop_assert!((dist - s).abs() < 1e-10, "{dist} vs {s}");
        let r = y - kite.position(theta);
        prop_assert!(r.dot(kite.tangent(theta)).abs() < 1e-10);
    }

    #[test]
    fn normals_are_unit_and_orthogonal(t in 0.0f64..TAU, name in prop::sample::select(vec!["kite", "kite2", "star5", "ring", "ellipse"])) {
        let c = BoundaryCurve::from_catalog(name, &[]).unwrap();
        let (n, tg) = (c.normal(t), c.tangent(t));
        prop_assert!((n.norm() - 1.0).abs() < 1e-13);
        prop_assert!(n.dot(tg).abs() < 1e-13);
        // Counterclockwise orientation: the tangent is the normal rotated by +90°.
        prop_assert!((n.cross(tg) - 1.0).abs() < 1e-13);
    }
}
