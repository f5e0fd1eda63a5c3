//! Cross-module checks: independent routes to the same quantity.

use vdmlab::chebyshev::{cheb_constant, submultiplicativity_probe, ChebMode, LawsonOptions};
use vdmlab::domain_models::{MeasureModel, PointSet, SamplerModel, SetModel, WeightModel};
use vdmlab::fekete::{diameter_entry, DiameterKind, SearchParams};
use vdmlab::montecarlo::{exact_atomic_zd, z_d_mc};
use vdmlab::rumely::{weighted_identity_check, EquilibriumModel};

fn opts() -> LawsonOptions {
    LawsonOptions::default()
}

#[test]
fn mc_covers_exact_value_in_most_replications() {
    let pts = PointSet::real_line(&[-1.0, -0.3, 0.4, 1.0]).unwrap();
    let masses = vec![0.2, 0.3, 0.1, 0.4];
    let sampler = SamplerModel::Categorical {
        points: pts.clone(),
        masses: masses.clone(),
    };
    let w = WeightModel::power(0.3, 2.0);
    for d in 1..=2u32 {
        let exact = exact_atomic_zd(&pts, &masses, &w, d).unwrap().magnitude();
        let covered = (0..100u64)
            .filter(|&s| z_d_mc(&sampler, &w, d, 2000, 1000 + s).unwrap().covers(exact, 3.0))
            .count();
        assert!(covered >= 95, "d={d}: {covered}/100");
    }
}

#[test]
fn submultiplicativity_on_sampled_pairs() {
    let interval = SetModel::Interval { a: -1.0, b: 1.0 }.mesh(201).unwrap();
    let circle = SetModel::Circle { radius: 1.0 }.mesh(64).unwrap();
    for mesh in [&interval, &circle] {
        for (a, b) in [(1u32, 1u32), (1, 3), (2, 2), (3, 4), (2, 6)] {
            let (lhs, rhs) = submultiplicativity_probe(mesh, ChebMode::Plain, &[a], &[b], opts()).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-4), "alpha={a} beta={b}: {lhs} > {rhs}");
        }
    }
    let ball = SetModel::ComplexBall { dim: 2, radius: 1.0, shells: 0 }.mesh(10).unwrap();
    for (a, b) in [([1u32, 0u32], [0u32, 1u32]), ([1, 1], [1, 0]), ([2, 0], [0, 2])] {
        let (lhs, rhs) = submultiplicativity_probe(&ball, ChebMode::Plain, &a, &b, opts()).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-4), "{a:?} {b:?}: {lhs} > {rhs}");
    }
}

#[test]
fn circled_sets_plain_equals_homogeneous() {
    let torus = SetModel::Torus { radii: vec![1.0, 0.5] }.mesh(16).unwrap();
    for alpha in [[1u32, 0u32], [1, 2], [3, 1], [0, 4], [2, 4]] {
        let p = cheb_constant(&torus, ChebMode::Plain, &alpha, opts(), None).unwrap();
        let h = cheb_constant(&torus, ChebMode::Homogeneous, &alpha, opts(), None).unwrap();
        assert!((p.y - h.y).abs() <= 1e-4 * h.y, "{alpha:?}: {} vs {}", p.y, h.y);
    }
}

#[test]
fn circle_homogeneous_diameter_is_one() {
    let params = SearchParams {
        restarts: 2,
        seed: 3,
        ..SearchParams::default()
    };
    let circle = SetModel::Circle { radius: 1.0 }.mesh(64).unwrap();
    let unit = WeightModel::unit();
    for d in [4u32, 8] {
        let p = diameter_entry(&circle, DiameterKind::Plain, &unit, d, &params).unwrap();
        let h = diameter_entry(&circle, DiameterKind::Homogeneous, &unit, d, &params).unwrap();
        // one variable: a single homogeneous monomial, so d^H is |z|^d = 1
        assert!((h.root - 1.0).abs() < 1e-12);
        assert!(p.root >= 1.0);
    }
}

#[test]
fn identity_gap_ignores_constant_weight_shift() {
    let mesh = SetModel::Interval { a: -1.0, b: 1.0 }.mesh(101).unwrap();
    let params = SearchParams {
        restarts: 1,
        seed: 4,
        ..SearchParams::default()
    };
    let eq = EquilibriumModel::Semicircle { a: 1.0 };
    let w = WeightModel::power(1.0, 2.0);
    let base = weighted_identity_check(&mesh, &w, Some(&eq), 8, &params, opts()).unwrap();
    let shifted = weighted_identity_check(&mesh, &w.clone().with_offset(0.3), Some(&eq), 8, &params, opts()).unwrap();
    assert!((base.gap - shifted.gap).abs() <= 1e-3, "{} vs {}", base.gap, shifted.gap);
}

#[test]
fn lift_and_product_routes_on_quadrature() {
    use vdmlab::orthopoly::{z_d_lift, z_d_product, ZdMethod};
    let mu = MeasureModel::torus_arc(&[1.0, 1.0], 9).unwrap();
    let w = WeightModel::unit();
    for d in 1..=4 {
        let a = z_d_product(&mu, &w, d, ZdMethod::Cholesky).unwrap();
        let b = z_d_lift(&mu, &w, d, 2 * d as usize + 1).unwrap();
        assert!((a.zd.log_magnitude - b.zd.log_magnitude).abs() < 1e-8);
    }
}
