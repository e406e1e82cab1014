mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use sectorlab::symbol::*;

#[test]
fn quadratic_symbol_values() {
    let m = DispersionSymbol::power(2, 2.0, 4.0, 1.0).unwrap();
    assert_eq!(m.eval(&[3.0, 4.0], 0).unwrap(), SymbolValue::Scalar(25.0));
    assert_eq!(m.eval(&[3.0, 4.0], 1).unwrap(), SymbolValue::Vector(vec![6.0, 8.0]));
    match m.eval(&[3.0, 4.0], 2).unwrap() {
        SymbolValue::Matrix(h) => assert!((h - DMatrix::identity(2, 2) * 2.0).amax() < 1e-12),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn quartic_gradient() {
    let m = DispersionSymbol::power(2, 4.0, 4.0, 1.0).unwrap();
    let g = m.gradient(&[1.0, 0.0]);
    assert!((g[0] - 4.0).abs() < 1e-12 && g[1].abs() < 1e-12);
}

#[test]
fn mixed_symbol_matches_finite_differences() {
    let m = DispersionSymbol::mixed(2, &[(1.0, 2.0), (1.0, 4.0)], 4.0, 16.0, 1.0).unwrap();
    let mut r = common::rng(5);
    let points: Vec<Vec<f64>> = (0..200).map(|_| vec![r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)]).collect();
    assert!(m.finite_difference_error(&points) < 1e-6);
    for xi in &points {
        let h = m.hessian(xi);
        assert!((h.clone() - h.transpose()).amax() < 1e-12);
    }
}

#[test]
fn non_finite_input_is_a_domain_error() {
    let m = DispersionSymbol::power(1, 2.0, 4.0, 1.0).unwrap();
    assert!(matches!(m.eval(&[f64::INFINITY], 0), Err(sectorlab::Error::Domain(_))));
    assert!(m.eval(&[1.0, 2.0], 0).is_err());
}

/// For `|ξ|²` in `d = 2` with `C_Λ = 4` the normalized ratios are explicit:
/// `max|∂ᵢm|/(4r) = 1/2` on an axis, `2/4`, `0`, `(r/4)/(2r) = 1/8`, `(1/4)/2 = 1/8`.
#[test]
fn quadratic_symbol_passes_with_known_ratios() {
    let m = DispersionSymbol::power(2, 2.0, 4.0, 1.0).unwrap();
    let rep = check_order_conditions(&m, &ConditionSampling::default()).unwrap();
    assert!(rep.passed);
    assert!(rep.violating_points.is_empty());
    let w = &rep.worst_ratio;
    assert!(w.first_upper <= 0.5 + 1e-12 && w.first_upper > 0.35);
    assert!((w.second_upper - 0.5).abs() < 1e-12);
    assert!(w.third_upper < 1e-6);
    assert!((w.gradient_lower - 0.125).abs() < 1e-12);
    assert!((w.determinant_lower - 0.125).abs() < 1e-12);
}

#[test]
fn degenerate_symbol_fails_determinant() {
    let m = DispersionSymbol::linear(2).unwrap();
    let rep = check_order_conditions(&m, &ConditionSampling::default()).unwrap();
    assert!(!rep.passed);
    assert!(!rep.violating_points.is_empty());
    assert!(rep.worst_ratio.determinant_lower.is_infinite());
}

#[test]
fn cubic_perturbation_passes_for_large_constant() {
    let m = DispersionSymbol::mixed(2, &[(1.0, 2.0), (0.1, 3.0)], 3.0, 4.0, 1.0).unwrap();
    let rep = check_order_conditions(&m, &ConditionSampling::default()).unwrap();
    let needed = rep.required_c_lambda;
    assert!(needed.is_finite() && needed > 1.0);
    let pass = check_order_conditions(&m.with_constants(needed * 1.001, 1.0).unwrap(), &ConditionSampling::default()).unwrap();
    assert!(pass.passed, "{:?}", pass.worst_ratio);
    let fail = check_order_conditions(&m.with_constants((needed * 0.99).max(1.0), 1.0).unwrap(), &ConditionSampling::default()).unwrap();
    assert!(!fail.passed);
}

#[test]
fn power_symbols_never_violate_for_large_constant() {
    for sigma in [2.0f64, 2.5, 3.0, 4.0] {
        let c = 4.0 * f64::max(sigma.powi(3), sigma.powi(-3));
        for d in 1..=3 {
            let m = DispersionSymbol::power(d, sigma, c, 1.0).unwrap();
            let rep = check_order_conditions(&m, &ConditionSampling { r_max: 1024.0, ..Default::default() }).unwrap();
            assert!(rep.passed, "d = {d}, sigma = {sigma}: {:?}", rep.worst_ratio);
        }
    }
}

#[test]
fn order_warning_when_dimension_small() {
    assert!(!DispersionSymbol::power(2, 2.0, 4.0, 1.0).unwrap().warnings().is_empty());
    assert!(DispersionSymbol::power(3, 2.0, 4.0, 1.0).unwrap().warnings().is_empty());
}

#[test]
fn extension_agrees_on_interval() {
    let local = LocalSymbol::power(2.0);
    let ext = extend_symbol_1d(&local, 1.0, 2.0, 2.0, 2.0, None).unwrap();
    for i in 0..1000 {
        let x = 1.0 + i as f64 / 1000.0;
        assert_eq!(ext.symbol.value(&[x]).to_bits(), (local.f0)(x).to_bits());
        assert!((ext.symbol.value(&[x]) - x * x).abs() < 1e-12);
    }
}

#[test]
fn extension_is_c2_at_junctions() {
    for (r, c0, sigma) in [(1.0, 2.0, 2.0), (1.0, 3.0, 3.0), (0.5, 2.0, 2.5)] {
        let ext = extend_symbol_1d(&LocalSymbol::power(sigma), r, c0, sigma, 2.0, None).unwrap();
        for side in ext.junction_jumps() {
            assert!(side.iter().all(|j| *j < 1e-8), "R = {r}, C0 = {c0}: {side:?}");
        }
    }
}

#[test]
fn extension_growth_constant_is_stable() {
    let ext = extend_symbol_1d(&LocalSymbol::power(2.0), 1.0, 2.0, 2.0, 2.0, None).unwrap();
    let coarse = ext.growth_constant(2_000);
    let fine = ext.growth_constant(4_000);
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((fine - coarse).abs() / coarse < 0.05, "{coarse} vs {fine}");
}

#[test]
fn extension_handles_negative_local_symbols() {
    let l = LocalSymbol {
        f0: std::sync::Arc::new(|x: f64| -x * x),
        f1: std::sync::Arc::new(|x: f64| -2.0 * x),
        f2: std::sync::Arc::new(|_| -2.0),
    };
    let ext = extend_symbol_1d(&l, 1.0, 2.0, 2.0, 2.0, None).unwrap();
    assert_eq!(ext.coefficients.sign, -1.0);
    assert!((ext.symbol.value(&[1.5]) + 2.25).abs() < 1e-12);
    assert!(ext.junction_jumps().iter().flatten().all(|j| *j < 1e-8));
}

#[test]
fn extension_rejects_bad_parameters() {
    let l = LocalSymbol::power(2.0);
    assert!(extend_symbol_1d(&l, 1.0, 2.0, 2.0, 2.0, Some(0.1)).is_err());
    assert!(extend_symbol_1d(&l, 0.0, 2.0, 2.0, 2.0, None).is_err());
    let mixed = LocalSymbol { f0: std::sync::Arc::new(|x: f64| x), f1: std::sync::Arc::new(|_| 1.0), f2: std::sync::Arc::new(|_| -1.0) };
    assert!(matches!(extend_symbol_1d(&mixed, 1.0, 2.0, 2.0, 2.0, None), Err(sectorlab::Error::Unsupported(_))));
}

proptest! {
    #[test]
    fn power_symbol_is_homogeneous(x in -50.0f64..50.0, y in -50.0f64..50.0, lambda in prop::sample::select(vec![2.0f64, 3.0]), sigma in prop::sample::select(vec![2.0f64, 2.5, 3.0, 4.0])) {
        let m = DispersionSymbol::power(2, sigma, 4.0, 1.0).unwrap();
        let a = m.value(&[lambda * x, lambda * y]);
        let b = lambda.powf(sigma) * m.value(&[x, y]);
        prop_assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300));
    }

    #[test]
    fn power_symbol_is_real_and_finite(x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3) {
        let m = DispersionSymbol::power(3, 3.0, 4.0, 1.0).unwrap();
        prop_assert!(m.value(&[x, y, z]).is_finite());
        let h = m.hessian(&[x, y, z]);
        prop_assert!((h.clone() - h.transpose()).amax() <= 1e-12 * h.amax().max(1.0));
    }
}
