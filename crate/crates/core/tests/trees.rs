mod common;

use common::{band_limited, st_diff};
use proptest::prelude::*;
use sectorlab::evolution::{Propagator, Sign};
use sectorlab::field::{uniform_times, LatticeField, Law, Register, TorusGrid, C64};
use sectorlab::symbol::DispersionSymbol;
use sectorlab::trees::*;

/// `t(n) = Σ_{n₁+n₂+n₃=n} t(n₁)t(n₂)t(n₃)` over odd parts, `t(1) = 1`.
fn count_oracle(n: usize) -> u64 {
    let mut t = vec![0u64; n + 1];
    t[1] = 1;
    for m in (3..=n).step_by(2) {
        let mut acc = 0;
        for a in (1..m).step_by(2) {
            for b in (1..m - a).step_by(2) {
                let c = m - a - b;
                if c >= 1 && c % 2 == 1 {
                    acc += t[a] * t[b] * t[c];
                }
            }
        }
        t[m] = acc;
    }
    t[n]
}

fn setup() -> (Propagator, Vec<f64>, LatticeField) {
    let grid = TorusGrid::new(1, 8.0, 32).unwrap();
    let sym = DispersionSymbol::power(1, 2.0, 4.0, 1.0).unwrap();
    let prop = Propagator::new(&sym, grid).unwrap();
    let f = band_limited(grid, 1.0, 3).scale(C64::new(0.3, 0.0));
    (prop, uniform_times(0.0, 0.2, 16), f)
}

#[test]
fn tree_counts() {
    let expected = [1u64, 1, 3, 12, 55];
    for (i, n) in [1usize, 3, 5, 7, 9].into_iter().enumerate() {
        assert_eq!(count_oracle(n), expected[i]);
        assert_eq!(enumerate_trees(n).unwrap().len() as u64, expected[i], "n = {n}");
    }
    assert_eq!(enumerate_trees(11).unwrap().len() as u64, count_oracle(11));
}

#[test]
fn trees_are_distinct_with_odd_leaf_counts() {
    for n in [1usize, 3, 5, 7, 9] {
        let trees = enumerate_trees(n).unwrap();
        let mut shapes: Vec<String> = trees.iter().map(|t| t.canonical()).collect();
        shapes.sort();
        shapes.dedup();
        assert_eq!(shapes.len(), trees.len());
        assert!(trees.iter().all(|t| t.leaves() == n));
    }
}

#[test]
fn even_leaf_count_is_a_domain_error() {
    assert!(matches!(enumerate_trees(4), Err(sectorlab::Error::Domain(_))));
    assert!(enumerate_trees(13).is_err());
}

#[test]
fn leaf_operator_is_free_evolution() {
    let (prop, times, f) = setup();
    let out = tree_operator(&TernaryTree::Leaf, std::slice::from_ref(&f), &prop, &times, Sign::Plus).unwrap();
    for (t, slice) in times.iter().zip(&out.slices) {
        let expected = prop.propagate(&f, *t).to_space();
        assert!(slice.sub(&expected).l2_norm() < 1e-12);
    }
}

#[test]
fn zero_leaf_gives_zero() {
    let (prop, times, f) = setup();
    let tau = TernaryTree::node(TernaryTree::Leaf, TernaryTree::Leaf, TernaryTree::Leaf);
    let zero = LatticeField::zeros(f.grid, Register::Space);
    for k in 0..3 {
        let mut leaves = vec![f.clone(), f.clone(), f.clone()];
        leaves[k] = zero.clone();
        let out = tree_operator(&tau, &leaves, &prop, &times, Sign::Plus).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }
}

#[test]
fn arity_mismatch_is_a_usage_error() {
    let (prop, times, f) = setup();
    let tau = TernaryTree::node(TernaryTree::Leaf, TernaryTree::Leaf, TernaryTree::Leaf);
    assert!(matches!(tree_operator(&tau, &[f], &prop, &times, Sign::Plus), Err(sectorlab::Error::Usage(_))));
}

#[test]
fn slot_linearity_on_three_leaves() {
    let (prop, times, f) = setup();
    let g = band_limited(f.grid, 1.0, 9).scale(C64::new(0.2, 0.0));
    let tau = TernaryTree::node(TernaryTree::Leaf, TernaryTree::Leaf, TernaryTree::Leaf);
    let base_leaves = vec![f.clone(), g.clone(), f.clone()];
    let base = tree_operator(&tau, &base_leaves, &prop, &times, Sign::Minus).unwrap();
    let alpha = C64::new(0.7, -1.3);
    for k in 0..3 {
        let mut leaves = base_leaves.clone();
        leaves[k] = leaves[k].scale(alpha);
        let out = tree_operator(&tau, &leaves, &prop, &times, Sign::Minus).unwrap();
        let factor = if k == 1 { alpha.conj() } else { alpha };
        assert!(st_diff(&out, &base.scale(factor)) < 1e-12 * base.l2_norm().max(1.0), "slot {k}");
    }
}

#[test]
fn node_operators_vanish_at_initial_time() {
    let (prop, times, f) = setup();
    for tau in enumerate_trees(5).unwrap() {
        let leaves = vec![f.clone(); 5];
        let out = tree_operator(&tau, &leaves, &prop, &times, Sign::Plus).unwrap();
        assert_eq!(out.slices[0].l2_norm(), 0.0);
    }
}

#[test]
fn remainder_index_sets() {
    assert_eq!(remainder_indices(1), vec![(1, 1, 1)]);
    let r3 = remainder_indices(3);
    assert_eq!(r3.len(), 7);
    assert!(r3.iter().all(|&(a, b, c)| [a, b, c].iter().all(|x| *x == 1 || *x == 3) && a + b + c > 3));
}

#[test]
fn z_terms_match_tree_sums() {
    let (prop, times, f) = setup();
    let z = z_terms(&f, 5, &prop, &times, Sign::Plus).unwrap();
    let tau3 = TernaryTree::node(TernaryTree::Leaf, TernaryTree::Leaf, TernaryTree::Leaf);
    let r3 = tree_operator(&tau3, &[f.clone(), f.clone(), f.clone()], &prop, &times, Sign::Plus).unwrap();
    assert!(st_diff(&z.z[&3], &r3) < 1e-14);
    let s5 = tree_sum(&f, 5, &prop, &times, Sign::Plus).unwrap();
    assert!(st_diff(&z.z[&5], &s5) < 1e-13 * s5.l2_norm().max(1e-300) + 1e-300);
    let total = z.z[&1].add(&z.z[&3]).add(&z.z[&5]);
    assert!(st_diff(&z.z_le, &total) < 1e-14);
}

#[test]
fn z_terms_first_order_remainder() {
    let (prop, times, f) = setup();
    let z = z_terms(&f, 1, &prop, &times, Sign::Plus).unwrap();
    let z1 = &z.z[&1];
    assert!(st_diff(&z.z_le, z1) == 0.0);
    let cubic = sectorlab::field::trilinear(z1, z1, z1);
    assert!(st_diff(&z.high, &cubic) < 1e-15);
    assert!(matches!(z_terms(&f, 2, &prop, &times, Sign::Plus), Err(sectorlab::Error::Domain(_))));
    assert!(z_terms(&f, 11, &prop, &times, Sign::Plus).is_err());
}

#[test]
fn tail_survival_is_monotone_and_scales() {
    let (prop, times, f) = setup();
    let spec = TailSpec { n: 1, draws: 60, law: Law::ComplexGaussian, seed: 11, lambdas: vec![] };
    let norm = |u: &sectorlab::field::SpaceTimeField| u.l2_norm();
    let a = tail_monte_carlo(&f, &spec, &prop, &times, Sign::Plus, &norm).unwrap();
    let mut sorted = a.rows.clone();
    sorted.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
    assert!(sorted.windows(2).all(|w| w[1].survival <= w[0].survival));
    let spec2 = TailSpec { lambdas: a.rows.iter().map(|r| r.lambda).collect(), ..spec.clone() };
    let b = tail_monte_carlo(&f.scale(C64::new(2.0, 0.0)), &spec2, &prop, &times, Sign::Plus, &norm).unwrap();
    for (x, y) in a.norms.iter().zip(&b.norms) {
        assert!((y - 2.0 * x).abs() < 1e-12 * y.max(1.0));
    }
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert!(rb.survivors >= ra.survivors);
    }
    let few = TailSpec { draws: 10, ..spec };
    assert!(tail_monte_carlo(&f, &few, &prop, &times, Sign::Plus, &norm).is_err());
}

#[test]
fn linear_fit_recovers_a_line() {
    let x = [0.0, 1.0, 2.0, 3.0];
    let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
    let fit = linear_fit(&x, &y).unwrap();
    assert!((fit.slope - 2.5).abs() < 1e-12 && (fit.intercept + 1.0).abs() < 1e-12);
    assert!(linear_fit(&[1.0], &[1.0]).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn leaf_counts_add_up(n in prop::sample::select(vec![1usize, 3, 5, 7])) {
        for tau in enumerate_trees(n).unwrap() {
            if let TernaryTree::Node(c) = &tau {
                prop_assert_eq!(c.iter().map(|t| t.leaves()).sum::<usize>(), n);
                prop_assert!(c.iter().all(|t| t.leaves() % 2 == 1));
            }
        }
    }

    #[test]
    fn degenerate_law_keeps_data(seed in any::<u64>()) {
        let grid = TorusGrid::new(1, 8.0, 32).unwrap();
        let f = band_limited(grid, 1.5, seed);
        let draw = sectorlab::field::RandomDraw::sample(&grid, Law::Unit, seed);
        let fo = sectorlab::field::randomize(&f, &draw).unwrap();
        prop_assert!(common::rel_diff(&fo, &f) < 1e-10);
    }
}
