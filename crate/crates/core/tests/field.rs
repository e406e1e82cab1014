mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use sectorlab::field::*;
use sectorlab::geometry::build_atlas;

/// Direct `f̂(ξ) = hᵈ Σ_x f(x) e^{-2πi x·ξ}`.
fn naive_dft(f: &LatticeField) -> Vec<C64> {
    let g = f.grid;
    let pos = g.positions();
    let freq = g.frequencies();
    let f = f.to_space();
    freq.chunks(g.dim)
        .map(|xi| {
            let mut acc = C64::new(0.0, 0.0);
            for (x, v) in pos.chunks(g.dim).zip(&f.data) {
                let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
                acc += v * C64::from_polar(1.0, -2.0 * PI * phase);
            }
            acc * g.cell_volume()
        })
        .collect()
}

#[test]
fn transform_matches_direct_sum() {
    for grid in [TorusGrid::new(1, 3.0, 16).unwrap(), TorusGrid::new(2, 2.0, 8).unwrap(), TorusGrid::new(3, 1.5, 4).unwrap()] {
        let f = common::noise(grid, 4);
        let fast = f.to_frequency();
        for (a, b) in fast.data.iter().zip(naive_dft(&f)) {
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }
    }
}

#[test]
fn delta_has_constant_spectrum() {
    let grid = TorusGrid::new(2, 4.0, 16).unwrap();
    let mut f = LatticeField::zeros(grid, Register::Space);
    f.data[0] = C64::new(1.0, 0.0);
    let h = f.to_frequency();
    assert!(h.data.iter().all(|v| (v - h.data[0]).norm() < 1e-15));
}

#[test]
fn plancherel_and_round_trip() {
    let grid = TorusGrid::new(2, 4.0, 32).unwrap();
    let f = common::noise(grid, 8);
    let h = f.to_frequency();
    assert!((f.l2_norm() - h.l2_norm()).abs() < 1e-12 * f.l2_norm());
    assert!(common::rel_diff(&h.to_space(), &f) < 1e-12);
}

#[test]
fn psi_partition_on_grid_frequencies() {
    let grid = TorusGrid::new(2, 3.0, 32).unwrap();
    let cells = resolvable_cells(&grid);
    for xi in grid.frequencies().chunks(2) {
        let s: f64 = cells.iter().map(|k| psi(&[xi[0] - k[0] as f64, xi[1] - k[1] as f64])).sum();
        assert!((s - 1.0).abs() < 1e-10);
    }
}

#[test]
fn unit_projections_sum_and_localize() {
    let grid = TorusGrid::new(2, 3.0, 32).unwrap();
    let f = common::noise(grid, 2);
    let mut acc = LatticeField::zeros(grid, Register::Frequency);
    for k in resolvable_cells(&grid) {
        let q = unit_projection(&f, &k).unwrap().to_frequency();
        for (xi, v) in grid.frequencies().chunks(2).zip(&q.data) {
            if xi.iter().zip(&k).any(|(x, &ki)| (x - ki as f64).abs() >= 1.0) {
                assert!(v.norm() < 1e-12);
            }
        }
        acc = acc.add(&q);
    }
    assert!(common::rel_diff(&acc.to_space(), &f) < 1e-10);
    assert!(matches!(unit_projection(&f, &[50, 0]), Err(sectorlab::Error::Range(_))));
}

/// `‖Q_k f‖₆ / ‖Q_k f‖₂` is bounded uniformly in `k`.
#[test]
fn unit_scale_bernstein_is_uniform_in_k() {
    let grid = TorusGrid::new(1, 16.0, 256).unwrap();
    let mut per_k = Vec::new();
    for k in [-6i64, -2, 0, 1, 3, 7] {
        let mut worst = 0.0f64;
        for s in 0..20 {
            let q = unit_projection(&common::noise(grid, 100 + s), &[k]).unwrap();
            worst = worst.max(q.lp_norm(6.0) / q.lp_norm(2.0));
        }
        per_k.push(worst);
    }
    let hi = per_k.iter().cloned().fold(0.0, f64::max);
    let lo = per_k.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi < 2.0, "{per_k:?}");
    assert!(hi / lo < 1.5, "{per_k:?}");
}

#[test]
fn unit_law_keeps_the_field() {
    let grid = TorusGrid::new(2, 2.0, 16).unwrap();
    let f = common::noise(grid, 3);
    let draw = RandomDraw::sample(&grid, Law::Unit, 9);
    assert!(common::rel_diff(&randomize(&f, &draw).unwrap(), &f) < 1e-10);
}

#[test]
fn randomized_energy_matches_cell_sum() {
    let grid = TorusGrid::new(1, 8.0, 64).unwrap();
    let f = common::band_limited(grid, 3.5, 5);
    let expected: f64 = resolvable_cells(&grid).iter().map(|k| unit_projection(&f, k).unwrap().l2_norm().powi(2)).sum();
    let samples: Vec<f64> = (0..200).map(|i| randomize(&f, &RandomDraw::sample(&grid, Law::ComplexGaussian, sub_seed(1, i))).unwrap().l2_norm().powi(2)).collect();
    let mean = samples.iter().sum::<f64>() / 200.0;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 199.0;
    let se = (var / 200.0).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");
}

/// For Gaussian coefficients `E‖f^ω‖₄⁴ = 2 Σ_x hᵈ (Σ_k |Q_k f(x)|²)²`.
#[test]
fn randomization_improves_integrability() {
    let grid = TorusGrid::new(1, 8.0, 1024).unwrap();
    let f = LatticeField::from_space_fn(grid, |x| C64::new((-((x[0] - 4.0) / 0.01).powi(2)).exp(), 0.0));
    let deterministic = f.lp_norm(4.0) / f.l2_norm();
    let cells = resolvable_cells(&grid);
    let q: Vec<LatticeField> = cells.iter().map(|k| unit_projection(&f, k).unwrap().to_space()).collect();
    let oracle: f64 = 2.0 * (0..grid.len()).map(|i| q.iter().map(|p| p.data[i].norm_sqr()).sum::<f64>().powi(2)).sum::<f64>() * grid.cell_volume();
    let mc: f64 = (0..200).map(|i| randomize(&f, &RandomDraw::sample(&grid, Law::ComplexGaussian, sub_seed(2, i))).unwrap().lp_norm(4.0).powi(4)).sum::<f64>() / 200.0;
    let e2: f64 = (0..200).map(|i| randomize(&f, &RandomDraw::sample(&grid, Law::ComplexGaussian, sub_seed(2, i))).unwrap().l2_norm().powi(2)).sum::<f64>() / 200.0;
    let o2: f64 = q.iter().map(|p| p.l2_norm().powi(2)).sum();
    assert!((e2 - o2).abs() / o2 < 0.1);
    assert!((mc - oracle).abs() / oracle < 0.15, "{mc} vs {oracle}");
    let improved = mc.powf(0.25) / f.l2_norm();
    assert!(improved < 1.5 && improved < 0.6 * deterministic, "{improved} vs {deterministic}");
}

#[test]
fn gaussian_law_moments() {
    let mut rng = rng_from_seed(77);
    let n = 10_000;
    let g: Vec<C64> = (0..n).map(|_| sample_law(Law::ComplexGaussian, &mut rng)).collect();
    let mean = g.iter().sum::<C64>() / n as f64;
    assert!(mean.norm() < 5.0 / (n as f64).sqrt());
    let vr = g.iter().map(|z| (z.re - mean.re).powi(2)).sum::<f64>() / n as f64;
    let vi = g.iter().map(|z| (z.im - mean.im).powi(2)).sum::<f64>() / n as f64;
    let cov = g.iter().map(|z| (z.re - mean.re) * (z.im - mean.im)).sum::<f64>() / n as f64;
    assert!((vr - 0.5).abs() < 0.025 && (vi - 0.5).abs() < 0.025 && cov.abs() < 0.025);
    let r: Vec<C64> = (0..100).map(|_| sample_law(Law::RademacherPair, &mut rng)).collect();
    assert!(r.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
}

#[test]
fn bernstein_ratio_equal_exponents() {
    let grid = TorusGrid::new(2, 4.0, 64).unwrap();
    let atlas = build_atlas(2, 0.25, 8.0).unwrap();
    let f = common::band_limited(grid, grid.nyquist(), 1);
    for th in (0..atlas.len()).step_by(9) {
        if let Some(r) = bernstein_ratio(&f, &atlas, th, 3.0, 3.0).unwrap() {
            assert!(r <= 1.0 + 1e-12);
        }
    }
    assert!(bernstein_ratio(&f, &atlas, 0, 3.0, 2.0).is_err());
    let zero = LatticeField::zeros(grid, Register::Space);
    assert_eq!(bernstein_ratio(&zero, &atlas, 0, 2.0, 4.0).unwrap(), None);
}

fn flat_spectrum(grid: TorusGrid) -> LatticeField {
    LatticeField::from_frequency_fn(grid, |_| C64::new(1.0, 0.0))
}

#[test]
fn bernstein_ratio_bounded_and_scales() {
    let grid = TorusGrid::new(2, 2.0, 512).unwrap();
    let atlas = build_atlas(2, 0.25, 64.0).unwrap();
    let random = common::band_limited(grid, grid.nyquist(), 6);
    let flat = flat_spectrum(grid);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 1..=atlas.scales {
        let th = atlas.index_of(k, 0).unwrap();
        let n = atlas.sector(th).n_theta;
        if n < 2.0 {
            continue;
        }
        let r = bernstein_ratio(&random, &atlas, th, 2.0, f64::INFINITY).unwrap().unwrap();
        assert!(r <= 4.0, "N = {n}: {r}");
        let p = atlas.project(&flat, th).unwrap().to_space();
        xs.push(n.ln());
        ys.push((p.max_abs() / p.l2_norm()).ln());
    }
    let fit = sectorlab::trees::linear_fit(&xs, &ys).unwrap();
    assert!((fit.slope - 1.0).abs() <= 0.2, "slope {}", fit.slope);
}

#[test]
fn field_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    let grid = TorusGrid::new(2, 4.0, 16).unwrap();
    let f = common::noise(grid, 12);
    let meta = FieldMeta { seed: Some(12), symbol_id: Some("power:2".into()), params: serde_json::json!({"note": 1}) };
    save_field(&path, &f, &meta).unwrap();
    let (g, m) = load_field(&path).unwrap();
    assert_eq!(m, meta);
    assert_eq!(g.grid, f.grid);
    assert_eq!(g.register, f.register);
    assert!(g.data.iter().zip(&f.data).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    assert_eq!(std::fs::read(&path).unwrap(), field_bytes(&g));
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(side["seed"], 12);
    assert_eq!(side["register"], "space");
    assert_eq!(side["grid"]["points"], 16);
    assert_eq!(side["endianness"], "little");
}

#[test]
fn field_file_rejects_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    let grid = TorusGrid::new(1, 4.0, 8).unwrap();
    save_field(&path, &common::noise(grid, 1), &FieldMeta::default()).unwrap();
    let side = sidecar_path(&path);
    let text = std::fs::read_to_string(&side).unwrap();
    std::fs::write(&side, text.replace("\"little\"", "\"big\"")).unwrap();
    assert!(matches!(load_field(&path), Err(sectorlab::Error::Format(_))));
    std::fs::write(&side, &text).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_field(&path), Err(sectorlab::Error::Format(_))));
    bytes[0] = b'S';
    bytes.truncate(bytes.len() - 16);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_field(&path), Err(sectorlab::Error::Format(_))));
}

#[test]
fn time_grid_validation() {
    let grid = TorusGrid::new(1, 1.0, 4).unwrap();
    let s = LatticeField::zeros(grid, Register::Space);
    assert!(SpaceTimeField::new(vec![0.0, 0.0], vec![s.clone(), s.clone()]).is_err());
    assert!(SpaceTimeField::new(vec![0.0, 1.0], vec![s]).is_err());
    let w = trapezoid_weights(&uniform_times(0.0, 1.0, 4));
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_is_linear(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let grid = TorusGrid::new(2, 2.0, 16).unwrap();
        let (f, g) = (common::noise(grid, seed), common::noise(grid, seed ^ 0xFF));
        let a = C64::new(re, im);
        let lhs = f.scale(a).add(&g).to_frequency();
        let rhs = f.to_frequency().scale(a).add(&g.to_frequency());
        prop_assert!(lhs.sub(&rhs).l2_norm() <= 1e-12 * (1.0 + rhs.l2_norm()));
    }

    #[test]
    fn randomize_is_real_linear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let grid = TorusGrid::new(1, 4.0, 32).unwrap();
        let (f, g) = (common::noise(grid, seed), common::noise(grid, seed ^ 0xAB));
        let draw = RandomDraw::sample(&grid, Law::ComplexGaussian, seed);
        let a = C64::new(alpha, 0.0);
        let lhs = randomize(&f.scale(a).add(&g), &draw).unwrap();
        let rhs = randomize(&f, &draw).unwrap().scale(a).add(&randomize(&g, &draw).unwrap());
        prop_assert!(lhs.sub(&rhs).l2_norm() <= 1e-12 * (1.0 + rhs.l2_norm()));
    }

    #[test]
    fn psi_translates_sum_to_one(x in -20.0f64..20.0) {
        let s: f64 = (-25..=25).map(|k| psi_1d(x - k as f64)).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }
}
