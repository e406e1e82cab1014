//! Acceptance run: one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sectorlab::basis::{build_basis_net, choose_sector_basis, verify_basis_conditions};
use sectorlab::evolution::{Propagator, Sign};
use sectorlab::experiments::{partition_probe_error, run, run_maximal_slope, run_smoothing_slope, solver_report, ExperimentConfig};
use sectorlab::field::{psi, uniform_times, LatticeField, SpaceTimeField, TorusGrid, C64};
use sectorlab::geometry::build_atlas;
use sectorlab::norms::{directional_norm, DirectionalFrame, ExponentTriple};
use sectorlab::symbol::DispersionSymbol;
use sectorlab::thresholds::*;
use sectorlab::trees::enumerate_trees;

type Check = Result<(bool, String), String>;

const SIGMAS: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn noise_st(grid: TorusGrid, steps: usize, seed: u64) -> SpaceTimeField {
    let mut r = rng(seed);
    let times = uniform_times(0.0, 1.0, steps);
    let slices = times.iter().map(|_| LatticeField::from_space_fn(grid, |_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))).collect();
    SpaceTimeField::new(times, slices).unwrap()
}

fn criterion_1() -> Check {
    let table = [(1, -0.5), (2, -0.5), (3, -0.5), (4, -0.5), (5, -0.5), (6, -0.5), (8, 0.0), (13, 1.5)];
    let mut worst: f64 = 0.0;
    for (d, expect) in table {
        worst = worst.max((s_min(d, 4.0) - expect).abs());
    }
    let exact = worst == 0.0;
    let mut jump: f64 = 0.0;
    for sigma in SIGMAS {
        let b = s_min_branches(1.5 * sigma, sigma);
        jump = jump.max((b[0] - b[1]).abs());
        let b = s_min_branches(3.5 * sigma - 2.0, sigma);
        jump = jump.max((b[1] - b[2]).abs());
    }
    Ok((exact && jump < 1e-12, format!("sigma=4 table deviation {worst:.1e}, max branch jump {jump:.1e}")))
}

fn criterion_2() -> Check {
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut min_slack = f64::INFINITY;
    for sigma in SIGMAS {
        let lo = 0.5 - sigma / 4.0;
        let grid: Vec<f64> = (1..).map(|i| lo + 0.01 * i as f64).take_while(|&s| s <= 2.0 + 1e-12).collect();
        for &s in &grid {
            for k1 in 1..=9 {
                for k2 in k1..=9 {
                    for k3 in k2..=9 {
                        let out = mu_inductive_check([k1, k2, k3], s, sigma).map_err(|e| e.to_string())?;
                        checked += 1;
                        min_slack = min_slack.min(out.slack);
                        if !out.holds || out.slack < -TIE {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    Ok((violations == 0, format!("{checked} cases, {violations} violations, min slack {min_slack:.2e}")))
}

fn criterion_3() -> Check {
    let mut r = rng(0xACCE);
    let mut below_fail = 0usize;
    let mut above_missed = 0usize;
    let mut total = 0usize;
    for case in GateCase::ALL {
        for _ in 0..1000 {
            let ctx = random_context(&mut r);
            let bound = gate_bound(case, &ctx);
            let below = ExponentContext { sigma_star: bound - 0.05, ..ctx };
            if !brute_force_gate(case, &below, 20).map_err(|e| e.to_string())?.holds {
                below_fail += 1;
            }
            let above = ExponentContext { sigma_star: bound + 0.2, ..ctx };
            if brute_force_gate(case, &above, 20).map_err(|e| e.to_string())?.holds {
                above_missed += 1;
            }
            total += 1;
        }
    }
    Ok((below_fail == 0 && above_missed == 0, format!("{total} contexts, {below_fail} failures below bound, {above_missed} missed counterexamples above")))
}

/// `t(n) = Σ t(a)t(b)t(c)` over odd `a + b + c = n`.
fn tree_count_oracle(n: usize) -> usize {
    let mut t = vec![0usize; n + 1];
    t[1] = 1;
    for m in (3..=n).step_by(2) {
        for a in (1..m).step_by(2) {
            for b in (1..m - a).step_by(2) {
                let c = m - a - b;
                if c % 2 == 1 {
                    t[m] += t[a] * t[b] * t[c];
                }
            }
        }
    }
    t[n]
}

fn criterion_4() -> Check {
    let expected = [1usize, 1, 3, 12, 55];
    let mut counts = Vec::new();
    let mut ok = true;
    for (i, n) in [1usize, 3, 5, 7, 9].into_iter().enumerate() {
        let c = enumerate_trees(n).map_err(|e| e.to_string())?.len();
        ok &= c == expected[i] && c == tree_count_oracle(n);
        counts.push(c.to_string());
    }
    Ok((ok, format!("counts {}", counts.join(", "))))
}

fn criterion_5() -> Check {
    let atlas = build_atlas(2, 0.25, 64.0).map_err(|e| e.to_string())?;
    let partition = partition_probe_error(&atlas, 1000, 0xACCE);

    let grid = TorusGrid::new(2, 8.0, 32).map_err(|e| e.to_string())?;
    let freqs = grid.frequencies();
    let mut psi_err: f64 = 0.0;
    for xi in freqs.chunks(2) {
        let mut sum = 0.0;
        for k0 in (xi[0].floor() as i64 - 2)..=(xi[0].ceil() as i64 + 2) {
            for k1 in (xi[1].floor() as i64 - 2)..=(xi[1].ceil() as i64 + 2) {
                sum += psi(&[xi[0] - k0 as f64, xi[1] - k1 as f64]);
            }
        }
        psi_err = psi_err.max((sum - 1.0).abs());
    }

    let net = build_basis_net(2, 0.1).map_err(|e| e.to_string())?;
    let mut basis_ok = true;
    let mut notes = Vec::new();
    for (sigma, c_lambda) in [(2.0, 4.0), (4.0, 16.0)] {
        let m = DispersionSymbol::power(2, sigma, c_lambda, 1.0).map_err(|e| e.to_string())?;
        let atlas = build_atlas(2, 0.02, 32.0).map_err(|e| e.to_string())?;
        let choice = choose_sector_basis(&m, &atlas, &net).map_err(|e| e.to_string())?;
        let bound = 1.5 * choice.c_o;
        let mut sectors = 0;
        for th in 0..atlas.len() {
            if atlas.sector(th).n_theta < 2.0 * m.c_max {
                continue;
            }
            sectors += 1;
            let rec = verify_basis_conditions(&m, &atlas, choice.matrix(th), th, 16, 0xACCE + th as u64).map_err(|e| e.to_string())?;
            basis_ok &= choice.checked.contains(&th) && rec.c_required.is_finite() && rec.passes(bound);
        }
        basis_ok &= choice.c_o.is_finite() && sectors > 0;
        notes.push(format!("sigma={sigma}: {sectors} sectors, C_O {:.3}", choice.c_o));
    }
    let ok = partition < 1e-10 && psi_err < 1e-10 && basis_ok;
    Ok((ok, format!("partition {partition:.1e}, psi {psi_err:.1e}, {}", notes.join("; "))))
}

fn forced_residual(prop: &Propagator, f: &LatticeField, base: &LatticeField, steps: usize) -> Result<f64, String> {
    let times = uniform_times(-1.0, 1.0, steps);
    let slices = times.iter().map(|&t| base.scale(C64::new((1.7 * t).cos(), (0.6 * t).sin()))).collect();
    let h = SpaceTimeField::new(times, slices).map_err(|e| e.to_string())?;
    let v = prop.duhamel(f, &h, 0.0, Sign::Minus).map_err(|e| e.to_string())?;
    prop.residual(&v, &h, Sign::Minus).map_err(|e| e.to_string())
}

fn criterion_6() -> Check {
    let sym = DispersionSymbol::power(1, 2.0, 4.0, 1.0).map_err(|e| e.to_string())?;
    let grid = TorusGrid::new(1, 4.0, 64).map_err(|e| e.to_string())?;
    let prop = Propagator::new(&sym, grid).map_err(|e| e.to_string())?;
    let mut r = rng(6);
    let mut band = |cut: f64| LatticeField::from_frequency_fn(grid, |xi| if xi[0].abs() <= cut { C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) } else { C64::new(0.0, 0.0) }).to_space();
    let f = band(2.0);
    let base = band(1.0);
    let n = f.l2_norm();
    let mut unitary: f64 = 0.0;
    let mut group: f64 = 0.0;
    for (s, t) in [(0.3, 0.45), (-1.2, 2.5), (4.0, -7.5)] {
        unitary = unitary.max((prop.propagate(&f, s).l2_norm() - n).abs() / n);
        group = group.max(prop.propagate(&prop.propagate(&f, s), t).sub(&prop.propagate(&f, s + t)).l2_norm() / n);
    }
    let r1 = forced_residual(&prop, &f, &base, 64)?;
    let r2 = forced_residual(&prop, &f, &base, 128)?;
    let ratio = r1 / r2;
    let ok = unitary < 1e-10 && group < 1e-10 && (ratio - 4.0).abs() <= 0.5;
    Ok((ok, format!("unitarity {unitary:.1e}, group law {group:.1e}, residual ratio {ratio:.3}")))
}

fn criterion_7() -> Check {
    let eps0 = 1.0 / 64.0;
    let (big, small) = (2.0 / eps0, 2.0 / (1.0 - eps0));
    let grid = TorusGrid::new(2, 1.0, 8).map_err(|e| e.to_string())?;
    let l2 = ExponentTriple::new(2.0, 2.0, 2.0).map_err(|e| e.to_string())?;
    let plus = ExponentTriple::new(big, small, small).map_err(|e| e.to_string())?;
    let minus = ExponentTriple::new(small, big, big).map_err(|e| e.to_string())?;
    let mut r = rng(7);
    let mut min_slack = f64::INFINITY;
    for pair in 0..100u64 {
        let a = noise_st(grid, 7, 2 * pair + 1);
        let b = noise_st(grid, 7, 2 * pair + 2);
        let product = a.zip_with(&b, |x, y| {
            let (x, y) = (x.to_space(), y.to_space());
            let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
            LatticeField::from_data(grid, x.register, data).expect("same grid")
        });
        let frame = DirectionalFrame::identity(2, r.random_range(0..2)).map_err(|e| e.to_string())?;
        let lhs = directional_norm(&product, &frame, l2).map_err(|e| e.to_string())?;
        let rhs = directional_norm(&a, &frame, plus).map_err(|e| e.to_string())? * directional_norm(&b, &frame, minus).map_err(|e| e.to_string())?;
        min_slack = min_slack.min(rhs - lhs);
    }
    Ok((min_slack >= -1e-10, format!("100 pairs, min slack {min_slack:.3e}")))
}

/// Signed permutation matrix sending `e_i` to `sign_i e_{perm_i}`.
fn signed_permutation(perm: &[usize], signs: &[f64]) -> DMatrix<f64> {
    let d = perm.len();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(perm[i], i)] = signs[i];
    }
    m
}

fn lp(values: &[(f64, f64)], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|v| v.1).fold(0.0, f64::max)
    } else {
        values.iter().map(|(w, v)| w * v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Nested loops over `h(t, Q y)` with `Q = O S_j` a signed permutation.
fn loop_oracle(u: &SpaceTimeField, q: &DMatrix<f64>, t: ExponentTriple) -> f64 {
    let m = u.grid.points;
    let h = u.grid.spacing();
    let n = u.times.len();
    let wt: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i > 0 { u.times[i] - u.times[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u.times[i + 1] - u.times[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let space: Vec<LatticeField> = u.slices.iter().map(|s| s.to_space()).collect();
    let source = |y: [usize; 3]| {
        let mut x = [0usize; 3];
        for (i, xi) in x.iter_mut().enumerate() {
            for k in 0..3 {
                if q[(i, k)] > 0.5 {
                    *xi = y[k];
                } else if q[(i, k)] < -0.5 {
                    *xi = (m - y[k]) % m;
                }
            }
        }
        (x[0] * m + x[1]) * m + x[2]
    };
    let outer: Vec<(f64, f64)> = (0..m)
        .map(|y0| {
            let per_t: Vec<(f64, f64)> = space
                .iter()
                .zip(&wt)
                .map(|(s, &w)| {
                    let mut inner = Vec::with_capacity(m * m);
                    for y1 in 0..m {
                        for y2 in 0..m {
                            inner.push((h * h, s.data[source([y0, y1, y2])].norm()));
                        }
                    }
                    (w, lp(&inner, t.c))
                })
                .collect();
            (h, lp(&per_t, t.b))
        })
        .collect();
    lp(&outer, t.a)
}

fn criterion_8() -> Check {
    let grid = TorusGrid::new(3, 1.0, 8).map_err(|e| e.to_string())?;
    let exps = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0, f64::INFINITY];
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let u = noise_st(grid, 7, 800 + k);
        let mut perm = vec![0usize, 1, 2];
        perm.shuffle(&mut r);
        let signs: Vec<f64> = (0..3).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let o = signed_permutation(&perm, &signs);
        let j = r.random_range(0..3);
        let triple = ExponentTriple::new(exps[r.random_range(0..exps.len())], exps[r.random_range(0..exps.len())], exps[r.random_range(0..exps.len())]).map_err(|e| e.to_string())?;
        let frame = DirectionalFrame::new(o, j).map_err(|e| e.to_string())?;
        let fast = directional_norm(&u, &frame, triple).map_err(|e| e.to_string())?;
        let oracle = loop_oracle(&u, &frame.composed(), triple);
        worst = worst.max((fast - oracle).abs() / oracle);
    }
    Ok((worst < 1e-10, format!("20 combinations, max relative deviation {worst:.1e}")))
}

fn criterion_9() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for sigma in [2.0, 4.0] {
        let mut c = config("slope-maximal.toml");
        c.symbol.sigma = sigma;
        let start = Instant::now();
        let (report, _) = run_maximal_slope(&c).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let pass = report.slope <= sigma / 4.0 + 0.15 && secs < 300.0;
        ok &= pass;
        let wrapped = report.wrapped.iter().filter(|w| **w).count();
        notes.push(format!("maximal sigma={sigma}: slope {:.3} vs bound {:.3} ({wrapped} wrapped scales, {secs:.0}s)", report.slope, sigma / 4.0 + 0.15));
    }
    for sigma in [2.0, 4.0] {
        let mut c = config("slope-smoothing.toml");
        c.symbol.sigma = sigma;
        let start = Instant::now();
        let (report, _) = run_smoothing_slope(&c).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let bound = -(sigma - 1.0) / 2.0 + 0.15;
        ok &= report.slope <= bound && secs < 300.0;
        notes.push(format!("smoothing sigma={sigma}: slope {:.3} vs bound {bound:.3} ({secs:.0}s)", report.slope));
    }
    Ok((ok, notes.join("; ")))
}

fn criterion_10() -> Check {
    let c = config("solve.toml");
    let (report, _) = solver_report(&c).map_err(|e| e.to_string())?;
    let d = &report.manifest.diagnostics;
    let oracle = report.manifest.oracle_error.unwrap_or(f64::INFINITY);
    let ok = d.converged && d.max_ratio < 0.5 && d.integral_residual < 1e-5 && oracle < 1e-3;
    Ok((ok, format!("converged {}, max ratio {:.2e}, residual {:.2e}, oracle error {oracle:.2e}, window {}", d.converged, d.max_ratio, d.integral_residual, d.window)))
}

fn criterion_11() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [1usize, 3] {
        let mut c = config("tails.toml");
        c.tails.n = n;
        let out = run(&c).map_err(|e| e.to_string())?;
        let monotone = out.summary["monotone"].as_bool().unwrap_or(false);
        ok &= monotone;
        if n == 1 {
            let slope = out.summary["fit"]["slope"].as_f64().unwrap_or(f64::NAN);
            ok &= (slope - 2.0).abs() <= 0.5;
            notes.push(format!("n=1: slope {slope:.3}, monotone {monotone}"));
        } else {
            notes.push(format!("n={n}: monotone {monotone}"));
        }
    }
    Ok((ok, notes.join("; ")))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Check); 11] = [
        ("threshold tables", 1, criterion_1),
        ("mu inductive property", 30, criterion_2),
        ("exponent gates", 60, criterion_3),
        ("tree combinatorics", 5, criterion_4),
        ("geometry and sector bases", 120, criterion_5),
        ("propagator", 60, criterion_6),
        ("Holder chain", 60, criterion_7),
        ("directional norm oracle", 60, criterion_8),
        ("slope experiments", 900, criterion_9),
        ("solver", 120, criterion_10),
        ("tail Monte Carlo", 300, criterion_11),
    ];
    let mut passed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && elapsed < Duration::from_secs(*budget), detail),
            Err(e) => (false, format!("error: {e}")),
        };
        passed += ok as usize;
        println!("criterion {:>2} {} {name}: {detail} [{:.2}s, budget {budget}s]", i + 1, if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
