//! Ternary trees, multilinear Duhamel tree operators, the expansion terms
//! `z_n` and Monte Carlo tail statistics of their norms.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::evolution::{Propagator, Sign};
use crate::field::{randomize, sub_seed, trilinear, LatticeField, Law, RandomDraw, Register, SpaceTimeField};

pub const MAX_TREE_LEAVES: usize = 11;
pub const MAX_EXPANSION_ORDER: u32 = 9;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TernaryTree {
    Leaf,
    Node(Box<[TernaryTree; 3]>),
}

impl TernaryTree {
    pub fn node(a: TernaryTree, b: TernaryTree, c: TernaryTree) -> Self {
        TernaryTree::Node(Box::new([a, b, c]))
    }

    pub fn leaves(&self) -> usize {
        match self {
            TernaryTree::Leaf => 1,
            TernaryTree::Node(c) => c.iter().map(|t| t.leaves()).sum(),
        }
    }

    /// Canonical serialization: `•` for a leaf, `[a,b,c]` for a node.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TernaryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TernaryTree::Leaf => f.write_str("•"),
            TernaryTree::Node(c) => write!(f, "[{},{},{}]", c[0], c[1], c[2]),
        }
    }
}

fn check_odd(n: usize, cap: usize) -> Result<()> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::Domain(format!("tree sizes are odd, got {n}")));
    }
    if n > cap {
        return Err(Error::Capability(format!("tree size {n} exceeds the cap {cap}")));
    }
    Ok(())
}

/// All ordered ternary trees with `n` leaves, sorted by canonical form.
pub fn enumerate_trees(n: usize) -> Result<Vec<TernaryTree>> {
    check_odd(n, MAX_TREE_LEAVES)?;
    let mut table: Vec<Vec<TernaryTree>> = vec![Vec::new(); n + 1];
    table[1] = vec![TernaryTree::Leaf];
    for m in (3..=n).step_by(2) {
        let mut seen: BTreeMap<String, TernaryTree> = BTreeMap::new();
        for n1 in (1..m).step_by(2) {
            for n2 in (1..m - n1).step_by(2) {
                let n3 = m - n1 - n2;
                for a in &table[n1] {
                    for b in &table[n2] {
                        for c in &table[n3] {
                            let t = TernaryTree::node(a.clone(), b.clone(), c.clone());
                            seen.entry(t.canonical()).or_insert(t);
                        }
                    }
                }
            }
        }
        table[m] = seen.into_values().collect();
    }
    Ok(std::mem::take(&mut table[n]))
}

fn check_times(times: &[f64]) -> Result<()> {
    if !times.contains(&0.0) {
        return usage("tree operators integrate from t = 0, which must be a time sample");
    }
    Ok(())
}

/// `R_τ[f₁, ..., f_{|τ|}]` on the time samples, leaves read left to right.
pub fn tree_operator(tau: &TernaryTree, leaves: &[LatticeField], prop: &Propagator, times: &[f64], sign: Sign) -> Result<SpaceTimeField> {
    if leaves.len() != tau.leaves() {
        return usage(format!("tree has {} leaves but {} fields were supplied", tau.leaves(), leaves.len()));
    }
    check_times(times)?;
    fn go(tau: &TernaryTree, leaves: &[LatticeField], prop: &Propagator, times: &[f64], sign: Sign) -> Result<SpaceTimeField> {
        match tau {
            TernaryTree::Leaf => prop.free_evolution(&leaves[0], times, 0.0),
            TernaryTree::Node(c) => {
                let (n1, n2) = (c[0].leaves(), c[1].leaves());
                let a = go(&c[0], &leaves[..n1], prop, times, sign)?;
                let b = go(&c[1], &leaves[n1..n1 + n2], prop, times, sign)?;
                let d = go(&c[2], &leaves[n1 + n2..], prop, times, sign)?;
                let zero = LatticeField::zeros(prop.grid, Register::Space);
                prop.duhamel(&zero, &trilinear(&a, &b, &d), 0.0, sign)
            }
        }
    }
    go(tau, leaves, prop, times, sign)
}

/// Sum of `R_τ[f]` over all trees with `n` leaves, memoized by shape.
pub fn tree_sum(f: &LatticeField, n: usize, prop: &Propagator, times: &[f64], sign: Sign) -> Result<SpaceTimeField> {
    check_odd(n, MAX_TREE_LEAVES)?;
    check_times(times)?;
    let mut memo: HashMap<String, SpaceTimeField> = HashMap::new();
    fn go(tau: &TernaryTree, f: &LatticeField, prop: &Propagator, times: &[f64], sign: Sign, memo: &mut HashMap<String, SpaceTimeField>) -> Result<SpaceTimeField> {
        let key = tau.canonical();
        if let Some(v) = memo.get(&key) {
            return Ok(v.clone());
        }
        let out = match tau {
            TernaryTree::Leaf => prop.free_evolution(f, times, 0.0)?,
            TernaryTree::Node(c) => {
                let a = go(&c[0], f, prop, times, sign, memo)?;
                let b = go(&c[1], f, prop, times, sign, memo)?;
                let d = go(&c[2], f, prop, times, sign, memo)?;
                prop.duhamel(&LatticeField::zeros(prop.grid, Register::Space), &trilinear(&a, &b, &d), 0.0, sign)?
            }
        };
        memo.insert(key, out.clone());
        Ok(out)
    }
    let mut acc = SpaceTimeField::zeros(prop.grid, times.to_vec());
    for tau in enumerate_trees(n)? {
        acc = acc.add(&go(&tau, f, prop, times, sign, &mut memo)?);
    }
    Ok(acc)
}

/// Index triples `(n₁, n₂, n₃)` of odd orders `≤ max` with `n₁+n₂+n₃ > max`.
pub fn remainder_indices(max: u32) -> Vec<(u32, u32, u32)> {
    let odd: Vec<u32> = (1..=max).step_by(2).collect();
    let mut out = Vec::new();
    for &a in &odd {
        for &b in &odd {
            for &c in &odd {
                if a + b + c > max {
                    out.push((a, b, c));
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct ZTerms {
    /// `z_n` for odd `n ≤ M`.
    pub z: BTreeMap<u32, SpaceTimeField>,
    /// `z_{≤M} = Σ z_n`.
    pub z_le: SpaceTimeField,
    /// `[z, z, z]_{>M}`.
    pub high: SpaceTimeField,
}

/// Expansion terms of the random data `f^ω` via
/// `z_n = D[Σ_{n₁+n₂+n₃=n} z_{n₁} conj(z_{n₂}) z_{n₃}]`, which equals the
/// sum over trees with `n` leaves.
pub fn z_terms(f_omega: &LatticeField, max: u32, prop: &Propagator, times: &[f64], sign: Sign) -> Result<ZTerms> {
    if max.is_multiple_of(2) {
        return Err(Error::Domain(format!("expansion order must be odd, got {max}")));
    }
    if max > MAX_EXPANSION_ORDER {
        return Err(Error::Capability(format!("expansion order {max} exceeds the cap {MAX_EXPANSION_ORDER}")));
    }
    check_times(times)?;
    let zero = LatticeField::zeros(prop.grid, Register::Space);
    let mut z: BTreeMap<u32, SpaceTimeField> = BTreeMap::new();
    z.insert(1, prop.free_evolution(f_omega, times, 0.0)?);
    for n in (3..=max).step_by(2) {
        let mut forcing = SpaceTimeField::zeros(prop.grid, times.to_vec());
        for (a, b, c) in remainder_indices(n - 2).into_iter().filter(|&(a, b, c)| a + b + c == n) {
            forcing = forcing.add(&trilinear(&z[&a], &z[&b], &z[&c]));
        }
        z.insert(n, prop.duhamel(&zero, &forcing, 0.0, sign)?);
    }
    let mut z_le = SpaceTimeField::zeros(prop.grid, times.to_vec());
    for v in z.values() {
        z_le = z_le.add(v);
    }
    let mut high = SpaceTimeField::zeros(prop.grid, times.to_vec());
    for (a, b, c) in remainder_indices(max) {
        high = high.add(&trilinear(&z[&a], &z[&b], &z[&c]));
    }
    Ok(ZTerms { z, z_le, high })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub lambda: f64,
    pub survivors: usize,
    pub draws: usize,
    pub survival: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub n: usize,
    pub rows: Vec<SurvivalRow>,
    pub norms: Vec<f64>,
    pub fit: Option<SlopeFit>,
    /// Prediction `2/n` for the slope of `log(-log S)` against `log λ`.
    pub predicted_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub n: usize,
    pub draws: usize,
    pub law: Law,
    pub seed: u64,
    /// Explicit thresholds; quantile-based when empty.
    pub lambdas: Vec<f64>,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(SlopeFit { slope, intercept, stderr, points: n })
}

/// Survival table of `‖Σ_{τ∈TT_n} R_τ[f^ω]‖` under `norm`, one independent
/// draw per sub-seed of `spec.seed`.
pub fn tail_monte_carlo(f: &LatticeField, spec: &TailSpec, prop: &Propagator, times: &[f64], sign: Sign, norm: &(dyn Fn(&SpaceTimeField) -> f64 + Sync)) -> Result<TailTable> {
    if spec.draws < 50 {
        return usage("tail statistics need at least 50 draws");
    }
    check_odd(spec.n, MAX_EXPANSION_ORDER as usize)?;
    let norms: Vec<f64> = (0..spec.draws)
        .into_par_iter()
        .map(|i| {
            let draw = RandomDraw::sample(&f.grid, spec.law, sub_seed(spec.seed, i as u64));
            let fo = randomize(f, &draw)?;
            let zn = if spec.n == 1 { prop.free_evolution(&fo, times, 0.0)? } else { z_terms(&fo, spec.n as u32, prop, times, sign)?.z[&(spec.n as u32)].clone() };
            Ok(norm(&zn))
        })
        .collect::<Result<_>>()?;
    let lambdas = if spec.lambdas.is_empty() { quantile_lambdas(&norms, 0.9, 0.02, 16) } else { spec.lambdas.clone() };
    let rows: Vec<SurvivalRow> = lambdas
        .iter()
        .map(|&lambda| {
            let survivors = norms.iter().filter(|&&x| x > lambda).count();
            SurvivalRow { lambda, survivors, draws: spec.draws, survival: survivors as f64 / spec.draws as f64 }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.survival > 0.0 && r.survival < 1.0 && r.lambda > 0.0).map(|r| (r.lambda.ln(), (-r.survival.ln()).ln())).unzip();
    Ok(TailTable { n: spec.n, fit: linear_fit(&xs, &ys), rows, norms, predicted_slope: 2.0 / spec.n as f64 })
}

/// Thresholds at the empirical quantiles whose survival runs evenly from
/// `s_hi` down to `s_lo`.
pub fn quantile_lambdas(samples: &[f64], s_hi: f64, s_lo: f64, count: usize) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut out: Vec<f64> = (0..count)
        .map(|i| {
            let s = s_hi + (s_lo - s_hi) * i as f64 / (count - 1).max(1) as f64;
            let idx = (((1.0 - s) * n as f64).floor() as usize).min(n - 1);
            v[idx]
        })
        .collect();
    out.dedup();
    out
}
