//! Closed-form regularity thresholds and the exponent gates of the
//! four-linear estimate, with exhaustive dyadic verification.
//!
//! Strict inequalities are tested as `lhs > rhs + TIE`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, usage, Error, Result};

pub const TIE: f64 = 1e-12;

/// `s_c = (d - σ)/2`.
pub fn critical_exponent(d: usize, sigma: f64) -> f64 {
    (d as f64 - sigma) / 2.0
}

/// The three branches of `s_min` at a real dimension, in order of
/// increasing `d`.
pub fn s_min_branches(d: f64, sigma: f64) -> [f64; 3] {
    [(2.0 - sigma) / 4.0, (d + 2.0) / 4.0 - 5.0 * sigma / 8.0, (d + 2.0) / 2.0 - 1.5 * sigma]
}

/// Minimal data regularity of the probabilistic theory.
pub fn s_min(d: usize, sigma: f64) -> f64 {
    let d = d as f64;
    let b = s_min_branches(d, sigma);
    if d <= 1.5 * sigma {
        b[0]
    } else if d <= 3.5 * sigma - 2.0 {
        b[1]
    } else {
        b[2]
    }
}

/// Threshold of the first-order expansion.
pub fn s_min_first_order(d: usize, sigma: f64) -> f64 {
    let df = d as f64;
    let sc = critical_exponent(d, sigma);
    if sigma >= (df + 2.0) / 3.0 {
        sc / 3.0
    } else {
        sc * (df + 1.0 - 2.0 * sigma) / (df - 1.0)
    }
}

/// `μ(n, S) = min(nS + (n-1)(σ-2)/4, 2S + 3σ/4 - 1, S + σ - 1)`.
pub fn mu(n: u32, s: f64, sigma: f64) -> f64 {
    let n = n as f64;
    (n * s + (n - 1.0) * (sigma - 2.0) / 4.0).min(2.0 * s + 0.75 * sigma - 1.0).min(s + sigma - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub checked: usize,
    /// `(k₁, k₂, S)` with `k₁ < k₂` but `μ(k₁, S) > μ(k₂, S)`.
    pub violations: Vec<(u32, u32, f64)>,
}

pub fn mu_monotone_check(sigma: f64, s_grid: &[f64], k_max: u32) -> MonotoneReport {
    let mut violations = Vec::new();
    let mut checked = 0;
    for &s in s_grid {
        for k1 in 1..=k_max {
            for k2 in k1 + 1..=k_max {
                checked += 1;
                if mu(k1, s, sigma) > mu(k2, s, sigma) + TIE {
                    violations.push((k1, k2, s));
                }
            }
        }
    }
    MonotoneReport { checked, violations }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductiveOutcome {
    pub holds: bool,
    /// Right-hand side minus left-hand side.
    pub slack: f64,
}

/// `μ(k₁+k₂+k₃) ≤ μ(k₁) + min(μ(k₂), σ/4) + min(μ(k₃), σ/4) + σ/2 - 1`.
pub fn mu_inductive_check(k: [u32; 3], s: f64, sigma: f64) -> Result<InductiveOutcome> {
    if k[0] == 0 || k[0] > k[1] || k[1] > k[2] {
        return param("inductive check needs 1 <= k1 <= k2 <= k3");
    }
    let q = sigma / 4.0;
    let lhs = mu(k[0] + k[1] + k[2], s, sigma);
    let rhs = mu(k[0], s, sigma) + mu(k[1], s, sigma).min(q) + mu(k[2], s, sigma).min(q) + sigma / 2.0 - 1.0;
    let slack = rhs - lhs;
    Ok(InductiveOutcome { holds: slack >= -TIE, slack })
}

fn kappa_first_branch(d: usize, sigma: f64, kappa: u64) -> f64 {
    let (d, k) = (d as f64, kappa as f64);
    (d - sigma) / (2.0 * (k + 2.0)) - (k + 1.0) * (sigma - 2.0) / (4.0 * (k + 2.0))
}

/// Smallest expansion order `κ ≥ 0` with
/// `S > max{(d-σ)/(2(κ+2)) - (κ+1)(σ-2)/(4(κ+2)), (d-3σ+2)/2, (2d-5σ+4)/8}`,
/// or `None` when no order works.
pub fn kappa0(d: usize, sigma: f64, s: f64) -> Option<u64> {
    let df = d as f64;
    let fixed = ((df - 3.0 * sigma + 2.0) / 2.0).max((2.0 * df - 5.0 * sigma + 4.0) / 8.0);
    if s <= fixed + TIE {
        return None;
    }
    let ok = |k: u64| s > kappa_first_branch(d, sigma, k) + TIE;
    if ok(0) {
        return Some(0);
    }
    // The first branch equals (2d-σ-2)/(4(κ+2)) - (σ-2)/4; it decreases in κ
    // only when 2d > σ + 2 and then needs κ + 2 > (2d-σ-2)/(4S+σ-2).
    let num = 2.0 * df - sigma - 2.0;
    let den = 4.0 * s + sigma - 2.0;
    if num <= 0.0 || den <= 0.0 {
        return None;
    }
    let guess = (num / den - 2.0).floor().max(0.0);
    if guess > 1e15 {
        return None;
    }
    let start = (guess as u64).saturating_sub(2);
    (start..start + 64).find(|&k| ok(k))
}

/// Whether `(S, 𝔰, σ)` satisfy the hypotheses of the remainder contraction:
/// `𝔰 < S + σ - 1`, and `𝔰 < 2S + (3σ-4)/4` when `𝔰 > σ/4`.
pub fn remainder_regime(s: f64, s_frak: f64, sigma: f64) -> bool {
    s_frak < s + sigma - 1.0 && (s_frak <= sigma / 4.0 || s_frak < 2.0 * s + (3.0 * sigma - 4.0) / 4.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub d: usize,
    pub sigma: f64,
    pub s_c: f64,
    pub s_min: f64,
    pub s_min_first_order: f64,
}

pub fn threshold_table(sigma: f64, dims: impl IntoIterator<Item = usize>) -> Vec<ThresholdRow> {
    dims.into_iter()
        .map(|d| ThresholdRow { d, sigma, s_c: critical_exponent(d, sigma), s_min: s_min(d, sigma), s_min_first_order: s_min_first_order(d, sigma) })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateCase {
    Zzz,
    Zzv,
    Zvv,
    Vvv,
}

impl GateCase {
    pub const ALL: [GateCase; 4] = [GateCase::Zzz, GateCase::Zzv, GateCase::Zvv, GateCase::Vvv];
}

impl fmt::Display for GateCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateCase::Zzz => "zzz",
            GateCase::Zzv => "zzv",
            GateCase::Zvv => "zvv",
            GateCase::Vvv => "vvv",
        })
    }
}

impl FromStr for GateCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zzz" => Ok(GateCase::Zzz),
            "zzv" => Ok(GateCase::Zzv),
            "zvv" => Ok(GateCase::Zvv),
            "vvv" => Ok(GateCase::Vvv),
            other => usage(format!("unknown gate case {other:?}; expected zzz, zzv, zvv or vvv")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentContext {
    pub d: usize,
    pub sigma: f64,
    /// `S₁ ≤ S₂ ≤ S₃`.
    pub s: [f64; 3],
    /// Remainder regularity `𝔰`.
    pub s_frak: f64,
    pub sigma_star: f64,
}

impl ExponentContext {
    pub fn s_c(&self) -> f64 {
        critical_exponent(self.d, self.sigma)
    }

    /// `1/3 - σ/4 ≤ S₁ ≤ S₂ ≤ S₃ < s_c < 𝔰`.
    pub fn validate(&self) -> Result<()> {
        let [s1, s2, s3] = self.s;
        let sc = self.s_c();
        if !(self.sigma >= 2.0) {
            return param("gate context needs sigma >= 2");
        }
        if !(1.0 / 3.0 - self.sigma / 4.0 <= s1 + TIE && s1 <= s2 && s2 <= s3 && s3 < sc && sc < self.s_frak) {
            return param(format!("gate context violates 1/3 - sigma/4 <= S1 <= S2 <= S3 < s_c = {sc} < s_frak"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub bound: f64,
    pub case_ok: bool,
}

/// Upper bound on `σ*` admitted by a gate case.
pub fn gate_bound(case: GateCase, ctx: &ExponentContext) -> f64 {
    let [s1, s2, s3] = ctx.s;
    let q = ctx.sigma / 4.0;
    let sf = ctx.s_frak;
    let sc = ctx.s_c();
    match case {
        GateCase::Zzz => s1 + s2.min(q) + s3.min(q) + (ctx.sigma - 2.0) / 2.0,
        GateCase::Zzv => s1 + s2.min(q) + sf.min(q) + (ctx.sigma - 2.0) / 2.0,
        GateCase::Zvv => (2.0 * sf - sc + (ctx.sigma - 2.0) / 4.0 + q.min(s1)).min(s1 + ctx.sigma - 1.0),
        GateCase::Vvv => sf + 2.0 * (sf - sc),
    }
}

pub fn exponent_gate(case: GateCase, ctx: &ExponentContext) -> Result<GateOutcome> {
    ctx.validate()?;
    let bound = gate_bound(case, ctx);
    Ok(GateOutcome { bound, case_ok: ctx.sigma_star <= bound + TIE })
}

/// One of the four functions in the four-linear form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    /// Dual test function `v*` with `α = -σ*`.
    Dual,
    /// Remainder input `v_j` with `α = 𝔰`.
    Remainder,
    /// Random input `z_j` with `α = S_j`.
    Random(f64),
}

impl Slot {
    fn alpha(self, ctx: &ExponentContext) -> f64 {
        match self {
            Slot::Dual => -ctx.sigma_star,
            Slot::Remainder => ctx.s_frak,
            Slot::Random(s) => s,
        }
    }

    fn is_x(self) -> bool {
        !matches!(self, Slot::Random(_))
    }
}

pub fn case_slots(case: GateCase, ctx: &ExponentContext) -> [Slot; 4] {
    let [s1, s2, s3] = ctx.s;
    match case {
        GateCase::Zzz => [Slot::Dual, Slot::Random(s1), Slot::Random(s2), Slot::Random(s3)],
        GateCase::Zzv => [Slot::Dual, Slot::Random(s1), Slot::Random(s2), Slot::Remainder],
        GateCase::Zvv => [Slot::Dual, Slot::Random(s1), Slot::Remainder, Slot::Remainder],
        GateCase::Vvv => [Slot::Dual, Slot::Remainder, Slot::Remainder, Slot::Remainder],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCounterexample {
    pub log2_n1: u32,
    pub log2_n3: u32,
    pub log2_n4: u32,
    /// Functions in positions 1..4 (frequencies `N₁ = N₂ ≥ N₃ ≥ N₄`).
    pub order: [Slot; 4],
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceOutcome {
    pub holds: bool,
    pub checked: u64,
    pub counterexample: Option<GateCounterexample>,
}

const PERMUTATIONS: [[usize; 4]; 24] = {
    let mut out = [[0usize; 4]; 24];
    let mut n = 0;
    let mut a = 0;
    while a < 4 {
        let mut b = 0;
        while b < 4 {
            let mut c = 0;
            while c < 4 {
                if a != b && a != c && b != c && a + b + c <= 6 && 6 - a - b - c < 4 && 6 - a - b - c != a && 6 - a - b - c != b && 6 - a - b - c != c {
                    let d = 6 - a - b - c;
                    out[n] = [a, b, c, d];
                    n += 1;
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
};

/// Exhaustive check of the dyadic four-linear exponent inequality
/// `N₃^{σ/4-α₃} N₄^{σ/4-α₄} min(N₃^{β₂₃}N₄^{β₁₄}, N₃^{β₁₃}N₄^{β₂₄}) ≤ N₁^{σ-1+α₁+α₂}`
/// over `N₁ = N₂ ≥ N₃ ≥ N₄` in `2^{0..=max_log2}` and all placements of
/// the labeled functions. With `reduced` only the slice `N₁ = N₃` is scanned.
pub fn brute_force_slots(slots: &[Slot; 4], ctx: &ExponentContext, max_log2: u32, reduced: bool) -> BruteForceOutcome {
    let sigma = ctx.sigma;
    let q = sigma / 4.0;
    let beta_vv = (ctx.d as f64 - 1.0) / 2.0 - q;
    let mut checked = 0u64;
    for perm in PERMUTATIONS {
        let order = [slots[perm[0]], slots[perm[1]], slots[perm[2]], slots[perm[3]]];
        let al: Vec<f64> = order.iter().map(|s| s.alpha(ctx)).collect();
        let beta = |i: usize, j: usize| if order[i].is_x() && order[j].is_x() { beta_vv } else { 0.0 };
        let (b23, b14, b13, b24) = (beta(1, 2), beta(0, 3), beta(0, 2), beta(1, 3));
        let rhs_rate = sigma - 1.0 + al[0] + al[1];
        for k1 in 0..=max_log2 {
            let k3_range = if reduced { k1..=k1 } else { 0..=k1 };
            for k3 in k3_range {
                for k4 in 0..=k3 {
                    checked += 1;
                    let (a, b, c) = (k3 as f64, k4 as f64, k1 as f64);
                    let lhs = (q - al[2]) * a + (q - al[3]) * b + (b23 * a + b14 * b).min(b13 * a + b24 * b);
                    let rhs = rhs_rate * c;
                    if lhs > rhs + TIE * (1.0 + lhs.abs() + rhs.abs()) {
                        return BruteForceOutcome {
                            holds: false,
                            checked,
                            counterexample: Some(GateCounterexample { log2_n1: k1, log2_n3: k3, log2_n4: k4, order, lhs, rhs }),
                        };
                    }
                }
            }
        }
    }
    BruteForceOutcome { holds: true, checked, counterexample: None }
}

pub fn brute_force_gate(case: GateCase, ctx: &ExponentContext, max_log2: u32) -> Result<BruteForceOutcome> {
    ctx.validate()?;
    Ok(brute_force_slots(&case_slots(case, ctx), ctx, max_log2, false))
}

/// The `N₁ = N₃` slice only.
pub fn brute_force_gate_reduced(case: GateCase, ctx: &ExponentContext, max_log2: u32) -> Result<BruteForceOutcome> {
    ctx.validate()?;
    Ok(brute_force_slots(&case_slots(case, ctx), ctx, max_log2, true))
}

/// Random context with `σ ∈ [2, 4]`, integer `d ∈ (σ, σ + 8]`,
/// `1/3 - σ/4 ≤ S₁ ≤ S₂ ≤ S₃ < s_c < 𝔰 < s_c + (σ-1)/2`; `σ*` is left at 0.
pub fn random_context(rng: &mut impl Rng) -> ExponentContext {
    let sigma: f64 = rng.random_range(2.0..=4.0);
    let d = sigma.floor() as usize + rng.random_range(1..=8usize);
    let sc = critical_exponent(d, sigma);
    let lo = 1.0 / 3.0 - sigma / 4.0;
    let mut s = [rng.random_range(lo..sc), rng.random_range(lo..sc), rng.random_range(lo..sc)];
    s.sort_by(f64::total_cmp);
    let s_frak = sc + rng.random_range(0.0..1.0f64).max(1e-6) * (sigma - 1.0) / 2.0;
    ExponentContext { d, sigma, s, s_frak, sigma_star: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_distinct() {
        let mut p = PERMUTATIONS.to_vec();
        p.sort();
        p.dedup();
        assert_eq!(p.len(), 24);
    }

    #[test]
    fn unknown_case_label() {
        assert!(matches!("zvz".parse::<GateCase>(), Err(Error::Usage(_))));
        assert_eq!("zvv".parse::<GateCase>().unwrap(), GateCase::Zvv);
    }

    #[test]
    fn kappa_infeasible_below_threshold() {
        assert_eq!(kappa0(5, 4.0, 0.0), Some(1));
        assert_eq!(kappa0(5, 4.0, s_min(5, 4.0) - 0.01), None);
    }
}
