//! The remainder nonlinearity `Φ_z`, the Picard map `𝒦`, the solution
//! assembly `u = z_{≤M} + v`, and an independent split-step solver used as
//! an oracle.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::evolution::{Propagator, Sign};
use crate::field::{randomize, time_grid, trilinear, LatticeField, RandomDraw, Register, SpaceTimeField, C64};
use crate::thresholds::remainder_regime;
use crate::trees::{z_terms, ZTerms};

/// `|z+v|²(z+v) − |z|²z`, pointwise.
pub fn phi_z(z: &SpaceTimeField, v: &SpaceTimeField) -> SpaceTimeField {
    let u = z.add(v);
    trilinear(&u, &u, &u).sub(&trilinear(z, z, z))
}

/// The same quantity as the sum of `h₁ conj(h₂) h₃` over the seven triples
/// in `{z, v}³` other than `(z, z, z)`.
pub fn phi_z_expanded(z: &SpaceTimeField, v: &SpaceTimeField) -> SpaceTimeField {
    let mut acc = SpaceTimeField::zeros(z.grid, z.times.clone());
    for mask in 1u32..8 {
        let pick = |bit: u32| if mask >> bit & 1 == 1 { v } else { z };
        acc = acc.add(&trilinear(pick(0), pick(1), pick(2)));
    }
    acc
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PicardConfig {
    pub tolerance: f64,
    pub max_iters: usize,
    /// Consecutive ratios `≥ 1` that count as divergence.
    pub divergence_run: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iters: 200, divergence_run: 5 }
    }
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub v: SpaceTimeField,
    pub converged: bool,
    pub iterations: usize,
    /// `‖v_{k+1} − v_k‖` in `L²_t L²_x`.
    pub differences: Vec<f64>,
    /// Successive difference ratios.
    pub ratios: Vec<f64>,
}

impl PicardOutcome {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// `𝒦(v) = e^{i(t−t₀)Λ}v₀ ∓ i∫_{t₀}^t e^{i(t−s)Λ}(Φ_z[v] + h)(s) ds`.
pub fn apply_k(v0: &LatticeField, z: &SpaceTimeField, h: &SpaceTimeField, v: &SpaceTimeField, prop: &Propagator, t0: f64, sign: Sign) -> Result<SpaceTimeField> {
    prop.duhamel(v0, &phi_z(z, v).add(h), t0, sign)
}

/// Picard iteration of `𝒦` from `Duhamel(v₀, h)`. Non-convergence is a
/// result, not an error.
pub fn iterate_k(v0: &LatticeField, z: &SpaceTimeField, h: &SpaceTimeField, prop: &Propagator, t0: f64, sign: Sign, config: &PicardConfig) -> Result<PicardOutcome> {
    if !z.same_times(h) || z.grid != prop.grid {
        return usage("Picard inputs live on different grids");
    }
    let (a, b) = z.interval();
    if !(b > a) {
        return usage("the time interval must have positive length");
    }
    let mut v = prop.duhamel(v0, h, t0, sign)?;
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    let mut run = 0;
    for k in 1..=config.max_iters {
        let next = apply_k(v0, z, h, &v, prop, t0, sign)?;
        let diff = next.sub(&v).l2_norm();
        let scale = next.l2_norm().max(f64::MIN_POSITIVE);
        if let Some(&prev) = differences.last() {
            let r: f64 = if prev > 0.0 { diff / prev } else { 0.0 };
            ratios.push(r);
            run = if r >= 1.0 { run + 1 } else { 0 };
        }
        differences.push(diff);
        v = next;
        if !diff.is_finite() || run >= config.divergence_run {
            return Ok(PicardOutcome { v, converged: false, iterations: k, differences, ratios });
        }
        if diff <= config.tolerance * scale {
            return Ok(PicardOutcome { v, converged: true, iterations: k, differences, ratios });
        }
    }
    Ok(PicardOutcome { v, converged: false, iterations: config.max_iters, differences, ratios })
}

/// Window suggestion `T_{δ₀} = 1/(6(‖z‖_∞ + ‖v₀‖_∞ + δ₀)²)`.
pub fn contraction_window(z_sup: f64, v0_sup: f64, delta0: f64) -> f64 {
    1.0 / (6.0 * (z_sup + v0_sup + delta0).powi(2))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveConfig {
    pub order: u32,
    /// Requested final time; `None` uses the contraction window.
    pub horizon: Option<f64>,
    pub steps_per_unit: usize,
    pub delta0: f64,
    pub max_halvings: usize,
    pub picard: PicardConfig,
    /// Exponents `(S, 𝔰)` checked against the remainder regime, if given.
    pub exponents: Option<(f64, f64)>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { order: 3, horizon: None, steps_per_unit: 128, delta0: 1.0, max_halvings: 6, picard: PicardConfig::default(), exponents: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub window: f64,
    pub halvings: usize,
    pub converged: bool,
    pub iterations: usize,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    /// `‖u − e^{itΛ}f^ω ± i∫₀ᵗ e^{i(t−s)Λ}|u|²u‖ / ‖u‖`, same quadrature.
    pub integral_residual: f64,
    /// Finite-difference residual of `(i∂_t + Λ)u = ±|u|²u` relative to the
    /// nonlinearity.
    pub differential_residual: f64,
    /// `None` when no exponents were configured.
    pub in_regime: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
    pub z: ZTerms,
    pub f_omega: LatticeField,
    pub diagnostics: SolveDiagnostics,
}

/// Relative residual of the Duhamel form of the full equation.
pub fn integral_residual(u: &SpaceTimeField, f: &LatticeField, prop: &Propagator, sign: Sign) -> Result<f64> {
    let rhs = prop.duhamel(f, &trilinear(u, u, u), 0.0, sign)?;
    let n = u.l2_norm();
    let d = u.sub(&rhs).l2_norm();
    Ok(if n > 0.0 { d / n } else { d })
}

/// `u = z_{≤M} + v` on `[0, T]` with `v` the fixed point of the iteration
/// map forced by `[z, z, z]_{>M}`; the window halves until Picard converges.
pub fn solve_u(f: &LatticeField, draw: &RandomDraw, prop: &Propagator, sign: Sign, config: &SolveConfig) -> Result<Solution> {
    let f_omega = randomize(f, draw)?;
    let mut window = match config.horizon {
        Some(t) if t > 0.0 => t,
        Some(t) => return usage(format!("horizon {t} must be positive")),
        None => {
            let free = prop.free_evolution(&f_omega, &[0.0], 0.0)?;
            contraction_window(free.max_abs(), 0.0, config.delta0)
        }
    };
    let in_regime = config.exponents.map(|(s, s_frak)| remainder_regime(s, s_frak, prop.sigma));
    let mut halvings = 0;
    loop {
        let times = time_grid(0.0, window, config.steps_per_unit);
        let z = z_terms(&f_omega, config.order, prop, &times, sign)?;
        let zero = LatticeField::zeros(prop.grid, Register::Space);
        let out = iterate_k(&zero, &z.z_le, &z.high, prop, 0.0, sign, &config.picard)?;
        if out.converged || halvings >= config.max_halvings {
            let u = z.z_le.add(&out.v);
            let nonlinear = trilinear(&u, &u, &u);
            let diagnostics = SolveDiagnostics {
                window,
                halvings,
                converged: out.converged,
                iterations: out.iterations,
                max_ratio: out.max_ratio(),
                ratios: out.ratios.clone(),
                integral_residual: integral_residual(&u, &f_omega, prop, sign)?,
                differential_residual: prop.residual(&u, &nonlinear, sign)?,
                in_regime,
            };
            return Ok(Solution { u, v: out.v, z, f_omega, diagnostics });
        }
        window /= 2.0;
        halvings += 1;
    }
}

/// Direct Picard iteration of `u = e^{itΛ}f ∓ i∫₀ᵗ e^{i(t−s)Λ}|u|²u ds`
/// without the `z + v` splitting.
pub fn direct_fixed_point(f: &LatticeField, prop: &Propagator, times: &[f64], sign: Sign, config: &PicardConfig) -> Result<PicardOutcome> {
    let mut u = prop.free_evolution(f, times, 0.0)?;
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    for k in 1..=config.max_iters {
        let next = prop.duhamel(f, &trilinear(&u, &u, &u), 0.0, sign)?;
        let diff = next.sub(&u).l2_norm();
        if let Some(&prev) = differences.last() {
            ratios.push(if prev > 0.0 { diff / prev } else { 0.0 });
        }
        differences.push(diff);
        u = next;
        if diff <= config.tolerance * u.l2_norm().max(f64::MIN_POSITIVE) {
            return Ok(PicardOutcome { v: u, converged: true, iterations: k, differences, ratios });
        }
    }
    Ok(PicardOutcome { v: u, converged: false, iterations: config.max_iters, differences, ratios })
}

/// Strang split-step solution of `(i∂_t + Λ)u = ±|u|²u`, sampled at
/// `times` (which must start at 0), with `substeps` steps per sample gap.
pub fn split_step(f: &LatticeField, prop: &Propagator, times: &[f64], sign: Sign, substeps: usize) -> Result<SpaceTimeField> {
    if times.first() != Some(&0.0) {
        return usage("split-step times must start at 0");
    }
    let mut u = f.to_space();
    let mut slices = vec![u.clone()];
    for w in times.windows(2) {
        let dt = (w[1] - w[0]) / substeps as f64;
        for _ in 0..substeps {
            u = prop.propagate(&u, dt / 2.0).into_register(Register::Space);
            for x in u.data.iter_mut() {
                *x *= C64::from_polar(1.0, -sign.factor() * x.norm_sqr() * dt);
            }
            u = prop.propagate(&u, dt / 2.0).into_register(Register::Space);
        }
        slices.push(u.clone());
    }
    SpaceTimeField::new(times.to_vec(), slices)
}

/// Run manifest of one solver invocation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: SolveConfig,
    pub seed: u64,
    pub diagnostics: SolveDiagnostics,
    pub u_norm: f64,
    pub v_norm: f64,
    pub oracle_error: Option<f64>,
}
