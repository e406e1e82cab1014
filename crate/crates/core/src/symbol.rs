//! Dispersion symbols `m(ξ)` of order `σ`, their order-condition checker and
//! the one-dimensional C² extension of a locally given symbol.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, usage, Error, Result};
use crate::field::rng_from_seed;

pub type Eval0 = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type Eval1 = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type Eval2 = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum SymbolValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(DMatrix<f64>),
}

#[derive(Clone)]
pub struct DispersionSymbol {
    pub id: String,
    pub dim: usize,
    pub sigma: f64,
    pub c_lambda: f64,
    pub c_max: f64,
    eval0: Eval0,
    eval1: Eval1,
    eval2: Eval2,
}

impl fmt::Debug for DispersionSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DispersionSymbol")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("sigma", &self.sigma)
            .field("c_lambda", &self.c_lambda)
            .field("c_max", &self.c_max)
            .finish()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Symbol `g(|ξ|)` from a radial profile and its first two derivatives.
/// `g2(0)` must be finite; it gives the Hessian at the origin.
fn radial(dim: usize, g: impl Fn(f64) -> f64 + Send + Sync + 'static, g1: impl Fn(f64) -> f64 + Send + Sync + 'static, g2: impl Fn(f64) -> f64 + Send + Sync + 'static) -> (Eval0, Eval1, Eval2) {
    let g1 = Arc::new(g1);
    let g2 = Arc::new(g2);
    let e0: Eval0 = Arc::new(move |xi: &[f64]| g(norm(xi)));
    let g1a = g1.clone();
    let e1: Eval1 = Arc::new(move |xi: &[f64]| {
        let r = norm(xi);
        if r == 0.0 {
            return vec![0.0; xi.len()];
        }
        let s = g1a(r) / r;
        xi.iter().map(|x| s * x).collect()
    });
    let e2: Eval2 = Arc::new(move |xi: &[f64]| {
        let r = norm(xi);
        if r == 0.0 {
            return DMatrix::identity(dim, dim) * g2(0.0);
        }
        let (a, b) = (g2(r), g1(r) / r);
        DMatrix::from_fn(dim, dim, |i, j| {
            let p = xi[i] * xi[j] / (r * r);
            a * p + b * (if i == j { 1.0 } else { 0.0 } - p)
        })
    });
    (e0, e1, e2)
}

/// `p (p-1) r^{p-2}` with the removable value at `r = 0` for `p >= 2`.
fn power_second(p: f64, r: f64) -> f64 {
    if r == 0.0 {
        return if p == 2.0 { 2.0 } else { 0.0 };
    }
    p * (p - 1.0) * r.powf(p - 2.0)
}

impl DispersionSymbol {
    pub fn custom(id: impl Into<String>, dim: usize, sigma: f64, c_lambda: f64, c_max: f64, eval0: Eval0, eval1: Eval1, eval2: Eval2) -> Result<Self> {
        if dim == 0 {
            return param("symbol dimension must be positive");
        }
        if !(sigma >= 2.0 && sigma.is_finite()) {
            return param(format!("symbol order must be >= 2, got {sigma}"));
        }
        if !(c_lambda >= 1.0) || !(c_max >= 1.0) {
            return param("symbol constants C_lambda and C_max must be >= 1");
        }
        Ok(Self { id: id.into(), dim, sigma, c_lambda, c_max, eval0, eval1, eval2 })
    }

    /// `m(ξ) = |ξ|^σ`.
    pub fn power(dim: usize, sigma: f64, c_lambda: f64, c_max: f64) -> Result<Self> {
        let (e0, e1, e2) = radial(dim, move |r| r.powf(sigma), move |r| sigma * r.powf(sigma - 1.0), move |r| power_second(sigma, r));
        Self::custom(format!("power:{sigma}"), dim, sigma, c_lambda, c_max, e0, e1, e2)
    }

    /// `m(ξ) = Σ a_i |ξ|^{p_i}` with every `p_i >= 2`.
    pub fn mixed(dim: usize, terms: &[(f64, f64)], sigma: f64, c_lambda: f64, c_max: f64) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|&(_, p)| !(p >= 2.0)) {
            return param("mixed symbol needs at least one term, each with exponent >= 2");
        }
        let (t0, t1, t2) = (terms.to_vec(), terms.to_vec(), terms.to_vec());
        let (e0, e1, e2) = radial(
            dim,
            move |r| t0.iter().map(|&(a, p)| a * r.powf(p)).sum(),
            move |r| t1.iter().map(|&(a, p)| a * p * r.powf(p - 1.0)).sum(),
            move |r| t2.iter().map(|&(a, p)| a * power_second(p, r)).sum(),
        );
        let id = terms.iter().map(|(a, p)| format!("{a}|xi|^{p}")).collect::<Vec<_>>().join("+");
        Self::custom(format!("mixed:{id}"), dim, sigma, c_lambda, c_max, e0, e1, e2)
    }

    /// Degenerate `m(ξ) = ξ₁`; fails the order conditions.
    pub fn linear(dim: usize) -> Result<Self> {
        let e0: Eval0 = Arc::new(|xi: &[f64]| xi[0]);
        let e1: Eval1 = Arc::new(|xi: &[f64]| {
            let mut g = vec![0.0; xi.len()];
            g[0] = 1.0;
            g
        });
        let e2: Eval2 = Arc::new(move |_: &[f64]| DMatrix::zeros(dim, dim));
        Self::custom("linear", dim, 2.0, 1.0, 1.0, e0, e1, e2)
    }

    /// Same evaluators with different constants.
    pub fn with_constants(&self, c_lambda: f64, c_max: f64) -> Result<Self> {
        Self::custom(self.id.clone(), self.dim, self.sigma, c_lambda, c_max, self.eval0.clone(), self.eval1.clone(), self.eval2.clone())
    }

    pub fn value(&self, xi: &[f64]) -> f64 {
        (self.eval0)(xi)
    }

    pub fn gradient(&self, xi: &[f64]) -> Vec<f64> {
        (self.eval1)(xi)
    }

    pub fn hessian(&self, xi: &[f64]) -> DMatrix<f64> {
        (self.eval2)(xi)
    }

    pub fn eval(&self, xi: &[f64], order: u8) -> Result<SymbolValue> {
        if xi.len() != self.dim {
            return usage(format!("expected a {}-vector, got length {}", self.dim, xi.len()));
        }
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite frequency {xi:?}")));
        }
        match order {
            0 => Ok(SymbolValue::Scalar(self.value(xi))),
            1 => Ok(SymbolValue::Vector(self.gradient(xi))),
            2 => Ok(SymbolValue::Matrix(self.hessian(xi))),
            _ => usage(format!("derivative order must be 0, 1 or 2, got {order}")),
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim as f64 <= self.sigma {
            out.push(format!("dimension {} does not exceed the order {}; the directional estimates assume d > sigma", self.dim, self.sigma));
        }
        out
    }

    /// Worst relative disagreement between the supplied derivatives and
    /// central differences (step `1e-4 |ξ|`) of the lower-order evaluator.
    pub fn finite_difference_error(&self, points: &[Vec<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for xi in points {
            let h = 1e-4 * norm(xi).max(1e-3);
            let g = self.gradient(xi);
            let hm = self.hessian(xi);
            let scale_g = norm(&g).max(f64::MIN_POSITIVE);
            let scale_h = hm.norm().max(f64::MIN_POSITIVE);
            let mut err_g = vec![0.0; self.dim];
            let mut err_h = DMatrix::zeros(self.dim, self.dim);
            for k in 0..self.dim {
                let mut p = xi.clone();
                let mut m = xi.clone();
                p[k] += h;
                m[k] -= h;
                err_g[k] = (self.value(&p) - self.value(&m)) / (2.0 * h) - g[k];
                let (gp, gm) = (self.gradient(&p), self.gradient(&m));
                for i in 0..self.dim {
                    err_h[(i, k)] = (gp[i] - gm[i]) / (2.0 * h) - hm[(i, k)];
                }
            }
            worst = worst.max(norm(&err_g) / scale_g).max(err_h.norm() / scale_h);
        }
        worst
    }
}

/// Quasi-uniform directions on the unit sphere: both signs for `d = 1`, an
/// angular grid for `d = 2`, a Fibonacci lattice for `d = 3`, seeded
/// Gaussian directions above.
pub fn sphere_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = rng_from_seed(seed);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let n = norm(&v);
                    v.into_iter().map(|x| x / n).collect()
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSampling {
    pub r_max: f64,
    pub per_shell: usize,
    pub directions: usize,
    pub seed: u64,
}

impl Default for ConditionSampling {
    fn default() -> Self {
        Self { r_max: 1024.0, per_shell: 8, directions: 16, seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionRatios {
    pub first_upper: f64,
    pub second_upper: f64,
    pub third_upper: f64,
    pub gradient_lower: f64,
    pub determinant_lower: f64,
}

impl ConditionRatios {
    fn max(&self) -> f64 {
        [self.first_upper, self.second_upper, self.third_upper, self.gradient_lower, self.determinant_lower].into_iter().fold(0.0, f64::max)
    }

    fn merge(&mut self, o: &Self) {
        self.first_upper = self.first_upper.max(o.first_upper);
        self.second_upper = self.second_upper.max(o.second_upper);
        self.third_upper = self.third_upper.max(o.third_upper);
        self.gradient_lower = self.gradient_lower.max(o.gradient_lower);
        self.determinant_lower = self.determinant_lower.max(o.determinant_lower);
    }
}

/// Result of the order-condition scan. Every ratio is normalized so the
/// condition holds iff the ratio is at most one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolReport {
    pub passed: bool,
    pub worst_ratio: ConditionRatios,
    pub sample_count: usize,
    pub violation_count: usize,
    pub violating_points: Vec<Vec<f64>>,
    /// Smallest `C_Λ` for which the sampled points would all pass.
    pub required_c_lambda: f64,
    pub warnings: Vec<String>,
}

const MAX_LISTED_VIOLATIONS: usize = 256;

fn ratios_at(sym: &DispersionSymbol, xi: &[f64]) -> ConditionRatios {
    let d = sym.dim;
    let r = norm(xi);
    let c = sym.c_lambda;
    let s = sym.sigma;
    let g = sym.gradient(xi);
    let hm = sym.hessian(xi);
    let h = 1e-4 * r;
    let mut third = 0.0f64;
    for k in 0..d {
        let mut p = xi.to_vec();
        let mut m = xi.to_vec();
        p[k] += h;
        m[k] -= h;
        let diff = (sym.hessian(&p) - sym.hessian(&m)) / (2.0 * h);
        third = third.max(diff.amax());
    }
    let first = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let det = hm.clone().determinant().abs().powf(1.0 / d as f64);
    let lower = |target: f64, have: f64| if have > 0.0 { target / have } else { f64::INFINITY };
    ConditionRatios {
        first_upper: first / (c * r.powf(s - 1.0)),
        second_upper: hm.amax() / (c * r.powf(s - 2.0)),
        third_upper: third / (c * r.powf(s - 3.0)),
        gradient_lower: lower(r.powf(s - 1.0) / c, norm(&g)),
        determinant_lower: lower(r.powf(s - 2.0) / c, det),
    }
}

/// Samples `|∂^α m| ≤ C_Λ|ξ|^{σ-|α|}` for `|α| ≤ 3`, `|∇m| ≥ C_Λ⁻¹|ξ|^{σ-1}`
/// and `|det D²m|^{1/d} ≥ C_Λ⁻¹|ξ|^{σ-2}` on dyadic shells of
/// `[C_max, r_max]`.
pub fn check_order_conditions(sym: &DispersionSymbol, sampling: &ConditionSampling) -> Result<SymbolReport> {
    if sampling.per_shell < 8 {
        return usage("order-condition sampling needs at least 8 radii per dyadic shell");
    }
    if sampling.directions == 0 || !(sampling.r_max >= sym.c_max) {
        return usage("order-condition sampling is empty");
    }
    let shells = (sampling.r_max / sym.c_max).log2().max(0.0);
    let count = ((shells * sampling.per_shell as f64).ceil() as usize).max(1);
    let radii: Vec<f64> = (0..=count).map(|i| (sym.c_max * 2f64.powf(shells * i as f64 / count as f64)).min(sampling.r_max)).collect();
    let dirs = sphere_directions(sym.dim, sampling.directions, sampling.seed);
    let mut worst = ConditionRatios::default();
    let mut violating = Vec::new();
    let mut violation_count = 0;
    let mut n = 0;
    for &r in &radii {
        for e in &dirs {
            let xi: Vec<f64> = e.iter().map(|x| r * x).collect();
            let q = ratios_at(sym, &xi);
            n += 1;
            if !(q.max() <= 1.0 + 1e-12) {
                violation_count += 1;
                if violating.len() < MAX_LISTED_VIOLATIONS {
                    violating.push(xi);
                }
            }
            worst.merge(&q);
        }
    }
    Ok(SymbolReport {
        passed: violation_count == 0,
        required_c_lambda: sym.c_lambda * worst.max(),
        worst_ratio: worst,
        sample_count: n,
        violation_count,
        violating_points: violating,
        warnings: sym.warnings(),
    })
}

/// Locally given one-dimensional symbol with its first two derivatives.
#[derive(Clone)]
pub struct LocalSymbol {
    pub f0: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub f1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub f2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl LocalSymbol {
    pub fn power(sigma: f64) -> Self {
        Self {
            f0: Arc::new(move |x| x.powf(sigma)),
            f1: Arc::new(move |x| sigma * x.powf(sigma - 1.0)),
            f2: Arc::new(move |x| sigma * (sigma - 1.0) * x.powf(sigma - 2.0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionCoefficients {
    pub a_minus: f64,
    pub b_minus: f64,
    pub c_minus: f64,
    pub a_plus: f64,
    pub b_plus: f64,
    pub c_plus: f64,
    pub m_param: f64,
    /// `+1` when the local derivatives are positive, `-1` when negative.
    pub sign: f64,
    pub r: f64,
    pub c0: f64,
}

pub struct Extension {
    pub symbol: DispersionSymbol,
    pub coefficients: ExtensionCoefficients,
}

/// Profile pieces on the unit-normalized problem, returning `(L, L', L'')`.
#[derive(Clone, Copy)]
struct UnitPieces {
    k: ExtensionCoefficients,
    sigma: f64,
}

impl UnitPieces {
    fn left(&self, x: f64) -> [f64; 3] {
        let (s, m) = (self.sigma, self.k.m_param);
        let h1 = [x.powf(s) - (s - 1.0) / (s + 1.0) * x.powf(s + 1.0), s * x.powf(s - 1.0) - (s - 1.0) * x.powf(s), power_second(s, x) - s * (s - 1.0) * x.powf(s - 1.0)];
        let q = s + m;
        let h2 = [x.powf(q + 1.0) / ((q + 1.0) * q), x.powf(q) / q, x.powf(q - 1.0)];
        std::array::from_fn(|i| if i == 0 { self.k.a_minus } else { 0.0 } + self.k.b_minus * h1[i] + self.k.c_minus * h2[i])
    }

    fn negative(&self, x: f64) -> [f64; 3] {
        let (s, a) = (self.sigma, x.abs());
        let b = self.k.b_minus;
        [self.k.a_minus + b * a.powf(s), -b * s * a.powf(s - 1.0), b * power_second(s, a)]
    }

    /// Right piece evaluated at `y = ξ / C₀`, derivatives in `ξ`.
    fn right(&self, x: f64) -> [f64; 3] {
        let s = self.sigma;
        let c0 = self.k.c0;
        let y = x / c0;
        let h1 = [y.powf(s) / s - (s - 1.0) / (s * (s + 1.0)) * y.powf(-s), y.powf(s - 1.0) + (s - 1.0) / (s + 1.0) * y.powf(-s - 1.0), (s - 1.0) * (y.powf(s - 2.0) - y.powf(-s - 2.0))];
        let h2 = [(y.powf(s) + y.powf(-s)) / s, y.powf(s - 1.0) - y.powf(-s - 1.0), (s - 1.0) * y.powf(s - 2.0) + (s + 1.0) * y.powf(-s - 2.0)];
        let scale = [1.0, 1.0 / c0, 1.0 / (c0 * c0)];
        std::array::from_fn(|i| if i == 0 { self.k.a_plus } else { 0.0 } + scale[i] * (self.k.b_plus * h1[i] + self.k.c_plus * h2[i]))
    }
}

/// C² extension to all of ℝ of a symbol given on `(R, C₀R)` whose first two
/// derivatives share one sign there. The result agrees bitwise with `m_l`
/// on `[R, C₀R)`.
pub fn extend_symbol_1d(m_l: &LocalSymbol, r: f64, c0: f64, sigma: f64, c_l: f64, m_param: Option<f64>) -> Result<Extension> {
    if !(r > 0.0 && r.is_finite()) {
        return param("extension interval must start at R > 0");
    }
    if !(c0 > 1.0 && c0.is_finite()) {
        return param("extension interval ratio C0 must exceed 1");
    }
    if !(sigma >= 2.0) || !(c_l >= 1.0) {
        return param("extension needs sigma >= 2 and C_L >= 1");
    }
    let m_param = m_param.unwrap_or(1.0 / (2.0 * c_l * c_l) + 1.0);
    if !(m_param > 1.0 / (2.0 * c_l * c_l)) {
        return param(format!("m_param must exceed 1/(2 C_L^2) = {}", 1.0 / (2.0 * c_l * c_l)));
    }
    let probes: Vec<f64> = (0..=64).map(|i| r * (1.0 + (c0 - 1.0) * i as f64 / 64.0)).collect();
    let signs: Vec<(f64, f64)> = probes.iter().map(|&x| ((m_l.f1)(x).signum(), (m_l.f2)(x).signum())).collect();
    let sign = if signs.iter().all(|&(a, b)| a > 0.0 && b > 0.0) {
        1.0
    } else if signs.iter().all(|&(a, b)| a < 0.0 && b < 0.0) {
        -1.0
    } else {
        return Err(Error::Unsupported("local symbol derivatives change sign or disagree in sign on (R, C0 R)".into()));
    };
    // Unit problem L(η) = s R^{-σ} m_l(Rη) on (1, C₀).
    let unit = |x: f64| {
        [sign * r.powf(-sigma) * (m_l.f0)(r * x), sign * r.powf(1.0 - sigma) * (m_l.f1)(r * x), sign * r.powf(2.0 - sigma) * (m_l.f2)(r * x)]
    };
    let [l1, d1, dd1] = unit(1.0);
    let [lc, dc, ddc] = unit(c0);
    let (s, m) = (sigma, m_param);
    let b_minus = d1 - dd1 / (s + m);
    let c_minus = dd1;
    let a_minus = l1 - b_minus * 2.0 / (s + 1.0) - c_minus / ((s + m + 1.0) * (s + m));
    let b_plus = (s + 1.0) * c0 * dc / (2.0 * s);
    let c_plus = c0 * c0 * ddc / (2.0 * s);
    let a_plus = lc - b_plus * 2.0 / (s * (s + 1.0)) - c_plus * 2.0 / s;
    let k = ExtensionCoefficients { a_minus, b_minus, c_minus, a_plus, b_plus, c_plus, m_param, sign, r, c0 };
    let pieces = UnitPieces { k, sigma };
    let local = m_l.clone();
    let eval = Arc::new(move |x: f64| -> [f64; 3] {
        if x >= r && x < c0 * r {
            return [(local.f0)(x), (local.f1)(x), (local.f2)(x)];
        }
        let y = x / r;
        let u = if y < 0.0 {
            pieces.negative(y)
        } else if y < 1.0 {
            pieces.left(y)
        } else {
            pieces.right(y)
        };
        [sign * r.powf(sigma) * u[0], sign * r.powf(sigma - 1.0) * u[1], sign * r.powf(sigma - 2.0) * u[2]]
    });
    let (p0, p1, p2) = (eval.clone(), eval.clone(), eval);
    let symbol = DispersionSymbol::custom(
        "custom-1d-extended",
        1,
        sigma,
        c_l,
        1.0,
        Arc::new(move |xi: &[f64]| p0(xi[0])[0]),
        Arc::new(move |xi: &[f64]| vec![p1(xi[0])[1]]),
        Arc::new(move |xi: &[f64]| DMatrix::from_element(1, 1, p2(xi[0])[2])),
    )?;
    Ok(Extension { symbol, coefficients: k })
}

impl Extension {
    /// Jumps of `(m, m', m'')` at the junctions `R` and `C₀R`, estimated by
    /// linear extrapolation of one-sided samples.
    pub fn junction_jumps(&self) -> [[f64; 3]; 2] {
        let k = &self.coefficients;
        let eval = |x: f64| -> [f64; 3] {
            let xi = [x];
            [self.symbol.value(&xi), self.symbol.gradient(&xi)[0], self.symbol.hessian(&xi)[(0, 0)]]
        };
        let jump = |j: f64| -> [f64; 3] {
            let d = 1e-6 * j;
            let (l1, l2, r1, r2) = (eval(j - d), eval(j - 2.0 * d), eval(j + d), eval(j + 2.0 * d));
            std::array::from_fn(|i| ((2.0 * l1[i] - l2[i]) - (2.0 * r1[i] - r2[i])).abs())
        };
        [jump(k.r), jump(k.c0 * k.r)]
    }

    /// Largest of the four two-sided ratios comparing `|m'|` with
    /// `|ξ|^{σ-1}` and `|m''|` with `|ξ|^{σ-2}` on `samples` points of
    /// `[-10, 10] \ {0}`.
    pub fn growth_constant(&self, samples: usize) -> f64 {
        let s = self.symbol.sigma;
        let mut worst = 0.0f64;
        for i in 0..samples {
            let x = -10.0 + 20.0 * (i as f64 + 0.5) / samples as f64;
            if x == 0.0 {
                continue;
            }
            let a = x.abs();
            let d1 = self.symbol.gradient(&[x])[0].abs();
            let d2 = self.symbol.hessian(&[x])[(0, 0)].abs();
            let (p1, p2) = (a.powf(s - 1.0), a.powf(s - 2.0));
            for q in [d1 / p1, p1 / d1, d2 / p2, p2 / d2] {
                worst = worst.max(q);
            }
        }
        worst
    }
}
