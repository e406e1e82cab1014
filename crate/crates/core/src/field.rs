//! Periodic lattice fields: spectral transforms, unit-scale projections,
//! Wiener randomization, Bernstein ratios and the binary field format.
//!
//! Conventions. A grid of `points` samples per axis on a torus of side
//! `period` carries samples at `x = i * period / points`. The forward
//! transform approximates the continuous Fourier transform,
//! `f̂(ξ) = h^d Σ_x f(x) e^{-2πi x·ξ}` with `h = period / points`, at the
//! lattice frequencies `ξ ∈ period⁻¹ ℤ^d`. The inverse divides by `period^d`.
//! With these weights `‖f‖₂` is the same in both registers.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{param, usage, Error, Result};
use crate::geometry::SectorAtlas;

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub dim: usize,
    pub period: f64,
    pub points: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, period: f64, points: usize) -> Result<Self> {
        if dim == 0 {
            return param("grid dimension must be positive");
        }
        if !(period.is_finite() && period > 0.0) {
            return param("grid period must be positive");
        }
        if points < 2 || !points.is_power_of_two() {
            return param(format!("points per axis must be a power of two >= 2, got {points}"));
        }
        Ok(Self { dim, period, points })
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Largest frequency magnitude along one axis, `points / (2 period)`.
    pub fn nyquist(&self) -> f64 {
        self.points as f64 / (2.0 * self.period)
    }

    /// Frequency of index `i` along one axis.
    pub fn freq_1d(&self, i: usize) -> f64 {
        let m = self.points as i64;
        let i = i as i64;
        let k = if i < m / 2 { i } else { i - m };
        k as f64 / self.period
    }

    /// Position of index `i` along one axis.
    pub fn pos_1d(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.points;
            flat /= self.points;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Frequency vectors of all lattice points, flattened row-major.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() * self.dim];
        let mut idx = vec![0usize; self.dim];
        for n in 0..self.len() {
            self.multi_index(n, &mut idx);
            for a in 0..self.dim {
                out[n * self.dim + a] = self.freq_1d(idx[a]);
            }
        }
        out
    }

    pub fn positions(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() * self.dim];
        let mut idx = vec![0usize; self.dim];
        for n in 0..self.len() {
            self.multi_index(n, &mut idx);
            for a in 0..self.dim {
                out[n * self.dim + a] = self.pos_1d(idx[a]);
            }
        }
        out
    }

    /// Largest integer radius `K` such that every unit cell `k` with
    /// `|k_i| <= K` can touch the grid spectrum.
    pub fn unit_cell_radius(&self) -> i64 {
        self.nyquist().ceil() as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Register {
    Space,
    Frequency,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
    static SCRATCH: RefCell<Vec<C64>> = const { RefCell::new(Vec::new()) };
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry((len, inverse))
            .or_insert_with(|| {
                PLANNER.with(|p| {
                    let mut p = p.borrow_mut();
                    if inverse {
                        p.plan_fft_inverse(len)
                    } else {
                        p.plan_fft_forward(len)
                    }
                })
            })
            .clone()
    })
}

/// Unnormalized n-dimensional DFT in place.
fn fft_nd(data: &mut [C64], dim: usize, m: usize, inverse: bool) {
    let fft = plan(m, inverse);
    let n = data.len();
    let need = fft.get_inplace_scratch_len();
    let mut buffer = SCRATCH.with(|s| s.take());
    if buffer.len() < need {
        buffer.resize(need, C64::new(0.0, 0.0));
    }
    let scratch = &mut buffer[..need];
    let mut line = if dim > 1 { vec![C64::new(0.0, 0.0); m] } else { Vec::new() };
    for axis in 0..dim {
        let stride = m.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            fft.process_with_scratch(data, scratch);
            continue;
        }
        let block = m * stride;
        for outer in 0..n / block {
            for inner in 0..stride {
                let base = outer * block + inner;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                fft.process_with_scratch(&mut line, scratch);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
    SCRATCH.with(|s| s.replace(buffer));
}

/// `(Σ w |v|^p)^{1/p}` evaluated with a max-rescaling so large exponents do
/// not overflow; `p = ∞` gives the maximum.
pub fn weighted_lp(values: impl Iterator<Item = (f64, f64)> + Clone, p: f64) -> f64 {
    let max = values.clone().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    if p == 2.0 {
        let s: f64 = values.map(|(w, v)| w * (v / max) * (v / max)).sum();
        return max * s.sqrt();
    }
    let s: f64 = values.map(|(w, v)| w * (v.abs() / max).powf(p)).sum();
    max * s.powf(1.0 / p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    pub grid: TorusGrid,
    pub register: Register,
    pub data: Vec<C64>,
}

impl LatticeField {
    pub fn zeros(grid: TorusGrid, register: Register) -> Self {
        Self { grid, register, data: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_data(grid: TorusGrid, register: Register, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.len() {
            return usage(format!("expected {} samples, got {}", grid.len(), data.len()));
        }
        Ok(Self { grid, register, data })
    }

    /// Samples `f(x)` at the grid positions.
    pub fn from_space_fn(grid: TorusGrid, mut f: impl FnMut(&[f64]) -> C64) -> Self {
        let pos = grid.positions();
        let data = pos.chunks(grid.dim).map(&mut f).collect();
        Self { grid, register: Register::Space, data }
    }

    /// Sets `f̂(ξ)` at the lattice frequencies.
    pub fn from_frequency_fn(grid: TorusGrid, mut f: impl FnMut(&[f64]) -> C64) -> Self {
        let freq = grid.frequencies();
        let data = freq.chunks(grid.dim).map(&mut f).collect();
        Self { grid, register: Register::Frequency, data }
    }

    pub fn transform(&self, direction: Direction) -> Self {
        let mut out = self.clone();
        out.transform_in_place(direction);
        out
    }

    /// Converts to the space register without reallocating.
    pub fn make_space(&mut self) {
        if self.register == Register::Frequency {
            self.transform_in_place(Direction::Backward);
        }
    }

    fn transform_in_place(&mut self, direction: Direction) {
        let (dim, m) = (self.grid.dim, self.grid.points);
        match direction {
            Direction::Forward => {
                fft_nd(&mut self.data, dim, m, false);
                let s = self.grid.cell_volume();
                self.data.iter_mut().for_each(|v| *v *= s);
                self.register = Register::Frequency;
            }
            Direction::Backward => {
                fft_nd(&mut self.data, dim, m, true);
                let s = self.grid.period.powi(-(dim as i32));
                self.data.iter_mut().for_each(|v| *v *= s);
                self.register = Register::Space;
            }
        }
    }

    pub fn to_frequency(&self) -> Self {
        match self.register {
            Register::Frequency => self.clone(),
            Register::Space => self.transform(Direction::Forward),
        }
    }

    pub fn to_space(&self) -> Self {
        match self.register {
            Register::Space => self.clone(),
            Register::Frequency => self.transform(Direction::Backward),
        }
    }

    pub fn into_register(mut self, register: Register) -> Self {
        if self.register != register {
            let dir = match register {
                Register::Frequency => Direction::Forward,
                Register::Space => Direction::Backward,
            };
            self.transform_in_place(dir);
        }
        self
    }

    /// Multiplies the spectrum by `mult(ξ)`; the result keeps the input register.
    pub fn apply_multiplier(&self, mult: impl Fn(&[f64]) -> C64) -> Self {
        let reg = self.register;
        let mut f = self.to_frequency();
        let freq = f.grid.frequencies();
        for (v, xi) in f.data.iter_mut().zip(freq.chunks(f.grid.dim)) {
            *v *= mult(xi);
        }
        f.into_register(reg)
    }

    /// Multiplies the spectrum by a precomputed table over the lattice.
    pub fn apply_table(&self, table: &[C64]) -> Self {
        let reg = self.register;
        let mut f = self.to_frequency();
        for (v, m) in f.data.iter_mut().zip(table) {
            *v *= m;
        }
        f.into_register(reg)
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
    }

    /// `a * self + other`, computed in the register of `self`.
    pub fn axpy(&self, a: C64, other: &Self) -> Self {
        self.check_compatible(other);
        let other = other.clone().into_register(self.register);
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + y).collect();
        Self { grid: self.grid, register: self.register, data }
    }

    pub fn add(&self, other: &Self) -> Self {
        other.axpy(C64::new(1.0, 0.0), self)
    }

    pub fn sub(&self, other: &Self) -> Self {
        other.axpy(C64::new(-1.0, 0.0), self)
    }

    pub fn scale(&self, a: C64) -> Self {
        Self { grid: self.grid, register: self.register, data: self.data.iter().map(|v| a * v).collect() }
    }

    fn measure(&self) -> f64 {
        match self.register {
            Register::Space => self.grid.cell_volume(),
            Register::Frequency => self.grid.period.powi(-(self.grid.dim as i32)),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.measure() * self.data.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `L^p` norm in space by Riemann sums with cell volume `h^d`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let f = self.to_space();
        let w = f.grid.cell_volume();
        weighted_lp(f.data.iter().map(|v| (w, v.norm())), p)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `∫ conj(self) other` with the register measure.
    pub fn inner(&self, other: &Self) -> C64 {
        self.check_compatible(other);
        let other = other.clone().into_register(self.register);
        let s: C64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        s * self.measure()
    }
}

/// Uniform samples `t0, ..., t1` with `steps` intervals.
pub fn uniform_times(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    let dt = (t1 - t0) / steps as f64;
    (0..=steps).map(|i| if i == steps { t1 } else { t0 + i as f64 * dt }).collect()
}

/// Uniform grid on `[t0, t1]` with at least `per_unit` steps per unit time.
pub fn time_grid(t0: f64, t1: f64, per_unit: usize) -> Vec<f64> {
    let steps = (((t1 - t0).abs() * per_unit as f64).ceil() as usize).max(1);
    uniform_times(t0, t1, steps)
}

/// Trapezoid weights for a strictly increasing sample set.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { times[i] - times[i - 1] } else { 0.0 };
            let right = if i + 1 < n { times[i + 1] - times[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub grid: TorusGrid,
    pub times: Vec<f64>,
    pub slices: Vec<LatticeField>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, slices: Vec<LatticeField>) -> Result<Self> {
        if times.is_empty() || times.len() != slices.len() {
            return usage("time samples and slices must be non-empty and of equal length");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return usage("time samples must be strictly increasing");
        }
        let grid = slices[0].grid;
        if slices.iter().any(|s| s.grid != grid) {
            return usage("all slices must share one grid");
        }
        Ok(Self { grid, times, slices })
    }

    pub fn zeros(grid: TorusGrid, times: Vec<f64>) -> Self {
        let slices = times.iter().map(|_| LatticeField::zeros(grid, Register::Space)).collect();
        Self { grid, times, slices }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn same_times(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.times.len() == other.times.len()
            && self.times.iter().zip(&other.times).all(|(a, b)| a == b)
    }

    pub fn to_space(&self) -> Self {
        Self { grid: self.grid, times: self.times.clone(), slices: self.slices.iter().map(|s| s.to_space()).collect() }
    }

    pub fn map_slices(&self, f: impl Fn(&LatticeField) -> LatticeField) -> Self {
        Self { grid: self.grid, times: self.times.clone(), slices: self.slices.iter().map(f).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&LatticeField, &LatticeField) -> LatticeField) -> Self {
        assert!(self.same_times(other), "space-time fields on different grids");
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| f(a, b)).collect();
        Self { grid: self.grid, times: self.times.clone(), slices }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map_slices(|s| s.scale(a))
    }

    /// Discrete `L²_t L²_x` norm with trapezoid weights in time.
    pub fn l2_norm(&self) -> f64 {
        let w = trapezoid_weights(&self.times);
        w.iter().zip(&self.slices).map(|(w, s)| w * s.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.slices.iter().fold(0.0, |m, s| m.max(s.to_space().max_abs()))
    }
}

/// Pointwise `a · conj(b) · c` on space-time fields.
pub fn trilinear(a: &SpaceTimeField, b: &SpaceTimeField, c: &SpaceTimeField) -> SpaceTimeField {
    assert!(a.same_times(b) && a.same_times(c), "space-time fields on different grids");
    let slices = (0..a.times.len())
        .map(|i| {
            let (x, y, z) = (a.slices[i].to_space(), b.slices[i].to_space(), c.slices[i].to_space());
            let data = x.data.iter().zip(&y.data).zip(&z.data).map(|((p, q), r)| p * q.conj() * r).collect();
            LatticeField { grid: a.grid, register: Register::Space, data }
        })
        .collect();
    SpaceTimeField { grid: a.grid, times: a.times.clone(), slices }
}

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// One-dimensional unit bump with support in `[-1, 1]` whose integer
/// translates sum to one.
pub fn psi_1d(x: f64) -> f64 {
    let b = bump(x);
    if b == 0.0 {
        return 0.0;
    }
    let base = x.floor() as i64;
    let denom: f64 = (base - 1..=base + 2).map(|j| bump(x - j as f64)).sum();
    b / denom
}

/// Tensor-product unit-scale cutoff `ψ(ξ) = Π_i ψ₁(ξ_i)`.
pub fn psi(xi: &[f64]) -> f64 {
    xi.iter().map(|&x| psi_1d(x)).product()
}

fn check_cell(grid: &TorusGrid, k: &[i64]) -> Result<()> {
    if k.len() != grid.dim {
        return usage("lattice point has the wrong dimension");
    }
    let r = grid.unit_cell_radius();
    if k.iter().any(|&ki| ki.abs() > r) {
        return Err(Error::Range(format!("lattice point {k:?} beyond the grid spectrum (radius {r})")));
    }
    Ok(())
}

/// `Q_k f`: spectrum multiplied by `ψ(ξ - k)`.
pub fn unit_projection(field: &LatticeField, k: &[i64]) -> Result<LatticeField> {
    check_cell(&field.grid, k)?;
    Ok(field.apply_multiplier(|xi| {
        let v: f64 = xi.iter().zip(k).map(|(&x, &ki)| psi_1d(x - ki as f64)).product();
        C64::new(v, 0.0)
    }))
}

/// All unit cells `k` with `|k_i| <= K` for the grid's cell radius `K`.
pub fn resolvable_cells(grid: &TorusGrid) -> Vec<Vec<i64>> {
    let r = grid.unit_cell_radius();
    let side = (2 * r + 1) as usize;
    (0..side.pow(grid.dim as u32))
        .map(|mut n| {
            let mut k = vec![0i64; grid.dim];
            for a in (0..grid.dim).rev() {
                k[a] = (n % side) as i64 - r;
                n /= side;
            }
            k
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    /// Standard complex Gaussian: real and imaginary parts `N(0, 1/2)`.
    ComplexGaussian,
    /// `(ε₁ + iε₂)/√2` with independent signs.
    RademacherPair,
    /// Degenerate law `g ≡ 1`.
    Unit,
}

/// Splits a root seed into independent stream seeds (SplitMix64 finalizer
/// applied to `root + (stream + 1) * golden`).
pub fn sub_seed(root: u64, stream: u64) -> u64 {
    let mut z = root.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw a sample from a law.
pub fn sample_law(law: Law, rng: &mut impl Rng) -> C64 {
    match law {
        Law::ComplexGaussian => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(s * re, s * im)
        }
        Law::RademacherPair => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let a = if rng.random::<bool>() { s } else { -s };
            let b = if rng.random::<bool>() { s } else { -s };
            C64::new(a, b)
        }
        Law::Unit => C64::new(1.0, 0.0),
    }
}

/// Coefficients `g_k` for every unit cell of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomDraw {
    pub seed: u64,
    pub law: Law,
    pub dim: usize,
    pub radius: i64,
    pub coefficients: Vec<C64>,
}

impl RandomDraw {
    pub fn sample(grid: &TorusGrid, law: Law, seed: u64) -> Self {
        let radius = grid.unit_cell_radius();
        let side = (2 * radius + 1) as usize;
        let mut rng = rng_from_seed(seed);
        let coefficients = (0..side.pow(grid.dim as u32)).map(|_| sample_law(law, &mut rng)).collect();
        Self { seed, law, dim: grid.dim, radius, coefficients }
    }

    pub fn coefficient(&self, k: &[i64]) -> C64 {
        let side = 2 * self.radius + 1;
        if k.iter().any(|&ki| ki.abs() > self.radius) {
            return C64::new(0.0, 0.0);
        }
        let idx = k.iter().fold(0i64, |acc, &ki| acc * side + ki + self.radius);
        self.coefficients[idx as usize]
    }

    /// `Σ_k g_k ψ(ξ - k)`, summing only the cells whose support contains `ξ`.
    pub fn weight(&self, xi: &[f64]) -> C64 {
        let d = xi.len();
        let cands: Vec<[(i64, f64); 2]> = xi
            .iter()
            .map(|&x| {
                let lo = x.floor();
                [(lo as i64, psi_1d(x - lo)), (lo as i64 + 1, psi_1d(x - lo - 1.0))]
            })
            .collect();
        let mut total = C64::new(0.0, 0.0);
        let mut k = vec![0i64; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let (ka, wa) = cands[a][(mask >> a) & 1];
                k[a] = ka;
                w *= wa;
            }
            if w != 0.0 {
                total += self.coefficient(&k) * w;
            }
        }
        total
    }
}

/// Wiener randomization `f^ω = Σ_k g_k Q_k f`.
pub fn randomize(f: &LatticeField, draw: &RandomDraw) -> Result<LatticeField> {
    if draw.dim != f.grid.dim || draw.radius < f.grid.unit_cell_radius() {
        return usage("random draw does not cover the grid spectrum");
    }
    Ok(f.apply_multiplier(|xi| draw.weight(xi)))
}

/// `‖P_θ f‖_{r₂} / (N_θ^{d(1/r₁ - 1/r₂)} ‖P_θ f‖_{r₁})`; `None` when the
/// projection vanishes.
pub fn bernstein_ratio(field: &LatticeField, atlas: &SectorAtlas, theta: usize, r1: f64, r2: f64) -> Result<Option<f64>> {
    if !(r1 >= 1.0 && r2 >= r1) {
        return param("Bernstein ratio needs r2 >= r1 >= 1");
    }
    let p = atlas.project(field, theta)?;
    let den = p.lp_norm(r1);
    if den == 0.0 {
        return Ok(None);
    }
    let n = atlas.sector(theta).n_theta;
    let d = field.grid.dim as f64;
    let inv = |r: f64| if r.is_infinite() { 0.0 } else { 1.0 / r };
    let scale = n.powf(d * (inv(r1) - inv(r2)));
    Ok(Some(p.lp_norm(r2) / (scale * den)))
}

const MAGIC: &[u8; 16] = b"SECTORLAB-FIELD\n";
const VERSION: u32 = 1;
const ENDIAN_TAG: &[u8; 4] = b"LE64";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub seed: Option<u64>,
    pub symbol_id: Option<String>,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    endianness: String,
    grid: TorusGrid,
    register: Register,
    #[serde(flatten)]
    meta: FieldMeta,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Serialized payload: header then interleaved little-endian `(re, im)`.
pub fn field_bytes(field: &LatticeField) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 16 * field.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(ENDIAN_TAG);
    for v in &field.data {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// JSON sidecar describing the grid, register and metadata of a payload.
pub fn sidecar_json(field: &LatticeField, meta: &FieldMeta) -> Result<String> {
    let side = Sidecar {
        format: "sectorlab-field".into(),
        version: VERSION,
        endianness: "little".into(),
        grid: field.grid,
        register: field.register,
        meta: meta.clone(),
    };
    Ok(serde_json::to_string_pretty(&side)?)
}

pub fn save_field(path: &Path, field: &LatticeField, meta: &FieldMeta) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&field_bytes(field))?;
    fs::write(sidecar_path(path), sidecar_json(field, meta)?)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<(LatticeField, FieldMeta)> {
    let bytes = fs::read(path)?;
    let side: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if side.endianness != "little" {
        return Err(Error::Format(format!("unsupported endianness declaration {:?}", side.endianness)));
    }
    if bytes.len() < 24 || &bytes[..16] != MAGIC {
        return Err(Error::Format("missing field magic".into()));
    }
    let version = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    if version != VERSION || side.version != VERSION {
        return Err(Error::Format(format!("unsupported field version {version}")));
    }
    if &bytes[20..24] != ENDIAN_TAG {
        return Err(Error::Format("header endianness tag is not little-endian".into()));
    }
    let grid = TorusGrid::new(side.grid.dim, side.grid.period, side.grid.points)
        .map_err(|e| Error::Format(format!("bad grid in sidecar: {e}")))?;
    let payload = &bytes[24..];
    if payload.len() != 16 * grid.len() {
        return Err(Error::Format(format!("payload holds {} bytes, grid needs {}", payload.len(), 16 * grid.len())));
    }
    let data = payload
        .chunks_exact(16)
        .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect();
    Ok((LatticeField { grid, register: side.register, data }, side.meta))
}
