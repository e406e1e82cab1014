//! Directional mixed norms `L^{(a,b,c)}_{O,j}`, the sector norms `X_θ` and
//! `Y_θ`, their square-summed aggregates and a lower-bound estimator for the
//! dual norm `X_θ*`.
//!
//! Space integrals are grid Riemann sums, time integrals use trapezoid
//! weights and suprema are maxima over samples.

use nalgebra::DMatrix;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basis::{orthogonality_error, permutation_s, BasisChoice};
use crate::error::{param, usage, Result};
use crate::field::{rng_from_seed, sub_seed, trapezoid_weights, weighted_lp, LatticeField, Register, SpaceTimeField, TorusGrid, C64};
use crate::geometry::{SectorAtlas, WeightTable};
use crate::symbol::DispersionSymbol;

mod inf_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid exponent {t}"))),
        }
    }
}

/// Exponents `(a, b, c)`: outer `L^a` over `x₁`, middle `L^b` over time,
/// inner `L^c` over `x′`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTriple {
    #[serde(with = "inf_f64")]
    pub a: f64,
    #[serde(with = "inf_f64")]
    pub b: f64,
    #[serde(with = "inf_f64")]
    pub c: f64,
}

impl ExponentTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if [a, b, c].iter().any(|p| !(*p >= 1.0)) {
            return param(format!("exponents ({a}, {b}, {c}) must be at least 1"));
        }
        Ok(Self { a, b, c })
    }
}

/// Frame `(O, j)`; the norm is evaluated on `h ∘ (Id ⊗ O S_j)`.
#[derive(Clone, Debug)]
pub struct DirectionalFrame {
    pub o: DMatrix<f64>,
    pub j: usize,
}

impl DirectionalFrame {
    pub fn new(o: DMatrix<f64>, j: usize) -> Result<Self> {
        if o.nrows() != o.ncols() || j >= o.nrows() {
            return usage("frame index out of range or matrix not square");
        }
        if orthogonality_error(&o) > 1e-12 {
            return usage("frame matrix is not orthogonal");
        }
        Ok(Self { o, j })
    }

    pub fn identity(d: usize, j: usize) -> Result<Self> {
        Self::new(DMatrix::identity(d, d), j)
    }

    /// `O S_j`.
    pub fn composed(&self) -> DMatrix<f64> {
        &self.o * permutation_s(self.o.nrows(), self.j)
    }
}

/// Column targets `(axis, sign)` when `q` is a signed permutation.
fn signed_permutation(q: &DMatrix<f64>) -> Option<Vec<(usize, bool)>> {
    let d = q.nrows();
    let mut map = Vec::with_capacity(d);
    for i in 0..d {
        let nz: Vec<usize> = (0..d).filter(|&k| q[(i, k)].abs() > 1e-12).collect();
        if nz.len() != 1 || (q[(i, nz[0])].abs() - 1.0).abs() > 1e-12 {
            return None;
        }
        map.push((nz[0], q[(i, nz[0])] < 0.0));
    }
    Some(map)
}

/// Flat source index of every rotated sample point when the frame maps
/// grid points onto grid points.
fn permutation_sources(grid: &TorusGrid, frame: &DirectionalFrame) -> Option<Vec<usize>> {
    let map = signed_permutation(&frame.composed())?;
    let (d, m) = (grid.dim, grid.points);
    let mut src = vec![0usize; grid.len()];
    let mut y = vec![0usize; d];
    let mut x = vec![0usize; d];
    for (p, s) in src.iter_mut().enumerate() {
        grid.multi_index(p, &mut y);
        for i in 0..d {
            let (k, neg) = map[i];
            x[i] = if neg { (m - y[k]) % m } else { y[k] };
        }
        *s = grid.flat_index(&x);
    }
    Some(src)
}

/// Samples `h(t, O S_j y)` over the grid points `y` (axis 0 slowest), one
/// row per time sample.
pub fn rotated_samples(u: &SpaceTimeField, frame: &DirectionalFrame) -> Result<Vec<Vec<C64>>> {
    let grid = u.grid;
    let d = grid.dim;
    if frame.o.nrows() != d {
        return usage("frame and field dimensions differ");
    }
    let q = frame.composed();
    let len = grid.len();
    if let Some(src) = permutation_sources(&grid, frame) {
        return Ok(u
            .slices
            .iter()
            .map(|sl| {
                let sp = sl.to_space();
                src.iter().map(|&i| sp.data[i]).collect()
            })
            .collect());
    }
    let spectra: Vec<LatticeField> = u.slices.iter().map(|s| s.to_frequency()).collect();
    let freqs = grid.frequencies();
    let active: Vec<usize> = (0..len).filter(|&k| spectra.iter().any(|s| s.data[k] != C64::new(0.0, 0.0))).collect();
    let pos = grid.positions();
    let vol = grid.period.powi(-(d as i32));
    let phases: Vec<Vec<C64>> = active
        .par_iter()
        .map(|&k| {
            let xi = &freqs[k * d..(k + 1) * d];
            let qxi: Vec<f64> = (0..d).map(|a| (0..d).map(|i| q[(i, a)] * xi[i]).sum()).collect();
            pos.chunks(d).map(|y| C64::from_polar(vol, 2.0 * std::f64::consts::PI * qxi.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())).collect()
        })
        .collect();
    Ok(spectra
        .par_iter()
        .map(|s| {
            let mut out = vec![C64::new(0.0, 0.0); len];
            for (ai, &k) in active.iter().enumerate() {
                let c = s.data[k];
                for (o, ph) in out.iter_mut().zip(&phases[ai]) {
                    *o += c * ph;
                }
            }
            out
        })
        .collect())
}

/// Nested quadrature of rotated samples.
pub fn nested_norm(samples: &[Vec<C64>], times: &[f64], spacing: f64, dim: usize, points: usize, triple: ExponentTriple) -> f64 {
    let inner_len = points.pow(dim as u32 - 1);
    let w_inner = spacing.powi(dim as i32 - 1);
    let wt = trapezoid_weights(times);
    let outer: Vec<f64> = (0..points)
        .map(|x1| {
            let per_t: Vec<f64> = samples
                .iter()
                .map(|row| {
                    let block = &row[x1 * inner_len..(x1 + 1) * inner_len];
                    weighted_lp(block.iter().map(|v| (w_inner, v.norm())), triple.c)
                })
                .collect();
            weighted_lp(wt.iter().copied().zip(per_t), triple.b)
        })
        .collect();
    weighted_lp(outer.into_iter().map(|v| (spacing, v)), triple.a)
}

pub fn directional_norm(u: &SpaceTimeField, frame: &DirectionalFrame, triple: ExponentTriple) -> Result<f64> {
    let s = rotated_samples(u, frame)?;
    Ok(nested_norm(&s, &u.times, u.grid.spacing(), u.grid.dim, u.grid.points, triple))
}

/// Directional norm accumulated one time slice at a time, so the full
/// space-time field never has to be held in memory.
pub struct StreamingNorm {
    frame: DirectionalFrame,
    triple: ExponentTriple,
    grid: TorusGrid,
    weights: Vec<f64>,
    next: usize,
    sources: Option<Vec<usize>>,
    /// Per outer coordinate: running maximum and rescaled weighted sum.
    acc: Vec<(f64, f64)>,
}

impl StreamingNorm {
    pub fn new(grid: TorusGrid, times: &[f64], frame: DirectionalFrame, triple: ExponentTriple) -> Result<Self> {
        if frame.o.nrows() != grid.dim {
            return usage("frame and grid dimensions differ");
        }
        let sources = permutation_sources(&grid, &frame);
        Ok(Self { frame, triple, grid, weights: trapezoid_weights(times), next: 0, sources, acc: vec![(0.0, 0.0); grid.points] })
    }

    /// Adds the slice at the next time sample.
    pub fn push(&mut self, slice: &LatticeField) -> Result<()> {
        match &self.sources {
            Some(_) if slice.register == Register::Space => self.push_space(&slice.data),
            Some(_) => self.push_space(&slice.to_space().data),
            None => {
                let single = SpaceTimeField { grid: self.grid, times: vec![0.0], slices: vec![slice.clone()] };
                let row = rotated_samples(&single, &self.frame)?.remove(0);
                self.accumulate(&row)
            }
        }
    }

    /// Adds space samples in grid order; only valid for frames that permute
    /// grid points.
    pub fn push_space(&mut self, data: &[C64]) -> Result<()> {
        let Some(src) = &self.sources else {
            return usage("frame does not permute grid points");
        };
        if src.iter().enumerate().all(|(i, &j)| i == j) {
            return self.accumulate(data);
        }
        let row: Vec<C64> = src.iter().map(|&i| data[i]).collect();
        self.accumulate(&row)
    }

    fn accumulate(&mut self, row: &[C64]) -> Result<()> {
        let Some(&w) = self.weights.get(self.next) else {
            return usage("more slices than time samples");
        };
        self.next += 1;
        let inner_len = self.grid.points.pow(self.grid.dim as u32 - 1);
        let w_inner = self.grid.spacing().powi(self.grid.dim as i32 - 1);
        let b = self.triple.b;
        let pow = |x: f64| if b == 2.0 { x * x } else { x.powf(b) };
        for (x1, acc) in self.acc.iter_mut().enumerate() {
            let block = &row[x1 * inner_len..(x1 + 1) * inner_len];
            let v = weighted_lp(block.iter().map(|z| (w_inner, z.norm())), self.triple.c);
            if b.is_infinite() {
                acc.0 = acc.0.max(v);
            } else if v > acc.0 {
                acc.1 = if acc.0 > 0.0 { acc.1 * pow(acc.0 / v) } else { 0.0 } + w;
                acc.0 = v;
            } else if v > 0.0 {
                acc.1 += w * pow(v / acc.0);
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<f64> {
        if self.next != self.weights.len() {
            return usage("fewer slices than time samples");
        }
        let b = self.triple.b;
        let outer = self.acc.iter().map(|&(m, s)| if b.is_infinite() || m == 0.0 { m } else { m * s.powf(1.0 / b) });
        Ok(weighted_lp(outer.map(|v| (self.grid.spacing(), v)), self.triple.a))
    }
}

/// `‖u‖_{L^b_t L^c_x}`.
pub fn time_space_norm(u: &SpaceTimeField, b: f64, c: f64) -> f64 {
    let wt = trapezoid_weights(&u.times);
    let per_t: Vec<f64> = u.slices.iter().map(|s| s.lp_norm(c)).collect();
    weighted_lp(wt.into_iter().zip(per_t), b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    X,
    Y,
    XDualLower,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NormConfig {
    pub eps0: f64,
    pub s: f64,
    pub kind: NormKind,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self { eps0: 1.0 / 64.0, s: 0.0, kind: NormKind::X }
    }
}

impl NormConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 <= 1.0 / 64.0) {
            return param(format!("eps0 = {} outside (0, 1/64]", self.eps0));
        }
        Ok(())
    }

    /// `(2/ε₀, 2/(1−ε₀))`.
    pub fn exponents(&self) -> (f64, f64) {
        (2.0 / self.eps0, 2.0 / (1.0 - self.eps0))
    }

    /// Space exponent `2d/(d−2) · 1/(1−ε₀)`, infinite for `d ≤ 2`.
    pub fn strichartz_space(&self, d: usize) -> f64 {
        if d <= 2 {
            f64::INFINITY
        } else {
            2.0 * d as f64 / (d as f64 - 2.0) / (1.0 - self.eps0)
        }
    }
}

/// `𝒥_θ(O) = {j : |⟨∇m(c_θ), Oê_j⟩| ≥ d^{−1/2}|∇m(c_θ)|}`.
pub fn dominant_directions(symbol: &DispersionSymbol, atlas: &SectorAtlas, theta: usize, o: &DMatrix<f64>) -> Vec<usize> {
    let d = atlas.dim();
    let g = symbol.gradient(&atlas.center(theta));
    let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    (0..d)
        .filter(|&j| {
            let p = o.column(j).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>().abs();
            p >= gn / (d as f64).sqrt() - 1e-12 * gn.max(1.0)
        })
        .collect()
}

/// Everything a sector norm needs besides the field.
pub struct NormContext<'a> {
    pub atlas: &'a SectorAtlas,
    pub table: &'a WeightTable,
    pub basis: &'a BasisChoice,
    pub symbol: &'a DispersionSymbol,
    pub config: NormConfig,
}

/// One row of a norm export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormRow {
    pub field_id: String,
    pub theta: usize,
    pub kind: NormKind,
    pub value: f64,
}

impl<'a> NormContext<'a> {
    pub fn new(atlas: &'a SectorAtlas, table: &'a WeightTable, basis: &'a BasisChoice, symbol: &'a DispersionSymbol, config: NormConfig) -> Result<Self> {
        config.validate()?;
        if basis.assignment.len() != atlas.len() {
            return usage("basis choice does not cover the atlas");
        }
        if table.grid.dim != atlas.dim() || symbol.dim != atlas.dim() {
            return usage("norm context dimensions differ");
        }
        Ok(Self { atlas, table, basis, symbol, config })
    }

    /// `X_θ` or `Y_θ` of `u`, taken as given (no projection applied).
    pub fn sector_norm(&self, u: &SpaceTimeField, theta: usize, kind: NormKind) -> Result<f64> {
        if theta >= self.basis.assignment.len() {
            return usage(format!("basis lacks sector {theta}"));
        }
        let kind = if kind == NormKind::XDualLower { NormKind::X } else { kind };
        let d = self.atlas.dim();
        let n = self.atlas.sector(theta).n_theta;
        let sig = self.symbol.sigma;
        let (big, small) = self.config.exponents();
        let df = d as f64;
        let mut total = time_space_norm(u, big, small) + time_space_norm(u, small, self.config.strichartz_space(d));
        let (w_max1, w_max2) = match kind {
            NormKind::Y => (n.powf(-sig / 4.0), n.powf(-sig / 4.0)),
            _ => (n.powf(-sig / 4.0), n.powf(-(df - 1.0) / 2.0)),
        };
        let (w_sm1, w_sm2) = match kind {
            NormKind::Y => (n.powf((sig - 1.0) / 2.0), n.powf((sig - 1.0) / 2.0)),
            _ => (n.powf((sig - 1.0) / 2.0), n.powf(-(df - sig) / 2.0)),
        };
        let o_theta = self.basis.matrix(theta);
        for j in 0..d {
            let s = rotated_samples(u, &DirectionalFrame::new(o_theta.clone(), j)?)?;
            total += w_max1 * nested_norm(&s, &u.times, u.grid.spacing(), d, u.grid.points, ExponentTriple { a: small, b: big, c: small });
            total += w_max2 * nested_norm(&s, &u.times, u.grid.spacing(), d, u.grid.points, ExponentTriple { a: small, b: big, c: big });
        }
        for entry in &self.basis.range {
            for j in dominant_directions(self.symbol, self.atlas, theta, &entry.matrix) {
                let s = rotated_samples(u, &DirectionalFrame::new(entry.matrix.clone(), j)?)?;
                total += w_sm1 * nested_norm(&s, &u.times, u.grid.spacing(), d, u.grid.points, ExponentTriple { a: big, b: small, c: small });
                total += w_sm2 * nested_norm(&s, &u.times, u.grid.spacing(), d, u.grid.points, ExponentTriple { a: big, b: small, c: big });
            }
        }
        Ok(total)
    }

    pub fn project(&self, u: &SpaceTimeField, theta: usize) -> SpaceTimeField {
        let table = self.table.multiplier_table(theta);
        u.map_slices(|s| s.apply_table(&table).into_register(Register::Space))
    }

    /// Per-sector values `(θ, ‖P_θ u‖)` over the sectors active on the grid.
    pub fn sector_values(&self, u: &SpaceTimeField, kind: NormKind) -> Result<Vec<(usize, f64)>> {
        self.table
            .active
            .iter()
            .map(|&t| {
                let p = self.project(u, t);
                if p.max_abs() == 0.0 {
                    return Ok((t, 0.0));
                }
                Ok((t, self.sector_norm(&p, t, kind)?))
            })
            .collect()
    }

    /// `(Σ_θ N_θ^{2s} ‖P_θ u‖²)^{1/2}`.
    pub fn aggregate_norm(&self, u: &SpaceTimeField, s: f64, kind: NormKind) -> Result<f64> {
        let vals = self.sector_values(u, kind)?;
        Ok(vals.iter().map(|&(t, v)| self.atlas.sector(t).n_theta.powf(2.0 * s) * v * v).sum::<f64>().sqrt())
    }

    /// `max_k |∫∫ conj(h_k) h| / ‖h_k‖_{X_θ}` over a dictionary of `k`
    /// elements: `h` itself followed by sector-projected Gaussian fields
    /// drawn from `sub_seed(seed, i)`. Nested in `k` by construction.
    pub fn dual_lower_bound(&self, h: &SpaceTimeField, theta: usize, k: usize, seed: u64) -> Result<f64> {
        if k == 0 {
            return param("dictionary size must be at least 1");
        }
        let mut best = 0.0f64;
        for i in 0..k {
            let cand = if i == 0 { h.clone() } else { self.random_test_field(h, theta, sub_seed(seed, i as u64)) };
            let nx = self.sector_norm(&cand, theta, NormKind::X)?;
            if nx == 0.0 {
                continue;
            }
            best = best.max(pairing(&cand, h).norm() / nx);
        }
        Ok(best)
    }

    fn random_test_field(&self, like: &SpaceTimeField, theta: usize, seed: u64) -> SpaceTimeField {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let slices = like
            .slices
            .iter()
            .map(|s| {
                let data = (0..s.grid.len()).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
                LatticeField { grid: s.grid, register: Register::Space, data }
            })
            .collect();
        let raw = SpaceTimeField { grid: like.grid, times: like.times.clone(), slices };
        self.project(&raw, theta)
    }

    pub fn rows(&self, u: &SpaceTimeField, field_id: &str, kind: NormKind) -> Result<Vec<NormRow>> {
        Ok(self.sector_values(u, kind)?.into_iter().map(|(theta, value)| NormRow { field_id: field_id.to_string(), theta, kind, value }).collect())
    }
}

/// `∫∫ conj(a) b dt dx` with trapezoid weights in time.
pub fn pairing(a: &SpaceTimeField, b: &SpaceTimeField) -> C64 {
    let w = trapezoid_weights(&a.times);
    a.slices.iter().zip(&b.slices).zip(&w).map(|((x, y), w)| x.to_space().inner(&y.to_space()) * w).sum()
}

/// CSV rows `field_id,theta,kind,value`.
pub fn norm_rows_csv(rows: &[NormRow]) -> String {
    let mut out = String::from("field_id,theta,kind,value\n");
    for r in rows {
        let kind = match r.kind {
            NormKind::X => "x",
            NormKind::Y => "y",
            NormKind::XDualLower => "x-dual-lower",
        };
        out.push_str(&format!("{},{},{},{:.17e}\n", r.field_id, r.theta, kind, r.value));
    }
    out
}
