//! Sector cover of frequency space, its smooth partition of unity and the
//! sector projections `P_θ`.
//!
//! Sectors are indexed densely: index 0 is the unit-scale sector and the
//! sector of scale `(1+ε)^k` and direction `i` has index `1 + (k-1)·|𝒮| + i`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, usage, Result};
use crate::field::{rng_from_seed, LatticeField, Register, TorusGrid, C64};
use crate::symbol::{sphere_directions, DispersionSymbol};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// Radial profile: `1` on `[0, 1]`, `0` on `[1+ε, ∞)`, smooth and
/// non-increasing in between.
pub fn chi_profile(t: f64, eps: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 1.0 + eps {
        0.0
    } else {
        1.0 - smooth_step((t - 1.0) / eps)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionSet {
    pub dim: usize,
    pub eps_theta: f64,
    pub directions: Vec<Vec<f64>>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.directions.iter().enumerate() {
            for b in &self.directions[i + 1..] {
                best = best.min(dist(a, b));
            }
        }
        best
    }

    /// Distance from `u` to the nearest member.
    pub fn nearest_distance(&self, u: &[f64]) -> f64 {
        self.directions.iter().map(|e| dist(e, u)).fold(f64::INFINITY, f64::min)
    }

    /// Largest nearest-member distance over the probes.
    pub fn covering_radius(&self, probes: &[Vec<f64>]) -> f64 {
        probes.iter().map(|p| self.nearest_distance(p)).fold(0.0, f64::max)
    }
}

/// Probe set of unit vectors: uniform angles for `d = 2`, seeded random
/// directions otherwise.
pub fn probe_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count).map(|i| {
            let a = 2.0 * PI * (i as f64 + 0.5) / count as f64;
            vec![a.cos(), a.sin()]
        }).collect(),
        _ => sphere_directions(dim, count, seed),
    }
}

fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            vec![r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// `ε`-separated, `ε`-covering set of unit vectors.
pub fn build_direction_set(dim: usize, eps_theta: f64) -> Result<DirectionSet> {
    if dim == 0 {
        return param("dimension must be positive");
    }
    if !(eps_theta > 0.0 && eps_theta <= 1.0) {
        return param(format!("resolution {eps_theta} outside (0, 1]"));
    }
    let directions = match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let k = (PI / (eps_theta / 2.0).asin()).floor() as usize;
            (0..k).map(|i| {
                let a = 2.0 * PI * i as f64 / k as f64;
                vec![a.cos(), a.sin()]
            }).collect()
        }
        _ => {
            let count = ((8.0 / eps_theta).powi(dim as i32 - 1) as usize).clamp(2000, 200_000);
            let candidates = if dim == 3 { fibonacci_sphere(count) } else { sphere_directions(dim, count, 0x5EC7) };
            let mut set: Vec<Vec<f64>> = Vec::new();
            for c in candidates {
                if set.iter().all(|e| dist(e, &c) >= eps_theta) {
                    set.push(c);
                }
            }
            for round in 0..8u64 {
                let mut added = false;
                for p in sphere_directions(dim, 20_000, 0xC0E5 + round) {
                    if set.iter().all(|e| dist(e, &p) > eps_theta) {
                        set.push(p);
                        added = true;
                    }
                }
                if !added {
                    break;
                }
            }
            set
        }
    };
    Ok(DirectionSet { dim, eps_theta, directions })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub index: usize,
    /// Exponent `k` with `N_θ = (1+ε)^k`; zero for the unit-scale sector.
    pub scale: u32,
    pub direction: usize,
    pub n_theta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorAtlas {
    pub directions: DirectionSet,
    pub n_max: f64,
    pub scales: u32,
    pub sectors: Vec<Sector>,
}

pub fn build_atlas(dim: usize, eps_theta: f64, n_max: f64) -> Result<SectorAtlas> {
    if !(n_max >= 1.0) {
        return param(format!("radial cap {n_max} below 1"));
    }
    let directions = build_direction_set(dim, eps_theta)?;
    let base = 1.0 + eps_theta;
    let mut scales = 0u32;
    while base.powi(scales as i32 + 1) <= n_max * (1.0 + 1e-12) {
        scales += 1;
    }
    let mut sectors = vec![Sector { index: 0, scale: 0, direction: 0, n_theta: 1.0 }];
    for k in 1..=scales {
        for i in 0..directions.len() {
            sectors.push(Sector { index: sectors.len(), scale: k, direction: i, n_theta: base.powi(k as i32) });
        }
    }
    Ok(SectorAtlas { directions, n_max, scales, sectors })
}

/// Output of a sector projection together with the truncation flag raised
/// when the sector reaches past the grid Nyquist frequency.
#[derive(Clone, Debug)]
pub struct Projection {
    pub field: LatticeField,
    pub truncated: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorSummary {
    pub index: usize,
    pub n_theta: f64,
    pub e_hat: Vec<f64>,
    pub center: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtlasSummary {
    pub dim: usize,
    pub eps_theta: f64,
    pub n_max: f64,
    pub direction_count: usize,
    pub sector_count: usize,
    /// Direction attached to the unit-scale sector.
    pub unit_sector_direction: Vec<f64>,
    pub sectors: Vec<SectorSummary>,
}

impl SectorAtlas {
    pub fn dim(&self) -> usize {
        self.directions.dim
    }

    pub fn eps(&self) -> f64 {
        self.directions.eps_theta
    }

    pub fn len(&self) -> usize {
        self.sectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }

    pub fn sector(&self, theta: usize) -> &Sector {
        &self.sectors[theta]
    }

    pub fn index_of(&self, scale: u32, direction: usize) -> Option<usize> {
        if scale == 0 {
            return Some(0);
        }
        (scale <= self.scales && direction < self.directions.len()).then(|| 1 + (scale as usize - 1) * self.directions.len() + direction)
    }

    pub fn e_hat(&self, theta: usize) -> &[f64] {
        &self.directions.directions[self.sectors[theta].direction]
    }

    pub fn center(&self, theta: usize) -> Vec<f64> {
        let s = &self.sectors[theta];
        if s.scale == 0 {
            vec![0.0; self.dim()]
        } else {
            self.e_hat(theta).iter().map(|e| e * s.n_theta).collect()
        }
    }

    /// Outer radius of the sector support.
    pub fn outer_radius(&self, theta: usize) -> f64 {
        let b = 1.0 + self.eps();
        b * b * self.sectors[theta].n_theta
    }

    /// Radius up to which the partition of unity is complete.
    pub fn coverage_radius(&self) -> f64 {
        (1.0 + self.eps()).powi(self.scales as i32 + 1)
    }

    pub fn contains(&self, theta: usize, xi: &[f64]) -> bool {
        let s = &self.sectors[theta];
        let eps = self.eps();
        let r = norm(xi);
        if s.scale == 0 {
            return r <= (1.0 + eps) * (1.0 + eps);
        }
        let q = r / s.n_theta;
        if !(1.0 <= q && q <= (1.0 + eps) * (1.0 + eps)) {
            return false;
        }
        let u: Vec<f64> = xi.iter().map(|x| x / r).collect();
        dist(&u, self.e_hat(theta)) <= 2.0 * eps
    }

    fn angular_scale(&self) -> f64 {
        2.0 * self.eps() / (1.0 + self.eps())
    }

    fn angular_weights(&self, xi: &[f64], r: f64) -> Vec<f64> {
        let u: Vec<f64> = xi.iter().map(|x| x / r).collect();
        let s = self.angular_scale();
        let eps = self.eps();
        let raw: Vec<f64> = self.directions.directions.iter().map(|e| chi_profile(dist(&u, e) / s, eps)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|a| a / total).collect()
    }

    fn radial(&self, scale: u32, r: f64) -> f64 {
        let eps = self.eps();
        let b = 1.0 + eps;
        if scale == 0 {
            chi_profile(r / b, eps)
        } else {
            let n = b.powi(scale as i32);
            chi_profile(r / (b * n), eps) - chi_profile(r / n, eps)
        }
    }

    /// Non-zero values `(θ, χ_θ(ξ))` at one frequency.
    pub fn weights(&self, xi: &[f64]) -> Vec<(usize, f64)> {
        let r = norm(xi);
        let mut out = Vec::new();
        let unit = self.radial(0, r);
        if unit > 0.0 {
            out.push((0, unit));
        }
        if r == 0.0 || self.scales == 0 {
            return out;
        }
        let b = 1.0 + self.eps();
        let lr = r.ln() / b.ln();
        let lo = ((lr - 2.0).floor().max(1.0)) as u32;
        let hi = (lr.ceil().max(0.0) as u32).min(self.scales);
        let mut ang: Option<Vec<f64>> = None;
        for k in lo..=hi {
            let rad = self.radial(k, r);
            if rad <= 0.0 {
                continue;
            }
            let a = ang.get_or_insert_with(|| self.angular_weights(xi, r));
            for (i, w) in a.iter().enumerate() {
                if *w > 0.0 {
                    out.push((1 + (k as usize - 1) * self.directions.len() + i, rad * w));
                }
            }
        }
        out
    }

    /// `χ_θ(ξ) ∈ [0, 1]`.
    pub fn multiplier(&self, theta: usize, xi: &[f64]) -> f64 {
        let s = &self.sectors[theta];
        let r = norm(xi);
        if s.scale == 0 {
            return self.radial(0, r);
        }
        let rad = self.radial(s.scale, r);
        if rad <= 0.0 || r == 0.0 {
            return 0.0;
        }
        rad * self.angular_weights(xi, r)[s.direction]
    }

    pub fn partition_sum(&self, xi: &[f64]) -> f64 {
        self.weights(xi).iter().map(|(_, w)| w).sum()
    }

    /// `P_θ f`, returned in the register of the input.
    pub fn project(&self, field: &LatticeField, theta: usize) -> Result<LatticeField> {
        if theta >= self.len() {
            return usage(format!("sector {theta} not in atlas of {} sectors", self.len()));
        }
        if field.grid.dim != self.dim() {
            return usage("field and atlas dimensions differ");
        }
        Ok(field.apply_multiplier(|xi| C64::new(self.multiplier(theta, xi), 0.0)))
    }

    /// All sector multipliers over one grid, stored sparsely.
    pub fn weight_table(&self, grid: &TorusGrid) -> Result<WeightTable> {
        if grid.dim != self.dim() {
            return usage("grid and atlas dimensions differ");
        }
        let freq = grid.frequencies();
        let points: Vec<Vec<(usize, f64)>> = freq.chunks(grid.dim).map(|xi| self.weights(xi)).collect();
        let mut active = vec![false; self.len()];
        for p in &points {
            for (t, _) in p {
                active[*t] = true;
            }
        }
        let active = active.iter().enumerate().filter(|(_, a)| **a).map(|(i, _)| i).collect();
        Ok(WeightTable { grid: *grid, points, active })
    }

    /// Sectors whose support leaves the grid's resolvable box.
    pub fn truncated(&self, theta: usize, grid: &TorusGrid) -> bool {
        self.outer_radius(theta) >= grid.nyquist()
    }

    pub fn summary(&self) -> AtlasSummary {
        AtlasSummary {
            dim: self.dim(),
            eps_theta: self.eps(),
            n_max: self.n_max,
            direction_count: self.directions.len(),
            sector_count: self.len(),
            unit_sector_direction: self.directions.directions[0].clone(),
            sectors: (0..self.len())
                .map(|i| SectorSummary { index: i, n_theta: self.sectors[i].n_theta, e_hat: self.e_hat(i).to_vec(), center: self.center(i) })
                .collect(),
        }
    }

    /// Two-column CSV table of the radial profile on `[0, 1+ε+0.1]`.
    pub fn chi_table_csv(&self, samples: usize) -> String {
        let eps = self.eps();
        let top = 1.0 + eps + 0.1;
        let mut out = String::from("t,chi\n");
        for i in 0..samples {
            let t = top * i as f64 / (samples.max(2) - 1) as f64;
            out.push_str(&format!("{t:.12e},{:.12e}\n", chi_profile(t, eps)));
        }
        out
    }

    /// Random member of the sector.
    pub fn sample_member(&self, theta: usize, rng: &mut impl Rng) -> Vec<f64> {
        let d = self.dim();
        let s = &self.sectors[theta];
        let eps = self.eps();
        let b = 1.0 + eps;
        if s.scale == 0 {
            let b2 = b * b;
            loop {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-b2..=b2)).collect();
                if norm(&v) <= b2 {
                    return v;
                }
            }
        }
        let e = self.e_hat(theta);
        let u = if d == 1 {
            e.to_vec()
        } else {
            loop {
                let g: Vec<f64> = e.iter().map(|x| x + 2.0 * eps * rng.sample::<f64, _>(StandardNormal)).collect();
                let n = norm(&g);
                let u: Vec<f64> = g.iter().map(|x| x / n).collect();
                if dist(&u, e) <= 2.0 * eps {
                    break u;
                }
            }
        };
        let r = s.n_theta * rng.random_range(1.0..=b * b);
        u.iter().map(|x| x * r).collect()
    }

    /// Random point of `conv(θ)`: a convex combination of two members.
    pub fn sample_hull(&self, theta: usize, rng: &mut impl Rng) -> Vec<f64> {
        let a = self.sample_member(theta, rng);
        let b = self.sample_member(theta, rng);
        let l: f64 = rng.random();
        a.iter().zip(&b).map(|(x, y)| l * x + (1.0 - l) * y).collect()
    }

    /// Extreme points used for diameter estimates: the two radii times the
    /// directions at angular distance `2ε` along each transverse axis.
    pub fn corner_points(&self, theta: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let s = &self.sectors[theta];
        let b = 1.0 + self.eps();
        let e = self.e_hat(theta).to_vec();
        if s.scale == 0 {
            let mut pts = Vec::new();
            for i in 0..d {
                for sg in [-1.0, 1.0] {
                    let mut v = vec![0.0; d];
                    v[i] = sg * b * b;
                    pts.push(v);
                }
            }
            return pts;
        }
        let phi = 2.0 * (self.eps()).min(1.0).asin();
        let mut dirs = vec![e.clone()];
        let basis = complete_basis(&e);
        for t in basis.iter().skip(1) {
            for sg in [-1.0, 1.0] {
                dirs.push(e.iter().zip(t).map(|(a, b)| a * phi.cos() + sg * b * phi.sin()).collect());
            }
        }
        let mut pts = Vec::new();
        for r in [s.n_theta, s.n_theta * b * b] {
            for u in &dirs {
                pts.push(u.iter().map(|x| x * r).collect());
            }
        }
        pts
    }

    /// Diameter estimate from corner points and random members.
    pub fn diameter(&self, theta: usize, samples: usize, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let mut pts = self.corner_points(theta);
        for _ in 0..samples {
            pts.push(self.sample_member(theta, &mut rng));
        }
        let mut best = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.max(dist(a, b));
            }
        }
        best
    }
}

/// Orthonormal basis whose first vector is `e`.
pub(crate) fn complete_basis(e: &[f64]) -> Vec<Vec<f64>> {
    let d = e.len();
    let mut out: Vec<Vec<f64>> = vec![e.to_vec()];
    for i in 0..d {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        for b in &out {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            out.push(v.iter().map(|x| x / n).collect());
        }
        if out.len() == d {
            break;
        }
    }
    out
}

/// Sparse table of `χ_θ` over the lattice frequencies of one grid.
#[derive(Clone, Debug)]
pub struct WeightTable {
    pub grid: TorusGrid,
    pub points: Vec<Vec<(usize, f64)>>,
    /// Sectors with non-zero weight somewhere on the grid, ascending.
    pub active: Vec<usize>,
}

impl WeightTable {
    pub fn multiplier_table(&self, theta: usize) -> Vec<C64> {
        self.points
            .iter()
            .map(|p| C64::new(p.iter().find(|(t, _)| *t == theta).map_or(0.0, |(_, w)| *w), 0.0))
            .collect()
    }

    pub fn project(&self, field: &LatticeField, theta: usize) -> LatticeField {
        field.apply_table(&self.multiplier_table(theta))
    }

    /// `{(θ, P_θ f)}` over the active sectors with non-zero output.
    pub fn decompose(&self, field: &LatticeField) -> Vec<(usize, LatticeField)> {
        let fh = field.to_frequency();
        self.active
            .iter()
            .filter_map(|&t| {
                let p = fh.apply_table(&self.multiplier_table(t));
                (p.max_abs() > 0.0).then(|| (t, p.into_register(field.register)))
            })
            .collect()
    }

    pub fn max_partition_error(&self) -> f64 {
        self.points.iter().map(|p| (p.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `P_θ f` with the truncation flag.
pub fn apply_sector_projection(field: &LatticeField, atlas: &SectorAtlas, theta: usize) -> Result<Projection> {
    let out = atlas.project(field, theta)?;
    Ok(Projection { truncated: atlas.truncated(theta, &field.grid), field: out })
}

pub fn sector_multiplier(atlas: &SectorAtlas, theta: usize, xi: &[f64]) -> f64 {
    atlas.multiplier(theta, xi)
}

/// Worst measured constants of the sector symbol inequalities over sampled
/// points of `conv(θ)`, normalised so each inequality reads `ratio ≤ 1`
/// (upper bounds) or reports the smallest ratio (lower bounds).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SectorReport {
    pub theta: usize,
    pub n_theta: f64,
    pub applicable: bool,
    pub samples: usize,
    /// `min |ξ|(1+ε)/N`; the lower points bound needs `≥ 1`.
    pub points_lower: f64,
    /// `max |ξ|/((1+ε)²N)`; needs `≤ 1`.
    pub points_upper: f64,
    /// `max |ξ/|ξ| − ê| / ε`.
    pub angular: f64,
    /// `max |ξ − c_θ| / (ε N)`.
    pub center: f64,
    pub gradient_upper: f64,
    pub gradient_lower: f64,
    pub hessian_upper: f64,
    pub hessian_lower: f64,
    /// `max |∇m(ξ) − ∇m(c)| / (ε C_Λ N^{σ−1})`.
    pub gradient_compare: f64,
    /// `max ‖D²m(ξ) − D²m(c)‖ / (ε C_Λ N^{σ−2})`.
    pub hessian_compare: f64,
    /// `min |λ(D²m(ξ))| / N^{σ−2}`.
    pub eigenvalue_floor: f64,
}

pub(crate) fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().fold(0.0, |a, b| a.max(*b))
}

pub fn check_sector_properties(symbol: &DispersionSymbol, atlas: &SectorAtlas, theta: usize, samples: usize, seed: u64) -> Result<SectorReport> {
    if symbol.dim != atlas.dim() {
        return usage("symbol and atlas dimensions differ");
    }
    if theta >= atlas.len() {
        return usage(format!("sector {theta} not in atlas"));
    }
    let s = *atlas.sector(theta);
    let n = s.n_theta;
    let eps = atlas.eps();
    let sig = symbol.sigma;
    let c = atlas.center(theta);
    let e = atlas.e_hat(theta).to_vec();
    let g_c = symbol.gradient(&c);
    let h_c = symbol.hessian(&c);
    let mut rng = rng_from_seed(seed);
    let mut r = SectorReport {
        theta,
        n_theta: n,
        applicable: n >= 2.0 * symbol.c_max,
        samples,
        points_lower: f64::INFINITY,
        gradient_lower: f64::INFINITY,
        hessian_lower: f64::INFINITY,
        eigenvalue_floor: f64::INFINITY,
        ..Default::default()
    };
    for i in 0..samples {
        let xi = if i % 2 == 0 { atlas.sample_hull(theta, &mut rng) } else { atlas.sample_member(theta, &mut rng) };
        let rad = norm(&xi);
        r.points_lower = r.points_lower.min(rad * (1.0 + eps) / n);
        r.points_upper = r.points_upper.max(rad / ((1.0 + eps) * (1.0 + eps) * n));
        if rad > 0.0 {
            let u: Vec<f64> = xi.iter().map(|x| x / rad).collect();
            r.angular = r.angular.max(dist(&u, &e) / eps);
        }
        r.center = r.center.max(dist(&xi, &c) / (eps * n));
        let g = symbol.gradient(&xi);
        let h = symbol.hessian(&xi);
        let gn = norm(&g) / n.powf(sig - 1.0);
        let hn = operator_norm(&h) / n.powf(sig - 2.0);
        r.gradient_upper = r.gradient_upper.max(gn);
        r.gradient_lower = r.gradient_lower.min(gn);
        r.hessian_upper = r.hessian_upper.max(hn);
        r.hessian_lower = r.hessian_lower.min(hn);
        r.gradient_compare = r.gradient_compare.max(dist(&g, &g_c) / (eps * symbol.c_lambda * n.powf(sig - 1.0)));
        r.hessian_compare = r.hessian_compare.max(operator_norm(&(&h - &h_c)) / (eps * symbol.c_lambda * n.powf(sig - 2.0)));
        let eig = SymmetricEigen::new(h).eigenvalues;
        let floor = eig.iter().fold(f64::INFINITY, |a, b| a.min(b.abs()));
        r.eigenvalue_floor = r.eigenvalue_floor.min(floor / n.powf(sig - 2.0));
    }
    Ok(r)
}

/// Field whose spectrum is the indicator-weighted Gaussian bump at `c_θ`,
/// multiplied by `χ_θ`.
pub fn sector_bump(atlas: &SectorAtlas, theta: usize, grid: TorusGrid) -> LatticeField {
    let c = atlas.center(theta);
    let w = (atlas.eps() * atlas.sector(theta).n_theta).max(1.0);
    LatticeField::from_frequency_fn(grid, |xi| {
        let d2: f64 = xi.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        C64::new(atlas.multiplier(theta, xi) * (-d2 / (w * w)).exp(), 0.0)
    })
    .into_register(Register::Space)
}
