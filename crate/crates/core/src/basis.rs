//! Rotation families, orthogonal-group nets with two-vector kicks, and the
//! per-sector basis choice `θ ↦ 𝒪_θ`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, usage, Error, Result};
use crate::field::rng_from_seed;
use crate::geometry::{operator_norm, SectorAtlas};
use crate::symbol::{sphere_directions, DispersionSymbol};

pub const MAX_NET_DIM: usize = 4;

/// Kick angle factor of the second rotation family in `𝒜′ = 𝒜(r/2)·𝒜(κr/2)`.
pub const KICK_FACTOR: f64 = 0.5;

pub fn identity(d: usize) -> DMatrix<f64> {
    DMatrix::identity(d, d)
}

pub fn orthogonality_error(a: &DMatrix<f64>) -> f64 {
    let d = a.nrows();
    (a.transpose() * a - identity(d)).abs().max()
}

pub fn distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    operator_norm(&(a - b))
}

/// Permutation `S_j` exchanging the first and the `j`-th axis (0-based).
pub fn permutation_s(d: usize, j: usize) -> DMatrix<f64> {
    let mut m = identity(d);
    if j != 0 {
        m.swap_columns(0, j);
    }
    m
}

/// Plane rotation `exp(r(e_{j₀}e_𝒥ᵀ − e_𝒥e_{j₀}ᵀ))` with `e_𝒥` the
/// normalised sum of the axes in `set`.
pub fn plane_rotation(d: usize, j0: usize, set: &[usize], r: f64) -> DMatrix<f64> {
    if set.is_empty() {
        return identity(d);
    }
    let mut a = DMatrix::zeros(d, 1);
    a[j0] = 1.0;
    let mut b = DMatrix::zeros(d, 1);
    for &j in set {
        b[j] = 1.0 / (set.len() as f64).sqrt();
    }
    let g = &a * b.transpose() - &b * a.transpose();
    identity(d) + g.clone() * r.sin() + (&g * &g) * (1.0 - r.cos())
}

#[derive(Clone, Debug)]
pub struct RotationFamily {
    pub dim: usize,
    pub r: f64,
    pub members: Vec<DMatrix<f64>>,
    /// `(j₀, 𝒥)` per member; the identity appears once with `𝒥 = ∅`.
    pub labels: Vec<(usize, Vec<usize>)>,
}

pub fn rotation_family(d: usize, r: f64) -> Result<RotationFamily> {
    if !(r > 0.0 && r < 0.5) {
        return param(format!("rotation angle {r} outside (0, 1/2)"));
    }
    if d == 0 {
        return param("dimension must be positive");
    }
    let mut members = vec![identity(d)];
    let mut labels = vec![(0, Vec::new())];
    for j0 in 0..d {
        let others: Vec<usize> = (0..d).filter(|&j| j != j0).collect();
        for mask in 1u64..(1u64 << others.len()) {
            let set: Vec<usize> = others.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &j)| j).collect();
            members.push(plane_rotation(d, j0, &set, r));
            labels.push((j0, set));
        }
    }
    Ok(RotationFamily { dim: d, r, members, labels })
}

/// `min_j |⟨v, A ê_j⟩| / |v|`.
pub fn min_projection(a: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return 0.0;
    }
    (0..a.ncols())
        .map(|j| a.column(j).iter().zip(v).map(|(x, y)| x * y).sum::<f64>().abs() / n)
        .fold(f64::INFINITY, f64::min)
}

impl RotationFamily {
    /// Best member for `v`: `max_A min_j |⟨v, Aê_j⟩| / |v|`.
    pub fn best_kick(&self, v: &[f64]) -> (usize, f64) {
        let mut best = (0, -1.0);
        for (i, a) in self.members.iter().enumerate() {
            let p = min_projection(a, v);
            if p > best.1 {
                best = (i, p);
            }
        }
        best
    }

    /// Smallest `best_kick / r` over random unit vectors.
    pub fn kick_constant(&self, samples: usize, seed: u64) -> f64 {
        sphere_directions(self.dim, samples, seed).iter().map(|v| self.best_kick(v).1 / self.r).fold(f64::INFINITY, f64::min)
    }
}

/// Haar-distributed orthogonal matrix from the QR factorisation of a
/// Gaussian matrix with the signs of `R`'s diagonal absorbed.
pub fn random_orthogonal(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

#[derive(Clone, Debug)]
pub struct BasisNet {
    pub dim: usize,
    pub r: f64,
    /// The `r`-net `𝓑` of the orthogonal group.
    pub group_net: Vec<DMatrix<f64>>,
    /// Two-vector kicks `𝒜′`.
    pub kicks: Vec<DMatrix<f64>>,
    /// Members `Bᵀ A′` of `𝒜″`.
    pub members: Vec<DMatrix<f64>>,
    /// `(index in 𝓑, index in 𝒜′)` per member.
    pub provenance: Vec<(usize, usize)>,
}

/// Net construction controls.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NetSpec {
    pub candidates: usize,
    pub seed: u64,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self { candidates: 20_000, seed: 0xB0A5 }
    }
}

pub fn build_basis_net(d: usize, r: f64) -> Result<BasisNet> {
    build_basis_net_with(d, r, NetSpec::default())
}

pub fn build_basis_net_with(d: usize, r: f64, spec: NetSpec) -> Result<BasisNet> {
    if d > MAX_NET_DIM {
        return Err(Error::Capability(format!("orthogonal-group nets are limited to d <= {MAX_NET_DIM}, got {d}")));
    }
    if d == 0 {
        return param("dimension must be positive");
    }
    if !(r > 0.0 && r < 0.5) {
        return param(format!("net radius {r} outside (0, 1/2)"));
    }
    if d == 1 {
        let plus = identity(1);
        let minus = -identity(1);
        return Ok(BasisNet {
            dim: 1,
            r,
            group_net: vec![plus.clone(), minus.clone()],
            kicks: vec![plus.clone()],
            members: vec![plus, minus],
            provenance: vec![(0, 0), (1, 0)],
        });
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut group_net: Vec<DMatrix<f64>> = Vec::new();
    for _ in 0..spec.candidates {
        let q = random_orthogonal(d, &mut rng);
        if group_net.iter().all(|b| distance(b, &q) > r) {
            group_net.push(q);
        }
    }
    let a1 = rotation_family(d, r / 2.0)?;
    let a2 = rotation_family(d, KICK_FACTOR * r / 2.0)?;
    let mut kicks = Vec::new();
    for x in &a1.members {
        for y in &a2.members {
            kicks.push(x * y);
        }
    }
    let mut members = Vec::with_capacity(group_net.len() * kicks.len());
    let mut provenance = Vec::with_capacity(members.capacity());
    for (bi, b) in group_net.iter().enumerate() {
        for (ai, a) in kicks.iter().enumerate() {
            members.push(b.transpose() * a);
            provenance.push((bi, ai));
        }
    }
    Ok(BasisNet { dim: d, r, group_net, kicks, members, provenance })
}

/// Result of one net selection.
#[derive(Clone, Debug)]
pub struct Selection {
    pub member: usize,
    pub distance: f64,
    /// `min_{j,k} |⟨v_k, Aê_j⟩| / |v_k|`.
    pub projection: f64,
}

impl BasisNet {
    pub fn nearest_group_element(&self, o: &DMatrix<f64>) -> (usize, f64) {
        self.group_net.iter().enumerate().map(|(i, b)| (i, distance(b, o))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Member within `2r` of `o` maximising the smallest projection of the
    /// vectors; among net elements within `r` of `oᵀ`, each kick is tried.
    pub fn select(&self, o: &DMatrix<f64>, vectors: &[&[f64]]) -> Selection {
        let ot = o.transpose();
        let mut near: Vec<usize> = (0..self.group_net.len()).filter(|&i| distance(&self.group_net[i], &ot) <= self.r).collect();
        if near.is_empty() {
            near.push(self.nearest_group_element(&ot).0);
        }
        let mut best: Option<Selection> = None;
        for &bi in &near {
            for ai in 0..self.kicks.len() {
                let member = bi * self.kicks.len() + ai;
                let a = &self.members[member];
                let p = vectors.iter().map(|v| min_projection(a, v)).fold(f64::INFINITY, f64::min);
                if best.as_ref().is_none_or(|b| p > b.projection + 1e-15) {
                    best = Some(Selection { member, distance: distance(a, o), projection: p });
                }
            }
        }
        best.expect("net is non-empty")
    }

    /// Largest distance from probe matrices to the nearest member.
    pub fn covering_radius(&self, probes: &[DMatrix<f64>]) -> f64 {
        probes
            .iter()
            .map(|o| self.members.iter().map(|m| distance(m, o)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

/// Diagonaliser of `D²m(c)` with columns ordered by eigenvalue (ties by the
/// first component), then the column most aligned with `∇m(c)` moved first.
pub fn diagonalizing_basis(hessian: &DMatrix<f64>, gradient: &[f64]) -> Result<DMatrix<f64>> {
    let d = hessian.nrows();
    if (hessian - hessian.transpose()).abs().max() > 1e-9 * (1.0 + hessian.abs().max()) {
        return Err(Error::Internal("Hessian is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(hessian.clone());
    let mut cols: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            let lead = v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (eig.eigenvalues[j], v)
        })
        .collect();
    cols.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1[0].total_cmp(&a.1[0])));
    let align = |v: &[f64]| v.iter().zip(gradient).map(|(x, y)| x * y).sum::<f64>().abs();
    let first = (0..d).fold(0, |best, j| if align(&cols[j].1) > align(&cols[best].1) + 1e-12 { j } else { best });
    let lead = cols.remove(first);
    cols.insert(0, lead);
    Ok(DMatrix::from_fn(d, d, |i, j| cols[j].1[i]))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisConditions {
    pub theta: usize,
    pub n_theta: f64,
    pub samples: usize,
    /// Per direction `j`: extreme values of `|⟨𝒪ê_j, D²m 𝒪ê_j⟩| / N^{σ−2}`.
    pub hessian_min: Vec<f64>,
    pub hessian_max: Vec<f64>,
    /// Per direction: extreme values of `|⟨∇m, 𝒪ê_j⟩| / N^{σ−1}`.
    pub gradient_min: Vec<f64>,
    pub gradient_max: Vec<f64>,
    /// Per direction: `min |⟨ξ, 𝒪ê_j⟩| / N`.
    pub projection_min: Vec<f64>,
    /// Smallest `C_𝒪` for which every inequality holds in this sector.
    pub c_required: f64,
}

impl BasisConditions {
    pub fn passes(&self, c_o: f64) -> bool {
        self.c_required <= c_o * (1.0 + 1e-12)
    }
}

pub fn verify_basis_conditions(symbol: &DispersionSymbol, atlas: &SectorAtlas, basis: &DMatrix<f64>, theta: usize, samples: usize, seed: u64) -> Result<BasisConditions> {
    let d = atlas.dim();
    if symbol.dim != d || basis.nrows() != d || basis.ncols() != d {
        return usage("symbol, atlas and basis dimensions differ");
    }
    if theta >= atlas.len() {
        return usage(format!("sector {theta} not in atlas"));
    }
    let n = atlas.sector(theta).n_theta;
    let sig = symbol.sigma;
    let mut rng = rng_from_seed(seed);
    let mut points = if atlas.sector(theta).scale == 0 { Vec::new() } else { atlas.corner_points(theta) };
    for i in 0..samples {
        points.push(if i % 2 == 0 { atlas.sample_member(theta, &mut rng) } else { atlas.sample_hull(theta, &mut rng) });
    }
    let mut rec = BasisConditions {
        theta,
        n_theta: n,
        samples: points.len(),
        hessian_min: vec![f64::INFINITY; d],
        hessian_max: vec![0.0; d],
        gradient_min: vec![f64::INFINITY; d],
        gradient_max: vec![0.0; d],
        projection_min: vec![f64::INFINITY; d],
        c_required: 1.0,
    };
    for xi in &points {
        let g = symbol.gradient(xi);
        let h = symbol.hessian(xi);
        for j in 0..d {
            let col = basis.column(j);
            let hv = &h * col;
            let hq = col.dot(&hv).abs() / n.powf(sig - 2.0);
            let gq = col.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>().abs() / n.powf(sig - 1.0);
            let pq = col.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>().abs() / n;
            rec.hessian_min[j] = rec.hessian_min[j].min(hq);
            rec.hessian_max[j] = rec.hessian_max[j].max(hq);
            rec.gradient_min[j] = rec.gradient_min[j].min(gq);
            rec.gradient_max[j] = rec.gradient_max[j].max(gq);
            rec.projection_min[j] = rec.projection_min[j].min(pq);
        }
    }
    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
    for j in 0..d {
        rec.c_required = rec.c_required.max(rec.hessian_max[j]).max(inv(rec.hessian_min[j])).max(rec.gradient_max[j]).max(inv(rec.gradient_min[j])).max(inv(rec.projection_min[j]));
    }
    Ok(rec)
}

/// One distinct matrix of the range `𝒪(Θ)`.
#[derive(Clone, Debug)]
pub struct RangeEntry {
    pub matrix: DMatrix<f64>,
    /// Net member index, `None` for the identity used at small scales.
    pub net_member: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct BasisChoice {
    pub range: Vec<RangeEntry>,
    /// Range index per sector.
    pub assignment: Vec<usize>,
    /// Sectors subject to the conditions (`N_θ ≥ 2C_max`).
    pub checked: Vec<usize>,
    pub c_o: f64,
    /// Worst sector for `C_𝒪`.
    pub worst_sector: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisChoiceSummary {
    pub c_o: f64,
    pub worst_sector: Option<usize>,
    pub range: Vec<Vec<Vec<f64>>>,
    pub assignment: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChoiceSpec {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ChoiceSpec {
    fn default() -> Self {
        Self { samples: 8, seed: 0x5EC }
    }
}

impl BasisChoice {
    pub fn matrix(&self, theta: usize) -> &DMatrix<f64> {
        &self.range[self.assignment[theta]].matrix
    }

    pub fn summary(&self) -> BasisChoiceSummary {
        BasisChoiceSummary {
            c_o: self.c_o,
            worst_sector: self.worst_sector,
            range: self.range.iter().map(|e| e.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()).collect(),
            assignment: self.assignment.clone(),
        }
    }
}

pub fn choose_sector_basis(symbol: &DispersionSymbol, atlas: &SectorAtlas, net: &BasisNet) -> Result<BasisChoice> {
    choose_sector_basis_with(symbol, atlas, net, ChoiceSpec::default())
}

pub fn choose_sector_basis_with(symbol: &DispersionSymbol, atlas: &SectorAtlas, net: &BasisNet, spec: ChoiceSpec) -> Result<BasisChoice> {
    let d = atlas.dim();
    if symbol.dim != d || net.dim != d {
        return usage("symbol, atlas and net dimensions differ");
    }
    let picks: Vec<Option<usize>> = (0..atlas.len())
        .into_par_iter()
        .map(|t| {
            if atlas.sector(t).n_theta < 2.0 * symbol.c_max {
                return Ok(None);
            }
            select_for_sector(symbol, atlas, net, t).map(|s| Some(s.member))
        })
        .collect::<Result<_>>()?;
    let mut range: Vec<RangeEntry> = Vec::new();
    let mut lookup = std::collections::HashMap::new();
    let assignment = picks
        .iter()
        .map(|p| {
            *lookup.entry(*p).or_insert_with(|| {
                let matrix = p.map_or_else(|| identity(d), |m| net.members[m].clone());
                range.push(RangeEntry { matrix, net_member: *p });
                range.len() - 1
            })
        })
        .collect::<Vec<_>>();
    let checked: Vec<usize> = (0..atlas.len()).filter(|&t| picks[t].is_some()).collect();
    let worst = checked
        .par_iter()
        .map(|&t| {
            let basis = &range[assignment[t]].matrix;
            verify_basis_conditions(symbol, atlas, basis, t, spec.samples, crate::field::sub_seed(spec.seed, t as u64)).map(|r| (t, r.c_required))
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst_sector, c_o) = worst.iter().fold((None, 1.0), |acc, &(t, c)| if c > acc.1 { (Some(t), c) } else { acc });
    Ok(BasisChoice { range, assignment, checked, c_o, worst_sector })
}

/// Net selection for one sector from the diagonalizing basis at its center.
pub fn select_for_sector(symbol: &DispersionSymbol, atlas: &SectorAtlas, net: &BasisNet, theta: usize) -> Result<Selection> {
    let c = atlas.center(theta);
    let g = symbol.gradient(&c);
    let o = diagonalizing_basis(&symbol.hessian(&c), &g)?;
    Ok(net.select(&o, &[&c, &g]))
}

/// Default parameters `r = min(0.1, C_Λ^{−(2d+1)})`, `ε_Θ = r² C_Λ^{−2}`.
pub fn default_parameters(d: usize, c_lambda: f64) -> (f64, f64) {
    let r = 0.1f64.min(c_lambda.powi(-(2 * d as i32 + 1)));
    (r, r * r / (c_lambda * c_lambda))
}

/// Random orthogonal probe matrices.
pub fn probe_orthogonal(d: usize, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| random_orthogonal(d, &mut rng)).collect()
}
