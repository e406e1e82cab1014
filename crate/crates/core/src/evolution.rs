//! Linear propagator `e^{itΛ}`, Duhamel integrals and the residual of
//! `(i∂_t + Λ)v = ±h`.
//!
//! The sign argument is the sign of the forcing: `duhamel(v0, h, sign)`
//! returns `v(t) = e^{i(t-t₀)Λ}v₀ ∓ i ∫_{t₀}^t e^{i(t-s)Λ}h(s) ds`, which
//! solves `(i∂_t + Λ)v = ±h`.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::field::{LatticeField, Register, SpaceTimeField, TorusGrid, C64};
use crate::symbol::DispersionSymbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// Coefficient `∓i` in front of the Duhamel integral.
    pub fn duhamel_coefficient(self) -> C64 {
        C64::new(0.0, -self.factor())
    }
}

/// Symbol sampled at the lattice frequencies of one grid.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub grid: TorusGrid,
    pub sigma: f64,
    pub m: Vec<f64>,
}

impl Propagator {
    pub fn new(symbol: &DispersionSymbol, grid: TorusGrid) -> Result<Self> {
        if symbol.dim != grid.dim {
            return usage(format!("symbol dimension {} differs from grid dimension {}", symbol.dim, grid.dim));
        }
        let m = grid.frequencies().chunks(grid.dim).map(|xi| symbol.value(xi)).collect();
        Ok(Self { grid, sigma: symbol.sigma, m })
    }

    /// Table of `e^{itm(ξ)}` over the lattice frequencies.
    pub fn phases(&self, t: f64) -> Vec<C64> {
        self.m.iter().map(|&m| C64::from_polar(1.0, t * m)).collect()
    }

    /// `e^{itΛ}f`, returned in the input register.
    pub fn propagate(&self, f: &LatticeField, t: f64) -> LatticeField {
        assert_eq!(f.grid, self.grid, "field and propagator grids differ");
        if t == 0.0 {
            return f.clone();
        }
        f.apply_table(&self.phases(t))
    }

    /// `t ↦ e^{i(t-t₀)Λ}f` on the given samples, in the space register.
    pub fn free_evolution(&self, f: &LatticeField, times: &[f64], t0: f64) -> Result<SpaceTimeField> {
        let fh = f.to_frequency();
        let slices = times
            .iter()
            .map(|&t| {
                let mut g = fh.clone();
                for (v, m) in g.data.iter_mut().zip(&self.m) {
                    *v *= C64::from_polar(1.0, (t - t0) * m);
                }
                g.into_register(Register::Space)
            })
            .collect();
        SpaceTimeField::new(times.to_vec(), slices)
    }

    /// Duhamel solution of `(i∂_t + Λ)v = sign·h`, `v(t₀) = v₀`, with the
    /// interaction-picture trapezoid rule integrated outward from `t₀`.
    pub fn duhamel(&self, v0: &LatticeField, h: &SpaceTimeField, t0: f64, sign: Sign) -> Result<SpaceTimeField> {
        if v0.grid != self.grid || h.grid != self.grid {
            return usage("Duhamel inputs live on different grids");
        }
        let times = &h.times;
        let p = match times.iter().position(|&t| (t - t0).abs() <= 1e-12 * (1.0 + t0.abs())) {
            Some(p) => p,
            None => return usage(format!("t0 = {t0} is not a sample of the time grid")),
        };
        let t0 = times[p];
        let n = times.len();
        let coef = sign.duhamel_coefficient();
        let g: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let hf = h.slices[j].to_frequency();
                hf.data.iter().zip(&self.m).map(|(v, &m)| v * C64::from_polar(1.0, -(times[j] - t0) * m)).collect()
            })
            .collect();
        let len = self.grid.len();
        let mut acc = vec![vec![C64::new(0.0, 0.0); len]; n];
        for j in p + 1..n {
            let w = 0.5 * (times[j] - times[j - 1]);
            let (prev, cur) = acc.split_at_mut(j);
            for i in 0..len {
                cur[0][i] = prev[j - 1][i] + w * (g[j - 1][i] + g[j][i]);
            }
        }
        for j in (0..p).rev() {
            let w = 0.5 * (times[j + 1] - times[j]);
            let (cur, next) = acc.split_at_mut(j + 1);
            for i in 0..len {
                cur[j][i] = next[0][i] - w * (g[j][i] + g[j + 1][i]);
            }
        }
        let v0h = v0.to_frequency();
        let slices = (0..n)
            .map(|j| {
                let data = (0..len).map(|i| C64::from_polar(1.0, (times[j] - t0) * self.m[i]) * (v0h.data[i] + coef * acc[j][i])).collect();
                let mut out = LatticeField { grid: self.grid, register: Register::Frequency, data };
                if j == p {
                    out.data.copy_from_slice(&v0h.data);
                }
                out.into_register(Register::Space)
            })
            .collect();
        SpaceTimeField::new(times.clone(), slices)
    }

    /// `(i∂_t + Λ)v - sign·h` with second-order differences in the
    /// interaction picture.
    pub fn defect(&self, v: &SpaceTimeField, h: &SpaceTimeField, sign: Sign) -> Result<SpaceTimeField> {
        if !v.same_times(h) || v.grid != self.grid {
            return usage("residual inputs live on different grids");
        }
        let n = v.times.len();
        if n < 3 {
            return usage("the residual needs at least three time samples");
        }
        let t = &v.times;
        let tr = t[0];
        let w: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let f = v.slices[j].to_frequency();
                f.data.iter().zip(&self.m).map(|(x, &m)| x * C64::from_polar(1.0, -(t[j] - tr) * m)).collect()
            })
            .collect();
        let slices = (0..n)
            .map(|j| {
                let (a, b, c) = if j == 0 {
                    (0, 1, 2)
                } else if j == n - 1 {
                    (n - 3, n - 2, n - 1)
                } else {
                    (j - 1, j, j + 1)
                };
                let coeffs = lagrange_derivative(t[a], t[b], t[c], t[j]);
                let hf = h.slices[j].to_frequency();
                let data = (0..self.grid.len())
                    .map(|i| {
                        let dw = coeffs[0] * w[a][i] + coeffs[1] * w[b][i] + coeffs[2] * w[c][i];
                        C64::new(0.0, 1.0) * C64::from_polar(1.0, (t[j] - tr) * self.m[i]) * dw - sign.factor() * hf.data[i]
                    })
                    .collect();
                LatticeField { grid: self.grid, register: Register::Frequency, data }.into_register(Register::Space)
            })
            .collect();
        SpaceTimeField::new(t.clone(), slices)
    }

    /// `‖(i∂_t + Λ)v - sign·h‖ / ‖h‖` in `L²_t L²_x`; the absolute defect
    /// when `h = 0`.
    pub fn residual(&self, v: &SpaceTimeField, h: &SpaceTimeField, sign: Sign) -> Result<f64> {
        let d = self.defect(v, h, sign)?.l2_norm();
        let hn = h.l2_norm();
        Ok(if hn > 0.0 { d / hn } else { d })
    }
}

/// Weights of the derivative at `x` of the quadratic through `a, b, c`.
fn lagrange_derivative(a: f64, b: f64, c: f64, x: f64) -> [f64; 3] {
    [
        ((x - b) + (x - c)) / ((a - b) * (a - c)),
        ((x - a) + (x - c)) / ((b - a) * (b - c)),
        ((x - a) + (x - b)) / ((c - a) * (c - b)),
    ]
}

pub fn propagate(f: &LatticeField, symbol: &DispersionSymbol, t: f64) -> Result<LatticeField> {
    Ok(Propagator::new(symbol, f.grid)?.propagate(f, t))
}

pub fn duhamel(v0: &LatticeField, h: &SpaceTimeField, symbol: &DispersionSymbol, t0: f64, sign: Sign) -> Result<SpaceTimeField> {
    Propagator::new(symbol, v0.grid)?.duhamel(v0, h, t0, sign)
}

pub fn residual_nonhomogeneous(v: &SpaceTimeField, h: &SpaceTimeField, symbol: &DispersionSymbol, sign: Sign) -> Result<f64> {
    Propagator::new(symbol, v.grid)?.residual(v, h, sign)
}
