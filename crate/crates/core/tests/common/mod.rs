#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sectorlab::field::{LatticeField, SpaceTimeField, TorusGrid, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_pair(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random spectrum supported on `|ξ|_∞ ≤ band`.
pub fn band_limited(grid: TorusGrid, band: f64, seed: u64) -> LatticeField {
    let mut r = rng(seed);
    LatticeField::from_frequency_fn(grid, |xi| {
        let c = gaussian_pair(&mut r);
        if xi.iter().all(|x| x.abs() <= band) {
            c
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Random samples in the space register.
pub fn noise(grid: TorusGrid, seed: u64) -> LatticeField {
    let mut r = rng(seed);
    LatticeField::from_space_fn(grid, |_| gaussian_pair(&mut r))
}

pub fn noise_st(grid: TorusGrid, times: &[f64], seed: u64) -> SpaceTimeField {
    let slices = (0..times.len()).map(|i| noise(grid, seed.wrapping_mul(1000).wrapping_add(i as u64))).collect();
    SpaceTimeField::new(times.to_vec(), slices).unwrap()
}

pub fn rel_diff(a: &LatticeField, b: &LatticeField) -> f64 {
    a.sub(b).l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
}

pub fn st_diff(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    a.sub(b).l2_norm()
}
