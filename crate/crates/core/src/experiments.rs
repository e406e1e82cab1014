//! Experiment configuration, orchestration and report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{build_basis_net_with, choose_sector_basis_with, identity, select_for_sector, BasisNet, ChoiceSpec, NetSpec};
use crate::error::{usage, Error, Result};
use crate::evolution::{Propagator, Sign};
use crate::field::{field_bytes, randomize, rng_from_seed, sidecar_json, sub_seed, time_grid, uniform_times, FieldMeta, LatticeField, Law, RandomDraw, Register, SpaceTimeField, TorusGrid, C64};
use crate::fixedpoint::{iterate_k, solve_u, split_step, PicardConfig, RunManifest, SolveConfig};
use crate::geometry::{build_atlas, probe_directions, SectorAtlas};
use crate::norms::{dominant_directions, DirectionalFrame, ExponentTriple, NormConfig, NormContext, NormKind, StreamingNorm};
use crate::symbol::{check_order_conditions, extend_symbol_1d, ConditionSampling, DispersionSymbol, LocalSymbol};
use crate::thresholds::{kappa0, mu, threshold_table};
use crate::trees::{enumerate_trees, linear_fit, tail_monte_carlo, z_terms, TailSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SymbolsCheck,
    AtlasBuild,
    BasisFind,
    Randomize,
    Evolve,
    Trees,
    Tails,
    Picard,
    Solve,
    Thresholds,
    SlopeMaximal,
    SlopeSmoothing,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        Self::SymbolsCheck,
        Self::AtlasBuild,
        Self::BasisFind,
        Self::Randomize,
        Self::Evolve,
        Self::Trees,
        Self::Tails,
        Self::Picard,
        Self::Solve,
        Self::Thresholds,
        Self::SlopeMaximal,
        Self::SlopeSmoothing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SymbolsCheck => "symbols-check",
            Self::AtlasBuild => "atlas-build",
            Self::BasisFind => "basis-find",
            Self::Randomize => "randomize",
            Self::Evolve => "evolve",
            Self::Trees => "trees",
            Self::Tails => "tails",
            Self::Picard => "picard",
            Self::Solve => "solve",
            Self::Thresholds => "thresholds",
            Self::SlopeMaximal => "slope-maximal",
            Self::SlopeSmoothing => "slope-smoothing",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Usage(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    /// `|ξ|^σ`.
    Power,
    /// `Σ a|ξ|^p` over `terms`.
    Mixed,
    /// One-dimensional extension of `|ξ|^σ` given on `(r, c0·r)`.
    Extended,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolSpec {
    pub kind: SymbolKind,
    pub dim: usize,
    pub sigma: f64,
    pub c_lambda: f64,
    pub c_max: f64,
    pub terms: Vec<[f64; 2]>,
    pub r: f64,
    pub c0: f64,
    pub c_l: f64,
    pub m_param: Option<f64>,
}

impl Default for SymbolSpec {
    fn default() -> Self {
        Self { kind: SymbolKind::Power, dim: 1, sigma: 2.0, c_lambda: 4.0, c_max: 1.0, terms: Vec::new(), r: 1.0, c0: 2.0, c_l: 2.0, m_param: None }
    }
}

impl SymbolSpec {
    pub fn build(&self) -> Result<DispersionSymbol> {
        match self.kind {
            SymbolKind::Power => DispersionSymbol::power(self.dim, self.sigma, self.c_lambda, self.c_max),
            SymbolKind::Mixed => {
                let terms: Vec<(f64, f64)> = self.terms.iter().map(|t| (t[0], t[1])).collect();
                DispersionSymbol::mixed(self.dim, &terms, self.sigma, self.c_lambda, self.c_max)
            }
            SymbolKind::Extended => {
                if self.dim != 1 {
                    return usage("extended symbols are one-dimensional");
                }
                Ok(extend_symbol_1d(&LocalSymbol::power(self.sigma), self.r, self.c0, self.sigma, self.c_l, self.m_param)?.symbol)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub period: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { period: 8.0, points: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtlasSpec {
    pub eps_theta: f64,
    pub n_max: f64,
    pub probes: usize,
}

impl Default for AtlasSpec {
    fn default() -> Self {
        Self { eps_theta: 0.25, n_max: 64.0, probes: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSpec {
    pub r: f64,
    pub candidates: usize,
    pub samples: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self { r: 0.1, candidates: NetSpec::default().candidates, samples: ChoiceSpec::default().samples }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormSpec {
    pub eps0: f64,
    pub s: f64,
    pub kind: NormKind,
}

impl Default for NormSpec {
    fn default() -> Self {
        let c = NormConfig::default();
        Self { eps0: c.eps0, s: c.s, kind: c.kind }
    }
}

impl NormSpec {
    pub fn config(&self) -> NormConfig {
        NormConfig { eps0: self.eps0, s: self.s, kind: self.kind }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// Gaussian bump `exp(−|ξ−ξ₀|²/(2w²))` in frequency.
    Bump,
    /// Single lattice frequency `ξ₀`.
    Mode,
    /// Complex Gaussian spectrum on `|ξ| ≤ w`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSpec {
    pub kind: FieldKind,
    /// Target `L²` norm.
    pub l2: f64,
    pub width: f64,
    pub frequency: Vec<f64>,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self { kind: FieldKind::Bump, l2: 1.0, width: 2.0, frequency: Vec::new() }
    }
}

impl FieldSpec {
    pub fn build(&self, grid: TorusGrid, seed: u64) -> Result<LatticeField> {
        let d = grid.dim;
        let center = if self.frequency.is_empty() { vec![0.0; d] } else { self.frequency.clone() };
        if center.len() != d {
            return usage("field frequency has the wrong dimension");
        }
        let dist2 = |xi: &[f64]| xi.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let raw = match self.kind {
            FieldKind::Bump => LatticeField::from_frequency_fn(grid, |xi| C64::new((-dist2(xi) / (2.0 * self.width * self.width)).exp(), 0.0)),
            FieldKind::Mode => {
                let tol = 0.5 / grid.period;
                LatticeField::from_frequency_fn(grid, |xi| C64::new(if dist2(xi).sqrt() < tol { 1.0 } else { 0.0 }, 0.0))
            }
            FieldKind::Random => {
                let mut rng = rng_from_seed(seed);
                LatticeField::from_frequency_fn(grid, |xi| {
                    let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    if dist2(xi).sqrt() <= self.width {
                        z
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            }
        };
        let n = raw.l2_norm();
        if n == 0.0 {
            return usage("field specification selects no lattice frequency");
        }
        Ok(raw.scale(C64::new(self.l2 / n, 0.0)).to_space())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrawSpec {
    pub law: Law,
    pub count: usize,
}

impl Default for DrawSpec {
    fn default() -> Self {
        Self { law: Law::ComplexGaussian, count: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub t1: f64,
    pub steps: usize,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self { t1: 0.1, steps: 16 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailNorm {
    /// Space-time `L²`.
    L2,
    /// Largest modulus over all samples.
    Sup,
    /// Aggregate `Y^{μ(n,S)}` norm over the atlas.
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailsSpec {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub norm: TailNorm,
    pub slope_tolerance: f64,
}

impl Default for TailsSpec {
    fn default() -> Self {
        Self { n: 1, lambdas: Vec::new(), norm: TailNorm::L2, slope_tolerance: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub order: u32,
    pub horizon: Option<f64>,
    pub steps_per_unit: usize,
    pub delta0: f64,
    pub max_halvings: usize,
    pub tolerance: f64,
    pub max_iters: usize,
    pub divergence_run: usize,
    pub exponents: Option<[f64; 2]>,
    /// Split-step substeps per sample gap; zero skips the oracle.
    pub oracle_substeps: usize,
    pub residual_tol: f64,
    pub oracle_tol: f64,
    pub ratio_tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let s = SolveConfig::default();
        Self {
            order: s.order,
            horizon: Some(0.1),
            steps_per_unit: s.steps_per_unit,
            delta0: s.delta0,
            max_halvings: s.max_halvings,
            tolerance: s.picard.tolerance,
            max_iters: s.picard.max_iters,
            divergence_run: s.picard.divergence_run,
            exponents: None,
            oracle_substeps: 8,
            residual_tol: 1e-5,
            oracle_tol: 1e-3,
            ratio_tol: 0.5,
        }
    }
}

impl SolverSpec {
    pub fn picard(&self) -> PicardConfig {
        PicardConfig { tolerance: self.tolerance, max_iters: self.max_iters, divergence_run: self.divergence_run }
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            order: self.order,
            horizon: self.horizon,
            steps_per_unit: self.steps_per_unit,
            delta0: self.delta0,
            max_halvings: self.max_halvings,
            picard: self.picard(),
            exponents: self.exponents.map(|e| (e[0], e[1])),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TablesSpec {
    pub sigma: Vec<f64>,
    pub d_min: usize,
    pub d_max: usize,
    /// Data regularities for which `κ₀` is tabulated.
    pub s: Vec<f64>,
}

impl Default for TablesSpec {
    fn default() -> Self {
        Self { sigma: vec![2.0, 2.5, 3.0, 4.0], d_min: 1, d_max: 16, s: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlopeSpec {
    /// Dyadic sector scales; at least four.
    pub n_values: Vec<f64>,
    /// Transverse exponent `𝔠`.
    pub c_exp: f64,
    /// Random sector inputs per scale.
    pub batch: usize,
    /// Adds wave packets matched to the sweep length and to the dispersive
    /// spreading to every batch.
    pub packets: bool,
    /// Time interval shared by all scales; when absent, `[-1, 1]` for the
    /// maximal experiment and one sweep `[0, 2/v_θ]` of the sector group
    /// speed per scale for the smoothing experiment.
    pub interval: Option<[f64; 2]>,
    /// Time samples; the smoothing experiment raises this per scale until
    /// the integrand is resolved.
    pub time_samples: usize,
    /// Direction index of the sectors.
    pub direction: usize,
    /// Distinguished axis of the maximal frame.
    pub j: usize,
    pub tolerance: f64,
    /// Cap on the number of grid points per run.
    pub max_points: usize,
    pub min_period: f64,
}

impl Default for SlopeSpec {
    fn default() -> Self {
        Self {
            n_values: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            c_exp: 2.0,
            batch: 8,
            packets: true,
            interval: None,
            time_samples: 128,
            direction: 0,
            j: 0,
            tolerance: 0.15,
            max_points: 1 << 17,
            min_period: 16.0,
        }
    }
}

/// A complete experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_sign")]
    pub sign: Sign,
    #[serde(default)]
    pub symbol: SymbolSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub atlas: AtlasSpec,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default)]
    pub norm: NormSpec,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default)]
    pub draws: DrawSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub tails: TailsSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub tables: TablesSpec,
    #[serde(default)]
    pub slope: SlopeSpec,
}

fn default_sign() -> Sign {
    Sign::Plus
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            output: None,
            sign: Sign::Plus,
            symbol: SymbolSpec::default(),
            grid: GridSpec::default(),
            atlas: AtlasSpec::default(),
            basis: BasisSpec::default(),
            norm: NormSpec::default(),
            field: FieldSpec::default(),
            draws: DrawSpec::default(),
            time: TimeSpec::default(),
            tails: TailsSpec::default(),
            solver: SolverSpec::default(),
            tables: TablesSpec::default(),
            slope: SlopeSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("invalid configuration: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Parses a configuration for a known experiment; the `experiment` key
    /// may be omitted but must match when present.
    pub fn from_toml_for(text: &str, kind: ExperimentKind) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Usage(format!("invalid configuration: {}", e.message())))?;
        match table.get("experiment") {
            None => {
                table.insert("experiment".into(), toml::Value::String(kind.name().into()));
            }
            Some(toml::Value::String(s)) if s == kind.name() => {}
            Some(other) => return usage(format!("configuration names experiment {other}, expected {:?}", kind.name())),
        }
        table.try_into().map_err(|e: toml::de::Error| Error::Usage(format!("invalid configuration: {}", e.message())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c).expect("configuration serializes");
        Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.symbol.dim, self.grid.period, self.grid.points)
    }
}

/// Files produced by a run, kept in memory until written.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub files: Vec<(String, Vec<u8>)>,
    /// `None` when the experiment has no pass/fail criterion.
    pub verdict: Option<bool>,
    pub summary: serde_json::Value,
}

impl RunOutput {
    fn new(config: &ExperimentConfig) -> Self {
        Self { experiment: config.experiment, config_hash: config.hash(), files: Vec::new(), verdict: None, summary: serde_json::Value::Null }
    }

    fn json(&mut self, name: &str, payload: &impl Serialize) -> Result<()> {
        let value = serde_json::json!({
            "config_hash": self.config_hash,
            "experiment": self.experiment.name(),
            "result": payload,
        });
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, rows: &[String]) {
        let mut text = format!("# config_hash: {}\n{header}\n", self.config_hash);
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn field(&mut self, name: &str, field: &LatticeField, seed: u64, symbol_id: &str) -> Result<()> {
        let meta = FieldMeta { seed: Some(seed), symbol_id: Some(symbol_id.to_string()), params: serde_json::json!({ "config_hash": self.config_hash }) };
        self.files.push((name.to_string(), field_bytes(field)));
        self.files.push((format!("{name}.json"), sidecar_json(field, &meta)?.into_bytes()));
        Ok(())
    }

    /// Writes every file under `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let p = dir.join(name);
                fs::write(&p, bytes)?;
                Ok(p)
            })
            .collect()
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    match config.experiment {
        ExperimentKind::SymbolsCheck => run_symbols_check(config),
        ExperimentKind::AtlasBuild => run_atlas_build(config),
        ExperimentKind::BasisFind => run_basis_find(config),
        ExperimentKind::Randomize => run_randomize(config),
        ExperimentKind::Evolve => run_evolve(config),
        ExperimentKind::Trees => run_trees(config),
        ExperimentKind::Tails => run_tails(config),
        ExperimentKind::Picard => run_picard(config),
        ExperimentKind::Solve => run_solver(config),
        ExperimentKind::Thresholds => run_tables(config),
        ExperimentKind::SlopeMaximal => run_maximal_slope(config).map(|(_, o)| o),
        ExperimentKind::SlopeSmoothing => run_smoothing_slope(config).map(|(_, o)| o),
    }
}

fn run_symbols_check(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let symbol = config.symbol.build()?;
    let sampling = ConditionSampling { seed: config.seed, ..ConditionSampling::default() };
    let report = check_order_conditions(&symbol, &sampling)?;
    let extension = if config.symbol.kind == SymbolKind::Extended {
        let ext = extend_symbol_1d(&LocalSymbol::power(config.symbol.sigma), config.symbol.r, config.symbol.c0, config.symbol.sigma, config.symbol.c_l, config.symbol.m_param)?;
        Some(serde_json::json!({
            "coefficients": ext.coefficients,
            "junction_jumps": ext.junction_jumps(),
            "growth_constant": ext.growth_constant(2000),
        }))
    } else {
        None
    };
    out.verdict = Some(report.passed);
    out.summary = serde_json::json!({ "passed": report.passed, "required_c_lambda": report.required_c_lambda });
    out.json("symbols_report.json", &serde_json::json!({ "symbol": symbol.id, "report": report, "extension": extension }))?;
    Ok(out)
}

/// Largest `|Σ_θ χ_θ − 1|` over random probes inside the covered ball.
pub fn partition_probe_error(atlas: &SectorAtlas, probes: usize, seed: u64) -> f64 {
    let dirs = probe_directions(atlas.dim(), probes, seed);
    let mut rng = rng_from_seed(sub_seed(seed, 1));
    let r_max = atlas.coverage_radius();
    dirs.iter()
        .map(|u| {
            let r = rng.random_range(0.0..r_max);
            let xi: Vec<f64> = u.iter().map(|x| x * r).collect();
            (atlas.partition_sum(&xi) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn run_atlas_build(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let atlas = build_atlas(config.symbol.dim, config.atlas.eps_theta, config.atlas.n_max)?;
    let err = partition_probe_error(&atlas, config.atlas.probes, config.seed);
    out.verdict = Some(err < 1e-10);
    out.summary = serde_json::json!({ "sectors": atlas.len(), "partition_error": err });
    out.json("atlas.json", &serde_json::json!({ "summary": atlas.summary(), "partition_error": err, "probes": config.atlas.probes }))?;
    let table = atlas.chi_table_csv(201);
    let mut lines = table.lines();
    let header = lines.next().unwrap_or("t,chi").to_string();
    let rows: Vec<String> = lines.map(str::to_string).collect();
    out.csv("chi_profile.csv", &header, &rows);
    Ok(out)
}

fn build_net(config: &ExperimentConfig) -> Result<BasisNet> {
    build_basis_net_with(config.symbol.dim, config.basis.r, NetSpec { candidates: config.basis.candidates, seed: sub_seed(config.seed, 0xB0A5) })
}

fn run_basis_find(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let symbol = config.symbol.build()?;
    let atlas = build_atlas(config.symbol.dim, config.atlas.eps_theta, config.atlas.n_max)?;
    let net = build_net(config)?;
    let choice = choose_sector_basis_with(&symbol, &atlas, &net, ChoiceSpec { samples: config.basis.samples, seed: config.seed })?;
    out.summary = serde_json::json!({ "c_o": choice.c_o, "range": choice.range.len(), "net": net.members.len(), "checked": choice.checked.len() });
    out.json(
        "basis.json",
        &serde_json::json!({
            "net_size": net.members.len(),
            "group_net_size": net.group_net.len(),
            "checked_sectors": choice.checked.len(),
            "choice": choice.summary(),
        }),
    )?;
    Ok(out)
}

fn initial_field(config: &ExperimentConfig) -> Result<(TorusGrid, LatticeField)> {
    let grid = config.grid()?;
    let f = config.field.build(grid, sub_seed(config.seed, 0xF1E1D))?;
    Ok((grid, f))
}

fn run_randomize(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let symbol = config.symbol.build()?;
    let (grid, f) = initial_field(config)?;
    let draw = RandomDraw::sample(&grid, config.draws.law, config.seed);
    let fo = randomize(&f, &draw)?;
    out.summary = serde_json::json!({ "f_l2": f.l2_norm(), "f_omega_l2": fo.l2_norm() });
    out.json(
        "randomize.json",
        &serde_json::json!({
            "law": config.draws.law,
            "cells": draw.coefficients.len(),
            "f_l2": f.l2_norm(),
            "f_omega_l2": fo.l2_norm(),
            "f_omega_sup": fo.max_abs(),
        }),
    )?;
    out.field("f_omega.bin", &fo.to_space(), config.seed, &symbol.id)?;
    Ok(out)
}

fn run_evolve(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let symbol = config.symbol.build()?;
    let (grid, f) = initial_field(config)?;
    let prop = Propagator::new(&symbol, grid)?;
    let times = uniform_times(0.0, config.time.t1, config.time.steps);
    let u = prop.free_evolution(&f, &times, 0.0)?;
    let n0 = f.l2_norm();
    let mut drift = 0.0f64;
    let rows: Vec<String> = times
        .iter()
        .zip(&u.slices)
        .map(|(t, s)| {
            let n = s.l2_norm();
            drift = drift.max((n - n0).abs() / n0.max(f64::MIN_POSITIVE));
            format!("{t},{n},{}", s.max_abs())
        })
        .collect();
    out.csv("evolution.csv", "t,l2,sup", &rows);
    out.verdict = Some(drift < 1e-10);
    out.summary = serde_json::json!({ "l2_drift": drift });
    out.json("evolve.json", &serde_json::json!({ "l2_drift": drift, "samples": times.len() }))?;
    let last = u.slices.last().expect("at least one time sample").to_space();
    out.field("u_final.bin", &last, config.seed, &symbol.id)?;
    Ok(out)
}

fn run_trees(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let symbol = config.symbol.build()?;
    let (grid, f) = initial_field(config)?;
    let prop = Propagator::new(&symbol, grid)?;
    let draw = RandomDraw::sample(&grid, config.draws.law, config.seed);
    let fo = randomize(&f, &draw)?;
    let times = uniform_times(0.0, config.time.t1, config.time.steps);
    let order = config.solver.order;
    let z = z_terms(&fo, order, &prop, &times, config.sign)?;
    let mut rows = Vec::new();
    let mut counts = BTreeMap::new();
    for (&n, zn) in &z.z {
        let count = enumerate_trees(n as usize)?.len();
        counts.insert(n, count);
        rows.push(format!("{n},{count},{},{}", zn.l2_norm(), zn.max_abs()));
    }
    out.csv("trees.csv", "n,trees,l2,sup", &rows);
    out.summary = serde_json::json!({ "counts": counts });
    out.json("trees.json", &serde_json::json!({ "order": order, "counts": counts, "z_le_l2": z.z_le.l2_norm(), "remainder_l2": z.high.l2_norm() }))?;
    Ok(out)
}

/// Sector machinery shared by the norm-based experiments.
pub struct NormSetup {
    pub symbol: DispersionSymbol,
    pub atlas: SectorAtlas,
    pub table: crate::geometry::WeightTable,
    pub basis: crate::basis::BasisChoice,
}

impl NormSetup {
    pub fn new(config: &ExperimentConfig, grid: &TorusGrid) -> Result<Self> {
        let symbol = config.symbol.build()?;
        let atlas = build_atlas(config.symbol.dim, config.atlas.eps_theta, config.atlas.n_max)?;
        let table = atlas.weight_table(grid)?;
        let net = build_net(config)?;
        let basis = choose_sector_basis_with(&symbol, &atlas, &net, ChoiceSpec { samples: config.basis.samples, seed: config.seed })?;
        Ok(Self { symbol, atlas, table, basis })
    }

    pub fn context(&self, config: NormConfig) -> Result<NormContext<'_>> {
        NormContext::new(&self.atlas, &self.table, &self.basis, &self.symbol, config)
    }
}

pub fn run_tails(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let symbol = config.symbol.build()?;
    let (grid, f) = initial_field(config)?;
    let prop = Propagator::new(&symbol, grid)?;
    let times = uniform_times(0.0, config.time.t1, config.time.steps);
    let spec = TailSpec { n: config.tails.n, draws: config.draws.count, law: config.draws.law, seed: config.seed, lambdas: config.tails.lambdas.clone() };
    let table = match config.tails.norm {
        TailNorm::L2 => tail_monte_carlo(&f, &spec, &prop, &times, config.sign, &|u: &SpaceTimeField| u.l2_norm())?,
        TailNorm::Sup => tail_monte_carlo(&f, &spec, &prop, &times, config.sign, &|u: &SpaceTimeField| u.max_abs())?,
        TailNorm::Y => {
            let setup = NormSetup::new(config, &grid)?;
            let ctx = setup.context(NormConfig { kind: NormKind::Y, ..config.norm.config() })?;
            let s = mu(config.tails.n as u32, config.norm.s, symbol.sigma);
            let norm = |u: &SpaceTimeField| ctx.aggregate_norm(u, s, NormKind::Y).unwrap_or(f64::NAN);
            tail_monte_carlo(&f, &spec, &prop, &times, config.sign, &norm)?
        }
    };
    let mut order: Vec<usize> = (0..table.rows.len()).collect();
    order.sort_by(|&a, &b| table.rows[a].lambda.total_cmp(&table.rows[b].lambda));
    let mut monotone = true;
    let mut prev: Option<f64> = None;
    let rows: Vec<String> = order
        .iter()
        .map(|&i| {
            let r = &table.rows[i];
            let ok = prev.is_none_or(|s| r.survival <= s);
            monotone &= ok;
            prev = Some(r.survival);
            format!("{},{},{},{},{}", r.lambda, r.survivors, r.draws, r.survival, ok)
        })
        .collect();
    out.csv("survival.csv", "lambda,survivors,draws,survival,monotone", &rows);
    let slope_ok = match (&table.fit, config.tails.n) {
        (Some(fit), 1) => (fit.slope - table.predicted_slope).abs() <= config.tails.slope_tolerance,
        (None, 1) => false,
        _ => true,
    };
    out.verdict = Some(monotone && slope_ok);
    out.summary = serde_json::json!({ "monotone": monotone, "fit": table.fit, "predicted_slope": table.predicted_slope });
    out.json("tails.json", &serde_json::json!({ "monotone": monotone, "fit": table.fit, "predicted_slope": table.predicted_slope, "n": table.n, "draws": spec.draws }))?;
    Ok(out)
}

fn run_picard(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let symbol = config.symbol.build()?;
    let (grid, f) = initial_field(config)?;
    let prop = Propagator::new(&symbol, grid)?;
    let draw = RandomDraw::sample(&grid, config.draws.law, config.seed);
    let fo = randomize(&f, &draw)?;
    let horizon = config.solver.horizon.unwrap_or(config.time.t1);
    let times = time_grid(0.0, horizon, config.solver.steps_per_unit);
    let z = z_terms(&fo, config.solver.order, &prop, &times, config.sign)?;
    let zero = LatticeField::zeros(grid, Register::Space);
    let outcome = iterate_k(&zero, &z.z_le, &z.high, &prop, 0.0, config.sign, &config.solver.picard())?;
    let rows: Vec<String> = outcome
        .differences
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let r = if k == 0 { String::new() } else { outcome.ratios[k - 1].to_string() };
            format!("{},{d},{r}", k + 1)
        })
        .collect();
    out.csv("picard.csv", "iteration,difference,ratio", &rows);
    out.verdict = Some(outcome.converged);
    out.summary = serde_json::json!({ "converged": outcome.converged, "iterations": outcome.iterations, "max_ratio": outcome.max_ratio() });
    out.json("picard.json", &serde_json::json!({ "converged": outcome.converged, "iterations": outcome.iterations, "max_ratio": outcome.max_ratio(), "horizon": horizon }))?;
    Ok(out)
}

/// Outcome of a solver run together with its oracle comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverReport {
    pub manifest: RunManifest,
    pub f_omega_l2: f64,
    pub verdict: bool,
}

pub fn solver_report(config: &ExperimentConfig) -> Result<(SolverReport, LatticeField)> {
    let symbol = config.symbol.build()?;
    let (grid, f) = initial_field(config)?;
    let prop = Propagator::new(&symbol, grid)?;
    let draw = RandomDraw::sample(&grid, config.draws.law, config.seed);
    let solve = config.solver.solve_config();
    let sol = solve_u(&f, &draw, &prop, config.sign, &solve)?;
    let oracle_error = if config.solver.oracle_substeps > 0 {
        let reference = split_step(&sol.f_omega, &prop, &sol.u.times, config.sign, config.solver.oracle_substeps)?;
        Some(sol.u.sub(&reference).l2_norm() / reference.l2_norm().max(f64::MIN_POSITIVE))
    } else {
        None
    };
    let d = &sol.diagnostics;
    let verdict = d.converged && d.max_ratio < config.solver.ratio_tol && d.integral_residual < config.solver.residual_tol && oracle_error.is_none_or(|e| e < config.solver.oracle_tol);
    let manifest = RunManifest { config: solve, seed: config.seed, diagnostics: sol.diagnostics.clone(), u_norm: sol.u.l2_norm(), v_norm: sol.v.l2_norm(), oracle_error };
    let last = sol.u.slices.last().expect("at least one time sample").to_space();
    Ok((SolverReport { manifest, f_omega_l2: sol.f_omega.l2_norm(), verdict }, last))
}

pub fn run_solver(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let (report, last) = solver_report(config)?;
    out.verdict = Some(report.verdict);
    let d = &report.manifest.diagnostics;
    out.summary = serde_json::json!({
        "converged": d.converged,
        "max_ratio": d.max_ratio,
        "integral_residual": d.integral_residual,
        "oracle_error": report.manifest.oracle_error,
    });
    let rows: Vec<String> = d.ratios.iter().enumerate().map(|(k, r)| format!("{},{r}", k + 2)).collect();
    out.csv("contraction.csv", "iteration,ratio", &rows);
    out.json("solve.json", &report)?;
    out.field("u_final.bin", &last, config.seed, &config.symbol.build()?.id)?;
    Ok(out)
}

pub fn run_tables(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(config);
    let spec = &config.tables;
    if spec.d_min == 0 || spec.d_min > spec.d_max {
        return usage("table dimensions must satisfy 1 <= d_min <= d_max");
    }
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &sigma in &spec.sigma {
        for row in threshold_table(sigma, spec.d_min..=spec.d_max) {
            rows.push(format!("{},{},{},{},{}", row.d, row.sigma, row.s_c, row.s_min, row.s_min_first_order));
            all.push(row);
        }
    }
    out.csv("thresholds.csv", "d,sigma,s_c,s_min,s_min_first_order", &rows);
    if !spec.s.is_empty() {
        let mut krows = Vec::new();
        for &sigma in &spec.sigma {
            for d in spec.d_min..=spec.d_max {
                for &s in &spec.s {
                    let k = kappa0(d, sigma, s).map_or_else(String::new, |k| k.to_string());
                    krows.push(format!("{d},{sigma},{s},{k}"));
                }
            }
        }
        out.csv("kappa0.csv", "d,sigma,s,kappa0", &krows);
    }
    out.summary = serde_json::json!({ "rows": all.len() });
    out.json("thresholds.json", &all)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeKind {
    Maximal,
    Smoothing,
}

/// One regression arm: the largest norm found at each scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeArm {
    pub axes: Vec<Vec<usize>>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeReport {
    pub kind: SlopeKind,
    pub dim: usize,
    pub sigma: f64,
    pub c_exp: f64,
    pub n_values: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
    pub predicted: f64,
    pub tolerance: f64,
    /// `predicted + tolerance − slope`; non-negative exactly when the verdict passes.
    pub margin: f64,
    pub verdict: bool,
    /// Time interval per scale.
    pub intervals: Vec<[f64; 2]>,
    pub periods: Vec<f64>,
    pub points: Vec<usize>,
    pub time_samples: Vec<usize>,
    /// Scales whose packets travel farther than the grid period.
    pub wrapped: Vec<bool>,
    /// Smoothing only: axes outside the dominant set, reported without a verdict.
    pub control: Option<SlopeArm>,
}

fn predicted_exponent(kind: SlopeKind, d: usize, sigma: f64, c: f64) -> f64 {
    let df = d as f64;
    match kind {
        SlopeKind::Maximal => sigma / 4.0 + (df - 1.0 - sigma / 2.0) * (0.5 - 1.0 / c),
        SlopeKind::Smoothing => -(sigma - 1.0) / 2.0 + (df - 1.0) * (0.5 - 1.0 / c),
    }
}

fn group_speed(symbol: &DispersionSymbol, xi: &[f64]) -> f64 {
    symbol.gradient(xi).iter().map(|g| g * g).sum::<f64>().sqrt() / (2.0 * std::f64::consts::PI)
}

/// Time samples resolving `|e^{itΛ}P_θf|²` at a fixed point: three per
/// period of the largest phase difference `m(ξ) − m(η)` over the sector.
fn resolving_samples(symbol: &DispersionSymbol, atlas: &SectorAtlas, theta: usize, length: f64) -> usize {
    let e = atlas.e_hat(theta);
    let at = |r: f64| symbol.value(&e.iter().map(|x| x * r).collect::<Vec<_>>());
    let spread = (at(atlas.outer_radius(theta)) - at(atlas.sector(theta).n_theta)).abs();
    (1.5 * length * spread / std::f64::consts::PI).ceil() as usize + 1
}

/// Torus sized so that packets over the interval do not wrap, subject to
/// the point cap.
struct ScaleGrid {
    grid: TorusGrid,
    wrapped: bool,
}

fn scale_grid(symbol: &DispersionSymbol, atlas: &SectorAtlas, theta: usize, length: f64, spec: &SlopeSpec) -> Result<ScaleGrid> {
    let d = atlas.dim();
    let outer = atlas.outer_radius(theta);
    let e = atlas.e_hat(theta).to_vec();
    let v = group_speed(symbol, &e.iter().map(|x| x * outer).collect::<Vec<_>>());
    let need = 2.5 * v * length;
    let mut period = spec.min_period;
    while period < need {
        period *= 2.0;
    }
    let points_for = |p: f64| (2.0 * p * 1.1 * outer).ceil().max(2.0) as usize;
    let mut wrapped = false;
    while points_for(period).next_power_of_two().pow(d as u32) > spec.max_points {
        if period <= spec.min_period {
            return usage(format!("sector scale {} needs more than {} grid points", atlas.sector(theta).n_theta, spec.max_points));
        }
        period /= 2.0;
        wrapped = true;
    }
    Ok(ScaleGrid { grid: TorusGrid::new(d, period, points_for(period).next_power_of_two())?, wrapped })
}

/// Unit-`L²` inputs for one sector: seeded random sector data followed by
/// wave packets at the sector center that sweep across the torus.
fn slope_inputs(symbol: &DispersionSymbol, atlas: &SectorAtlas, theta: usize, grid: TorusGrid, interval: [f64; 2], spec: &SlopeSpec, seed: u64) -> Vec<LatticeField> {
    let d = grid.dim;
    let unit = |f: LatticeField| {
        let n = f.l2_norm();
        if n > 0.0 {
            Some(f.scale(C64::new(1.0 / n, 0.0)))
        } else {
            None
        }
    };
    let mut out: Vec<LatticeField> = (0..spec.batch)
        .filter_map(|b| {
            let mut rng = rng_from_seed(sub_seed(seed, b as u64));
            let raw = LatticeField::from_frequency_fn(grid, |_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            unit(raw.apply_multiplier(|xi| C64::new(atlas.multiplier(theta, xi), 0.0)))
        })
        .collect();
    if spec.packets {
        let c = atlas.center(theta);
        let grad = symbol.gradient(&c);
        let length = interval[1] - interval[0];
        let mid = 0.5 * (interval[0] + interval[1]);
        let sweep = group_speed(symbol, &c) * length;
        let x0: Vec<f64> = (0..d).map(|a| 0.5 * grid.period + mid * grad[a] / (2.0 * std::f64::consts::PI)).collect();
        let pi = std::f64::consts::PI;
        let curvature = symbol.hessian(&c).norm();
        let spread = (curvature * length / (2.0 * pi * pi)).sqrt();
        let floor = 0.25 / (atlas.outer_radius(theta) - atlas.sector(theta).n_theta).max(1e-9);
        let ceiling = (grid.period / 4.0).min(sweep.max(spread));
        let mut widths = vec![floor.min(ceiling)];
        while let Some(&w) = widths.last().filter(|&&w| 2.0 * w <= ceiling) {
            widths.push(2.0 * w);
        }
        for w in widths {
            let packet = LatticeField::from_frequency_fn(grid, |xi| {
                let r2: f64 = xi.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
                let phase: f64 = xi.iter().zip(&x0).map(|(a, b)| a * b).sum();
                C64::from_polar(atlas.multiplier(theta, xi) * (-pi * pi * w * w * r2).exp(), -2.0 * pi * phase)
            });
            out.extend(unit(packet));
        }
    }
    out
}

/// Largest directional norm of `e^{itΛ}f` over all inputs and frames,
/// streaming time slices so that each phase table is computed once.
fn streamed_max(prop: &Propagator, inputs: &[LatticeField], times: &[f64], frames: &[DirectionalFrame], triple: ExponentTriple) -> Result<Option<f64>> {
    if frames.is_empty() {
        return Ok(None);
    }
    let spectra: Vec<LatticeField> = inputs.par_iter().map(|f| f.to_frequency()).collect();
    let mut accs: Vec<Vec<StreamingNorm>> = spectra
        .iter()
        .map(|f| frames.iter().map(|fr| StreamingNorm::new(f.grid, times, fr.clone(), triple)).collect())
        .collect::<Result<_>>()?;
    let mut buffers: Vec<LatticeField> = spectra.clone();
    for &t in times {
        let table = prop.phases(t);
        accs.par_iter_mut().zip(buffers.par_iter_mut()).zip(&spectra).try_for_each(|((acc, buf), fh)| {
            buf.register = Register::Frequency;
            for ((b, f), p) in buf.data.iter_mut().zip(&fh.data).zip(&table) {
                *b = f * p;
            }
            buf.make_space();
            acc.iter_mut().try_for_each(|a| a.push(buf))
        })?;
    }
    let mut best = 0.0f64;
    for a in accs.iter().flatten() {
        best = best.max(a.finish()?);
    }
    Ok(Some(best))
}

struct ScaleResult {
    main: f64,
    control: Option<f64>,
    axes: Vec<usize>,
    control_axes: Vec<usize>,
    period: f64,
    points: usize,
    samples: usize,
    wrapped: bool,
}

fn run_slope(config: &ExperimentConfig, kind: SlopeKind) -> Result<(SlopeReport, RunOutput)> {
    let mut out = RunOutput::new(config);
    let spec = &config.slope;
    let d = config.symbol.dim;
    if spec.n_values.len() < 4 {
        return usage(format!("slope fits need at least 4 scales, got {}", spec.n_values.len()));
    }
    if spec.time_samples < 2 {
        return usage("slope experiments need at least two time samples");
    }
    if spec.batch == 0 && !spec.packets {
        return usage("slope experiments need at least one input per scale");
    }
    let symbol = config.symbol.build()?;
    let n_top = spec.n_values.iter().copied().fold(0.0, f64::max);
    let atlas = build_atlas(d, config.atlas.eps_theta, n_top * (1.0 + 1e-9))?;
    if spec.direction >= atlas.directions.len() {
        return usage(format!("direction {} outside the {} sector directions", spec.direction, atlas.directions.len()));
    }
    if spec.j >= d {
        return usage(format!("axis {} outside dimension {d}", spec.j));
    }
    let base = (1.0 + atlas.eps()).ln();
    let thetas: Vec<usize> = spec
        .n_values
        .iter()
        .map(|&n| {
            let log2 = n.log2();
            if !(n >= 1.0 && (log2 - log2.round()).abs() < 1e-12) {
                return usage(format!("scale {n} is not dyadic"));
            }
            let k = (n.ln() / base).round();
            if k < 1.0 || ((k * base).exp() / n - 1.0).abs() > 1e-9 {
                return usage(format!("scale {n} is not a sector scale for eps_theta = {}", atlas.eps()));
            }
            atlas.index_of(k as u32, spec.direction).ok_or_else(|| Error::Usage(format!("scale {n} exceeds the atlas")))
        })
        .collect::<Result<_>>()?;
    let net = build_net(config)?;
    let intervals: Vec<[f64; 2]> = thetas
        .iter()
        .map(|&theta| match (spec.interval, kind) {
            (Some(i), _) => i,
            (None, SlopeKind::Maximal) => [-1.0, 1.0],
            (None, SlopeKind::Smoothing) => [0.0, 2.0 / group_speed(&symbol, &atlas.center(theta))],
        })
        .collect();
    if intervals.iter().any(|i| !(i[1] > i[0])) {
        return usage("slope interval must have positive length");
    }
    let triple = match kind {
        SlopeKind::Maximal => ExponentTriple::new(2.0, f64::INFINITY, spec.c_exp)?,
        SlopeKind::Smoothing => ExponentTriple::new(f64::INFINITY, 2.0, spec.c_exp)?,
    };
    let results: Vec<ScaleResult> = thetas
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            let interval = intervals[i];
            let sg = scale_grid(&symbol, &atlas, theta, interval[1] - interval[0], spec)?;
            let o = if atlas.sector(theta).n_theta < 2.0 * symbol.c_max { identity(d) } else { net.members[select_for_sector(&symbol, &atlas, &net, theta)?.member].clone() };
            let dominant = dominant_directions(&symbol, &atlas, theta, &o);
            let (axes, control_axes): (Vec<usize>, Vec<usize>) = match kind {
                SlopeKind::Maximal => (vec![spec.j], Vec::new()),
                SlopeKind::Smoothing => (dominant.clone(), (0..d).filter(|j| !dominant.contains(j)).collect()),
            };
            let samples = match kind {
                SlopeKind::Maximal => spec.time_samples,
                SlopeKind::Smoothing => spec.time_samples.max(resolving_samples(&symbol, &atlas, theta, interval[1] - interval[0])),
            };
            let times = uniform_times(interval[0], interval[1], samples - 1);
            let prop = Propagator::new(&symbol, sg.grid)?;
            let inputs = slope_inputs(&symbol, &atlas, theta, sg.grid, interval, spec, sub_seed(config.seed, i as u64));
            let frames = |js: &[usize]| js.iter().map(|&j| DirectionalFrame::new(o.clone(), j)).collect::<Result<Vec<_>>>();
            let main = streamed_max(&prop, &inputs, &times, &frames(&axes)?, triple)?;
            let control = streamed_max(&prop, &inputs, &times, &frames(&control_axes)?, triple)?;
            Ok(ScaleResult {
                main: main.unwrap_or(0.0),
                control,
                axes,
                control_axes,
                period: sg.grid.period,
                points: sg.grid.points,
                samples,
                wrapped: sg.wrapped,
            })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = spec.n_values.iter().map(|n| n.ln()).collect();
    let norms: Vec<f64> = results.iter().map(|r| r.main).collect();
    let fit = linear_fit(&xs, &norms.iter().map(|v| v.ln()).collect::<Vec<_>>()).ok_or_else(|| Error::Usage("degenerate scale set".into()))?;
    let control = if results.iter().all(|r| r.control.is_some()) {
        let cn: Vec<f64> = results.iter().map(|r| r.control.unwrap_or(0.0)).collect();
        linear_fit(&xs, &cn.iter().map(|v| v.ln()).collect::<Vec<_>>())
            .map(|f| SlopeArm { axes: results.iter().map(|r| r.control_axes.clone()).collect(), norms: cn, slope: f.slope, stderr: f.stderr })
    } else {
        None
    };
    let predicted = predicted_exponent(kind, d, symbol.sigma, spec.c_exp);
    let margin = predicted + spec.tolerance - fit.slope;
    let report = SlopeReport {
        kind,
        dim: d,
        sigma: symbol.sigma,
        c_exp: spec.c_exp,
        n_values: spec.n_values.clone(),
        norms: norms.clone(),
        slope: fit.slope,
        stderr: fit.stderr,
        predicted,
        tolerance: spec.tolerance,
        margin,
        verdict: margin >= 0.0,
        intervals,
        periods: results.iter().map(|r| r.period).collect(),
        points: results.iter().map(|r| r.points).collect(),
        time_samples: results.iter().map(|r| r.samples).collect(),
        wrapped: results.iter().map(|r| r.wrapped).collect(),
        control,
    };
    let rows: Vec<String> = spec
        .n_values
        .iter()
        .zip(&results)
        .map(|(n, r)| {
            let axes: Vec<String> = r.axes.iter().map(|a| a.to_string()).collect();
            let control = r.control.map_or_else(String::new, |c| c.to_string());
            format!("{n},{},{},{},{},{},{},{control}", r.main, axes.join(" "), r.period, r.points, r.samples, r.wrapped)
        })
        .collect();
    let name = match kind {
        SlopeKind::Maximal => "slope_maximal",
        SlopeKind::Smoothing => "slope_smoothing",
    };
    out.csv(&format!("{name}.csv"), "n,norm,axes,period,points,samples,wrapped,control_norm", &rows);
    out.verdict = Some(report.verdict);
    out.summary = serde_json::json!({ "slope": report.slope, "predicted": predicted, "margin": margin });
    out.json(&format!("{name}.json"), &report)?;
    Ok((report, out))
}

pub fn run_maximal_slope(config: &ExperimentConfig) -> Result<(SlopeReport, RunOutput)> {
    run_slope(config, SlopeKind::Maximal)
}

pub fn run_smoothing_slope(config: &ExperimentConfig) -> Result<(SlopeReport, RunOutput)> {
    run_slope(config, SlopeKind::Smoothing)
}
