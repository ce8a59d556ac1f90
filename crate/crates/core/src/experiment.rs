//! Configured ensemble runs, tomography over their output, and persistence.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartition::{
    crossed_bond_vector, enumerate_representatives, half_chain_mask, CrossedBondVector, RepresentativeSet,
};
use crate::entanglement::{entanglement_entropy, haar_sector_entropy_mc, mutual_information, page_entropy_bits};
use crate::error::{param, Error, Result};
use crate::evolution::{
    build_two_qubit_gate, diagonalize, eigenvalues, evolve_krylov, floquet_step, materialize_floquet_unitary,
    rqc_step, FloquetMap, SpectralDecomposition, TwoQubitGate, DEFAULT_DIAGONALIZATION_CAP, FLOQUET_T0,
    FLOQUET_T1,
};
use crate::operators::{
    build_floquet_parts, build_h_mf, build_h_nn, build_h_nnn, sample_disorder, CouplingParams,
    DisorderRealization, SparseHermitianOperator,
};
use crate::spectral_stats::{level_spacing_ratios, middle_third, reference_means, RatioStats, ReferenceMeans};
use crate::spin_basis::{
    check_chain_length, sample_random_product_state, sample_rng, Basis, SectorBasis,
    StateVector,
};
use crate::stats::MeanStderr;
use crate::tomography::{build_design_matrix, fit_bond_tensions, FitRecord, FitResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    NnThermal,
    NnnThermal,
    Mbl,
    MixedField,
    NnRandomProduct,
    Rqc,
    Floquet,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::NnThermal,
        Protocol::NnnThermal,
        Protocol::Mbl,
        Protocol::MixedField,
        Protocol::NnRandomProduct,
        Protocol::Rqc,
        Protocol::Floquet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::NnThermal => "nn_thermal",
            Protocol::NnnThermal => "nnn_thermal",
            Protocol::Mbl => "mbl",
            Protocol::MixedField => "mixed_field",
            Protocol::NnRandomProduct => "nn_random_product",
            Protocol::Rqc => "rqc",
            Protocol::Floquet => "floquet",
        }
    }

    pub fn is_hamiltonian(self) -> bool {
        !matches!(self, Protocol::Rqc | Protocol::Floquet)
    }

    /// Starts in the half-filling sector and stays there.
    pub fn is_sector_restricted(self) -> bool {
        !matches!(self, Protocol::MixedField | Protocol::NnRandomProduct)
    }

    /// Time points count gates or drive periods.
    pub fn has_integer_time(self) -> bool {
        matches!(self, Protocol::Rqc | Protocol::Floquet)
    }

    pub fn default_w(self) -> f64 {
        match self {
            Protocol::Mbl | Protocol::Floquet => 5.0,
            Protocol::Rqc => 0.0,
            _ => 0.5,
        }
    }

    pub fn default_times(self, len: usize) -> Vec<f64> {
        match self {
            Protocol::Mbl => vec![0.1, 10.0, 1e12],
            Protocol::Rqc => vec![5.0, 100.0, (2000 * len / 16) as f64],
            Protocol::Floquet => vec![1.0, 3.0, 100.0],
            _ => vec![0.1, 2.0, 1000.0],
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown protocol '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorKind {
    /// Spectral in general; Krylov for full-space mixed-field runs above 2048 states.
    Auto,
    Spectral,
    Krylov,
}

impl FromStr for PropagatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "spectral" => Ok(Self::Spectral),
            "krylov" => Ok(Self::Krylov),
            _ => param(format!("unknown propagator '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    #[serde(rename = "L")]
    pub len: usize,
    pub n0_list: Vec<usize>,
    /// Evolution times, gate counts or period counts, ascending.
    pub times: Vec<f64>,
    pub n_samples: usize,
    pub master_seed: u64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "W_g")]
    pub w_g: f64,
    #[serde(rename = "Jz")]
    pub jz: f64,
    pub gamma: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    pub out_dir: PathBuf,
    pub propagator: PropagatorKind,
    pub krylov_tol: f64,
    pub diag_cap: usize,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `protocol` at chain length `len`.
    pub fn new(protocol: Protocol, len: usize) -> Self {
        let c = CouplingParams::default();
        Self {
            protocol,
            len,
            n0_list: vec![len / 2],
            times: protocol.default_times(len),
            n_samples: 200,
            master_seed: 1,
            w: protocol.default_w(),
            w_g: c.w_g,
            jz: c.jz,
            gamma: c.gamma,
            t0: FLOQUET_T0,
            t1: FLOQUET_T1,
            out_dir: PathBuf::from("out"),
            propagator: PropagatorKind::Auto,
            krylov_tol: 1e-10,
            diag_cap: DEFAULT_DIAGONALIZATION_CAP,
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. `protocol` is
    /// required and selects the defaults the other keys override.
    ///
    /// `time_grid = a b n` appends `n` geometrically spaced points on `[a, b]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let protocol = pairs
            .iter()
            .find(|(_, k, _)| k == "protocol")
            .ok_or_else(|| Error::Config { line: 0, msg: "missing 'protocol'".into() })
            .and_then(|(line, _, v)| {
                v.parse::<Protocol>().map_err(|e| Error::Config { line: *line, msg: e.to_string() })
            })?;
        let len = match pairs.iter().find(|(_, k, _)| k == "L") {
            Some((line, _, v)) => parse_value(*line, "L", v)?,
            None => 12,
        };
        let mut cfg = Self::new(protocol, len);
        let mut times_set = false;
        let mut grid = Vec::new();
        for (line, key, value) in &pairs {
            let (line, v) = (*line, value.as_str());
            match key.as_str() {
                "protocol" | "L" => {}
                "n0_list" => cfg.n0_list = parse_list(line, key, v)?,
                "times" => {
                    cfg.times = parse_list(line, key, v)?;
                    times_set = true;
                }
                "time_grid" => grid.extend(parse_grid(line, v)?),
                "n_samples" => cfg.n_samples = parse_value(line, key, v)?,
                "master_seed" => cfg.master_seed = parse_value(line, key, v)?,
                "W" => cfg.w = parse_value(line, key, v)?,
                "W_g" => cfg.w_g = parse_value(line, key, v)?,
                "Jz" => cfg.jz = parse_value(line, key, v)?,
                "gamma" => cfg.gamma = parse_value(line, key, v)?,
                "T0" => cfg.t0 = parse_value(line, key, v)?,
                "T1" => cfg.t1 = parse_value(line, key, v)?,
                "out_dir" => cfg.out_dir = PathBuf::from(v),
                "propagator" => cfg.propagator = parse_value(line, key, v)?,
                "krylov_tol" => cfg.krylov_tol = parse_value(line, key, v)?,
                "diag_cap" => cfg.diag_cap = parse_value(line, key, v)?,
                _ => return Err(Error::Config { line, msg: format!("unknown key '{key}'") }),
            }
        }
        if !grid.is_empty() {
            if !times_set {
                cfg.times.clear();
            }
            cfg.times.extend(grid);
        }
        cfg.normalize_times();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Sorts and deduplicates the time points; integer protocols round.
    pub fn normalize_times(&mut self) {
        if self.protocol.has_integer_time() {
            for t in &mut self.times {
                *t = t.round();
            }
        }
        self.times.sort_by(f64::total_cmp);
        self.times.dedup();
    }

    pub fn validate(&self) -> Result<()> {
        check_chain_length(self.len)?;
        if self.len < 4 || (self.protocol == Protocol::NnnThermal && self.len < 6) {
            return param(format!("protocol {} needs a longer chain than L = {}", self.protocol, self.len));
        }
        if self.n0_list.is_empty() {
            return param("n0_list is empty");
        }
        if let Some(&bad) = self.n0_list.iter().find(|&&n| n < 1 || n > self.len / 2) {
            return param(format!("n0 = {bad} outside 1..={}", self.len / 2));
        }
        if self.times.is_empty() {
            return param("no time points");
        }
        if self.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return param("time points must be finite and nonnegative");
        }
        if self.n_samples < 2 {
            return param(format!("need at least 2 samples for standard errors, got {}", self.n_samples));
        }
        for (name, v) in [("W", self.w), ("W_g", self.w_g)] {
            if !(v >= 0.0) {
                return param(format!("{name} must be >= 0, got {v}"));
            }
        }
        for (name, v) in [("Jz", self.jz), ("gamma", self.gamma), ("T0", self.t0), ("T1", self.t1)] {
            if !v.is_finite() {
                return param(format!("{name} must be finite"));
            }
        }
        if !(self.krylov_tol > 0.0) {
            return param("krylov_tol must be positive");
        }
        Ok(())
    }

    pub fn coupling(&self) -> CouplingParams {
        CouplingParams { jz: self.jz, gamma: self.gamma, w: self.w, w_g: self.w_g }
    }

    /// Text form accepted by [`ExperimentConfig::parse`].
    pub fn to_config_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let n0 = self.n0_list.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let prop = match self.propagator {
            PropagatorKind::Auto => "auto",
            PropagatorKind::Spectral => "spectral",
            PropagatorKind::Krylov => "krylov",
        };
        format!(
            "protocol = {}\nL = {}\nn0_list = {n0}\ntimes = {}\nn_samples = {}\nmaster_seed = {}\n\
             W = {}\nW_g = {}\nJz = {}\ngamma = {}\nT0 = {}\nT1 = {}\nout_dir = {}\npropagator = {prop}\n\
             krylov_tol = {}\ndiag_cap = {}\n",
            self.protocol,
            self.len,
            join(&self.times),
            self.n_samples,
            self.master_seed,
            self.w,
            self.w_g,
            self.jz,
            self.gamma,
            self.t0,
            self.t1,
            self.out_dir.display(),
            self.krylov_tol,
            self.diag_cap,
        )
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::Config { line, msg: format!("bad value '{v}' for '{key}': {e}") })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_value(line, key, s)).collect()
}

fn parse_grid(line: usize, v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    let bad = || Error::Config { line, msg: format!("time_grid expects 'start stop count' with 0 < start < stop, got '{v}'") };
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parse_value(line, "time_grid", parts[0])?;
    let b: f64 = parse_value(line, "time_grid", parts[1])?;
    let n: usize = parse_value(line, "time_grid", parts[2])?;
    if !(a > 0.0 && b > a && n >= 2) {
        return Err(bad());
    }
    let ratio = (b / a).ln() / (n - 1) as f64;
    Ok((0..n).map(|k| if k == n - 1 { b } else { a * (ratio * k as f64).exp() }).collect())
}

/// Ensemble-averaged entropy of one representative at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    pub time: f64,
    pub rep_id: usize,
    pub mask: u32,
    pub geometry: CrossedBondVector,
    pub mean_s: f64,
    pub stderr: f64,
}

impl ResultRecord {
    pub fn n0(&self) -> usize {
        self.mask.count_ones() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoRecord {
    pub time: f64,
    pub j: usize,
    pub mean_i: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfChainRecord {
    pub time: f64,
    pub mean_s: f64,
    pub stderr: f64,
}

/// Worst per-sample deviations seen during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationAudit {
    /// `max |‖ψ(t)‖² − 1|`.
    pub max_norm_drift: f64,
    /// `max |E(t) − E(0)| / ‖H‖`; Hamiltonian protocols only.
    pub max_energy_drift_rel: Option<f64>,
    /// Largest weight outside the initial magnetization sector.
    pub max_sector_leakage: Option<f64>,
}

impl ConservationAudit {
    fn merge(&mut self, other: &ConservationAudit) {
        let max_opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) => x,
            (None, y) => y,
        };
        self.max_norm_drift = self.max_norm_drift.max(other.max_norm_drift);
        self.max_energy_drift_rel = max_opt(self.max_energy_drift_rel, other.max_energy_drift_rel);
        self.max_sector_leakage = max_opt(self.max_sector_leakage, other.max_sector_leakage);
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    /// One entry per `n0_list` element, time-major within.
    pub records: Vec<(usize, Vec<ResultRecord>)>,
    pub mutual_info: Vec<MutualInfoRecord>,
    pub half_chain: Vec<HalfChainRecord>,
    pub audit: ConservationAudit,
    pub elapsed_seconds: f64,
}

impl RunOutput {
    pub fn records_for(&self, n0: usize) -> Option<&[ResultRecord]> {
        self.records.iter().find(|(n, _)| *n == n0).map(|(_, r)| r.as_slice())
    }
}

/// Read-only state shared by every sample of a run.
struct RunContext {
    config: ExperimentConfig,
    sets: Vec<RepresentativeSet>,
    sector: Arc<SectorBasis>,
    full: Basis,
    gate: TwoQubitGate,
    floquet_h1: Option<Arc<SpectralDecomposition>>,
}

impl RunContext {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let sets = config
            .n0_list
            .iter()
            .map(|&n0| enumerate_representatives(config.len, n0))
            .collect::<Result<Vec<_>>>()?;
        let sector = Arc::new(SectorBasis::half_filling(config.len)?);
        let full = Basis::full(config.len)?;
        let floquet_h1 = if config.protocol == Protocol::Floquet {
            let basis = Basis::Sector(sector.clone());
            let (_, h1) = build_floquet_parts(&DisorderRealization::clean(config.len), &basis)?;
            Some(Arc::new(diagonalize(&h1, config.diag_cap)?))
        } else {
            None
        };
        Ok(Self { config: config.clone(), sets, sector, full, gate: build_two_qubit_gate(), floquet_h1 })
    }

    /// Values recorded per time point: every representative of every slice,
    /// then `I_1..I_{L/2}`, then the half-chain entropy.
    fn values_per_time(&self) -> usize {
        self.sets.iter().map(|s| s.count()).sum::<usize>() + self.config.len / 2 + 1
    }

    fn measure(&self, psi: &StateVector, out: &mut [f64]) -> Result<()> {
        let mut k = 0;
        for set in &self.sets {
            for b in set.reps() {
                out[k] = entanglement_entropy(psi, b.mask)?;
                k += 1;
            }
        }
        for j in 1..=self.config.len / 2 {
            out[k] = mutual_information(psi, j)?;
            k += 1;
        }
        out[k] = entanglement_entropy(psi, half_chain_mask(self.config.len))?;
        Ok(())
    }

    fn hamiltonian(&self, disorder: &DisorderRealization, basis: &Basis) -> Result<SparseHermitianOperator> {
        let c = self.config.coupling();
        match self.config.protocol {
            Protocol::NnnThermal => build_h_nnn(&c, disorder, basis),
            Protocol::MixedField => build_h_mf(&c, disorder, basis),
            _ => build_h_nn(&c, disorder, basis),
        }
    }

    fn use_krylov(&self, dim: usize) -> bool {
        match self.config.propagator {
            PropagatorKind::Spectral => false,
            PropagatorKind::Krylov => true,
            PropagatorKind::Auto => self.config.protocol == Protocol::MixedField && dim > 2048,
        }
    }

    /// Fills `out` (`times × values_per_time`, time-major) for sample `index`.
    fn run_sample(&self, index: usize, out: &mut [f64]) -> Result<ConservationAudit> {
        let cfg = &self.config;
        let mut rng = sample_rng(cfg.master_seed, index as u64);
        let w_g = (cfg.protocol == Protocol::MixedField).then_some(cfg.w_g);
        let disorder = if cfg.protocol == Protocol::Rqc {
            DisorderRealization::clean(cfg.len)
        } else {
            sample_disorder(cfg.w, w_g, cfg.len, &mut rng)?
        };
        let psi0 = if cfg.protocol.is_sector_restricted() {
            self.sector.sample_basis_state(&mut rng)
        } else {
            sample_random_product_state(cfg.len, &mut rng)?
        };

        let mut states = Vec::with_capacity(cfg.times.len());
        let mut audit = ConservationAudit::default();
        match cfg.protocol {
            Protocol::Rqc | Protocol::Floquet => {
                let map = match &self.floquet_h1 {
                    Some(h1) => {
                        let (h0, _) = build_floquet_parts(&disorder, psi0.basis())?;
                        Some(FloquetMap::new(&h0, h1.clone(), cfg.t0, cfg.t1)?)
                    }
                    None => None,
                };
                let mut psi = psi0.clone();
                let mut done = 0u64;
                for &t in &cfg.times {
                    let target = t as u64;
                    while done < target {
                        match &map {
                            Some(m) => floquet_step(&mut psi, m)?,
                            None => {
                                rqc_step(&mut psi, &self.gate, &mut rng)?;
                            }
                        }
                        done += 1;
                    }
                    states.push(psi.clone());
                }
            }
            Protocol::NnRandomProduct => {
                // H_NN conserves magnetization: evolve each sector block separately
                let blocks = (0..=cfg.len)
                    .map(|n_up| {
                        let sector = Arc::new(SectorBasis::new(cfg.len, n_up)?);
                        let h = self.hamiltonian(&disorder, &Basis::Sector(sector.clone()))?;
                        let d = diagonalize(&h, cfg.diag_cap)?;
                        let part = psi0.project(&sector)?;
                        let coeffs = d.coefficients(&part)?;
                        Ok((d, coeffs))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let h_full = self.hamiltonian(&disorder, &self.full)?;
                let norm = blocks.iter().map(|(d, _)| d.spectral_norm()).fold(0.0, f64::max);
                for &t in &cfg.times {
                    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); self.full.dim()];
                    for (d, c) in &blocks {
                        let part = d.synthesize(&d.advance(c, t));
                        for (a, m) in part.amplitudes().iter().zip(sector_states(part.basis())) {
                            amps[m as usize] = *a;
                        }
                    }
                    states.push(StateVector::new(self.full.clone(), amps)?);
                }
                audit.max_energy_drift_rel = Some(energy_drift(&h_full, &psi0, &states, norm));
            }
            _ => {
                let basis = psi0.basis().clone();
                let h = self.hamiltonian(&disorder, &basis)?;
                if self.use_krylov(basis.dim()) {
                    let mut psi = psi0.clone();
                    let mut now = 0.0;
                    for &t in &cfg.times {
                        if t > now {
                            psi = evolve_krylov(&h, &psi, t - now, cfg.krylov_tol)?;
                            now = t;
                        }
                        states.push(psi.clone());
                    }
                    // Gershgorin bound stands in for ‖H‖ without a decomposition
                    let norm = h.gershgorin_bound();
                    audit.max_energy_drift_rel = Some(energy_drift(&h, &psi0, &states, norm));
                } else {
                    let d = diagonalize(&h, cfg.diag_cap)?;
                    let c = d.coefficients(&psi0)?;
                    for &t in &cfg.times {
                        states.push(d.synthesize(&d.advance(&c, t)));
                    }
                    audit.max_energy_drift_rel = Some(energy_drift(&h, &psi0, &states, d.spectral_norm()));
                }
            }
        }

        audit.max_norm_drift = states.iter().map(|s| (s.norm_sqr() - 1.0).abs()).fold(0.0, f64::max);
        if cfg.protocol.is_sector_restricted() {
            let n_up = cfg.len / 2;
            let leak = states.iter().map(|s| s.embed().weight_outside_sector(n_up)).fold(0.0, f64::max);
            audit.max_sector_leakage = Some(leak);
        }

        let stride = self.values_per_time();
        for (psi, chunk) in states.iter().zip(out.chunks_mut(stride)) {
            self.measure(psi, chunk)?;
        }
        Ok(audit)
    }
}

fn sector_states(basis: &Basis) -> Vec<u32> {
    (0..basis.dim()).map(|i| basis.mask(i)).collect()
}

fn energy_drift(h: &SparseHermitianOperator, psi0: &StateVector, states: &[StateVector], norm: f64) -> f64 {
    let e0 = h.expectation(psi0.amplitudes());
    let scale = if norm > 0.0 { norm } else { 1.0 };
    states
        .iter()
        .map(|s| (h.expectation(s.amplitudes()) - e0).abs() / scale)
        .fold(0.0, f64::max)
}

/// Runs every sample of `config` in parallel and averages in sample order,
/// so the output does not depend on the thread count.
pub fn run_protocol(config: &ExperimentConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let ctx = RunContext::new(config)?;
    // one upfront buffer; per-sample allocations interleaved with the large
    // eigenvector matrices fragment the heap over long runs
    let per_time = ctx.values_per_time();
    let stride = config.times.len() * per_time;
    let mut values = vec![0.0; config.n_samples * stride];
    let mut audits = vec![ConservationAudit::default(); config.n_samples];
    values
        .par_chunks_mut(stride)
        .zip(audits.par_iter_mut())
        .enumerate()
        .try_for_each(|(i, (chunk, audit))| -> Result<()> {
            *audit = ctx.run_sample(i, chunk)?;
            Ok(())
        })?;

    let mut audit = ConservationAudit::default();
    for a in &audits {
        audit.merge(a);
    }
    let mut column = Vec::with_capacity(config.n_samples);
    let mut stats = |offset: usize| -> MeanStderr {
        column.clear();
        column.extend(values.chunks(stride).map(|c| c[offset]));
        MeanStderr::from_samples(&column)
    };

    let mut records = Vec::with_capacity(ctx.sets.len());
    let mut slot_offset = 0;
    for set in &ctx.sets {
        let mut recs = Vec::with_capacity(config.times.len() * set.count());
        for (ti, &t) in config.times.iter().enumerate() {
            for (ri, (b, g)) in set.iter().enumerate() {
                let m = stats(ti * per_time + slot_offset + ri);
                recs.push(ResultRecord {
                    time: t,
                    rep_id: ri,
                    mask: b.mask,
                    geometry: g.clone(),
                    mean_s: m.mean,
                    stderr: m.stderr,
                });
            }
        }
        slot_offset += set.count();
        records.push((set.n0, recs));
    }
    let half = config.len / 2;
    let mut mutual_info = Vec::new();
    let mut half_chain = Vec::new();
    for (ti, &t) in config.times.iter().enumerate() {
        let base = ti * per_time + slot_offset;
        for j in 1..=half {
            let m = stats(base + j - 1);
            mutual_info.push(MutualInfoRecord { time: t, j, mean_i: m.mean, stderr: m.stderr });
        }
        let m = stats(base + half);
        half_chain.push(HalfChainRecord { time: t, mean_s: m.mean, stderr: m.stderr });
    }
    Ok(RunOutput {
        config: config.clone(),
        records,
        mutual_info,
        half_chain,
        audit,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Fit of one `(time, n₀)` slice.
#[derive(Clone, Debug)]
pub struct FitSlice {
    pub n0: usize,
    pub time: f64,
    pub fit: FitResult,
    pub record: FitRecord,
}

/// Fits every `(time, n₀)` slice present in `records`. Each slice must hold
/// exactly the representatives of its `(L, n₀)` set.
pub fn run_tomography(len: usize, protocol: Protocol, records: &[ResultRecord]) -> Result<Vec<FitSlice>> {
    let mut slices: BTreeMap<(usize, u64), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        slices.entry((r.n0(), r.time.to_bits())).or_default().push(r);
    }
    let mut sets: BTreeMap<usize, RepresentativeSet> = BTreeMap::new();
    let mut out = Vec::with_capacity(slices.len());
    for ((n0, tbits), mut rows) in slices {
        let time = f64::from_bits(tbits);
        let set = match sets.get(&n0) {
            Some(s) => s,
            None => {
                let s = enumerate_representatives(len, n0)?;
                sets.entry(n0).or_insert(s)
            }
        };
        rows.sort_by_key(|r| r.rep_id);
        let complete = rows.len() == set.count()
            && rows.iter().zip(set.reps()).enumerate().all(|(i, (r, b))| r.rep_id == i && r.mask == b.mask);
        if !complete {
            return Err(Error::Data {
                path: String::new(),
                msg: format!("slice n0 = {n0}, time = {time} does not hold exactly the {} representatives", set.count()),
            });
        }
        let x = build_design_matrix(set)?;
        let y: Vec<f64> = rows.iter().map(|r| r.mean_s).collect();
        let fit = fit_bond_tensions(&x, &y)?;
        let record = FitRecord::new(len, n0, protocol.name(), time, &fit);
        out.push(FitSlice { n0, time, fit, record });
    }
    // slices are keyed by time bits, which orders nonnegative times correctly
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SpectralOutput {
    pub protocol: Protocol,
    pub len: usize,
    pub per_realization: Vec<RatioStats>,
    pub aggregate: RatioStats,
    /// Mean and standard error of the per-realization means.
    pub mean_r: MeanStderr,
    pub references: ReferenceMeans,
}

/// Level statistics per disorder realization. Hamiltonians use the middle
/// third of the half-filling spectrum (full space for the mixed-field model);
/// the Floquet operator uses all quasienergies.
pub fn run_spectral_diagnostics(config: &ExperimentConfig) -> Result<SpectralOutput> {
    config.validate()?;
    let protocol = config.protocol;
    if protocol == Protocol::Rqc {
        return param("level statistics need a Hamiltonian or Floquet protocol");
    }
    let len = config.len;
    let sector = Basis::Sector(Arc::new(SectorBasis::half_filling(len)?));
    let basis = if protocol == Protocol::MixedField { Basis::full(len)? } else { sector };
    let h1 = if protocol == Protocol::Floquet {
        let (_, h1) = build_floquet_parts(&DisorderRealization::clean(len), &basis)?;
        Some(Arc::new(diagonalize(&h1, config.diag_cap)?))
    } else {
        None
    };
    let coupling = config.coupling();
    let per_realization = (0..config.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(config.master_seed, i as u64);
            let w_g = (protocol == Protocol::MixedField).then_some(config.w_g);
            let disorder = sample_disorder(config.w, w_g, len, &mut rng)?;
            match &h1 {
                Some(h1) => {
                    let (h0, _) = build_floquet_parts(&disorder, &basis)?;
                    let map = FloquetMap::new(&h0, h1.clone(), config.t0, config.t1)?;
                    let spec = materialize_floquet_unitary(&map, config.diag_cap)?;
                    level_spacing_ratios(&spec.quasienergies)
                }
                None => {
                    let h = match protocol {
                        Protocol::NnnThermal => build_h_nnn(&coupling, &disorder, &basis)?,
                        Protocol::MixedField => build_h_mf(&coupling, &disorder, &basis)?,
                        _ => build_h_nn(&coupling, &disorder, &basis)?,
                    };
                    let mut e = eigenvalues(&h, config.diag_cap)?;
                    e.sort_by(f64::total_cmp);
                    level_spacing_ratios(middle_third(&e))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = RatioStats::pooled(&per_realization);
    let means: Vec<f64> = per_realization.iter().map(|r| r.mean_r).collect();
    Ok(SpectralOutput {
        protocol,
        len,
        mean_r: MeanStderr::from_samples(&means),
        per_realization,
        aggregate,
        references: reference_means(),
    })
}

/// Haar reference entropy for one `(L, n₀)` slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarReference {
    #[serde(rename = "L")]
    pub len: usize,
    pub n0: usize,
    /// Sector-restricted Monte Carlo mean and standard error.
    pub sector_mean: f64,
    pub sector_stderr: f64,
    pub n_samples: usize,
    /// Full-space Page value.
    pub page: f64,
}

/// Every mask with `n₀` sites has the same sector-Haar distribution, so one
/// contiguous cut per slice suffices.
pub fn haar_references(len: usize, n0_list: &[usize], n_samples: usize, seed: u64) -> Result<Vec<HaarReference>> {
    check_chain_length(len)?;
    n0_list
        .iter()
        .enumerate()
        .map(|(i, &n0)| {
            if n0 < 1 || n0 > len / 2 {
                return param(format!("n0 = {n0} outside 1..={}", len / 2));
            }
            let mut rng = sample_rng(seed, i as u64);
            let mask = (1u32 << n0) - 1;
            let mc = haar_sector_entropy_mc(len, Some(len / 2), mask, n_samples, &mut rng)?;
            Ok(HaarReference {
                len,
                n0,
                sector_mean: mc.mean,
                sector_stderr: mc.stderr,
                n_samples,
                page: page_entropy_bits(1 << n0, 1 << (len - n0)),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub rng: String,
    /// Stream index of each sample under `master_seed`.
    pub sample_streams: Vec<u64>,
    pub audit: ConservationAudit,
    pub started_unix_seconds: u64,
    pub elapsed_seconds: f64,
    pub files: Vec<String>,
}

fn data_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Data { path: path.display().to_string(), msg: msg.into() }
}

pub fn entropy_csv_name(protocol: Protocol, n0: usize) -> String {
    format!("entropies_{protocol}_n0_{n0}.csv")
}

pub fn write_entropy_csv(path: &Path, len: usize, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string(), "rep_id".into(), "mask".into()];
    header.extend((1..=len / 2).map(|j| format!("n{j}")));
    header.extend(["mean_S".to_string(), "stderr".into()]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.time.to_string(), r.rep_id.to_string(), r.mask.to_string()];
        row.extend(r.geometry.0.iter().map(|n| n.to_string()));
        row.extend([r.mean_s.to_string(), r.stderr.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an entropy CSV; returns the chain length and the records.
pub fn read_entropy_csv(path: &Path) -> Result<(usize, Vec<ResultRecord>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let n_cols = header.iter().filter(|h| h.starts_with('n') && h[1..].parse::<usize>().is_ok()).count();
    let expected_len = 5 + n_cols;
    if n_cols == 0
        || header.len() != expected_len
        || header[..3] != ["time", "rep_id", "mask"]
        || header[3 + n_cols] != "mean_S"
        || header[4 + n_cols] != "stderr"
    {
        return Err(data_err(path, format!("unexpected header {header:?}")));
    }
    let len = 2 * n_cols;
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |i: usize| -> Result<&str> {
            row.get(i).ok_or_else(|| data_err(path, format!("row {} is short", line + 2)))
        };
        let num = |i: usize| -> Result<f64> {
            let s = field(i)?;
            s.parse::<f64>().map_err(|_| data_err(path, format!("row {}, column '{}': bad number '{s}'", line + 2, header[i])))
        };
        let int = |i: usize| -> Result<u64> {
            let s = field(i)?;
            s.parse::<u64>().map_err(|_| data_err(path, format!("row {}, column '{}': bad integer '{s}'", line + 2, header[i])))
        };
        let mask = int(2)? as u32;
        let geometry = CrossedBondVector((0..n_cols).map(|j| int(3 + j).map(|v| v as u32)).collect::<Result<_>>()?);
        if geometry != crossed_bond_vector(mask, len) {
            return Err(data_err(path, format!("row {}: geometry does not match mask {mask}", line + 2)));
        }
        out.push(ResultRecord {
            time: num(0)?,
            rep_id: int(1)? as usize,
            mask,
            geometry,
            mean_s: num(3 + n_cols)?,
            stderr: num(4 + n_cols)?,
        });
    }
    Ok((len, out))
}

fn write_rows<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-`n₀` entropy CSVs, mutual information, half-chain entropy
/// and the manifest into `dir`; returns the written paths.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let p = out.config.protocol;
    let mut files = Vec::new();
    for (n0, recs) in &out.records {
        let path = dir.join(entropy_csv_name(p, *n0));
        write_entropy_csv(&path, out.config.len, recs)?;
        files.push(path);
    }
    let mi = dir.join(format!("mutual_info_{p}.csv"));
    write_rows(&mi, &out.mutual_info)?;
    files.push(mi);
    let hc = dir.join(format!("hcee_{p}.csv"));
    write_rows(&hc, &out.half_chain)?;
    files.push(hc);

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
        .saturating_sub(out.elapsed_seconds as u64);
    let manifest = RunManifest {
        config: out.config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng: "ChaCha8: seed_from_u64(master_seed), stream = sample index".into(),
        sample_streams: (0..out.config.n_samples as u64).collect(),
        audit: out.audit,
        started_unix_seconds: started,
        elapsed_seconds: out.elapsed_seconds,
        files: files.iter().filter_map(|f| f.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
    };
    let path = dir.join(format!("manifest_{p}.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    files.push(path);
    Ok(files)
}

pub fn write_fits(path: &Path, fits: &[FitSlice]) -> Result<()> {
    let records: Vec<&FitRecord> = fits.iter().map(|f| &f.record).collect();
    fs::write(path, serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

#[derive(Serialize)]
struct RealizationRow {
    seed: u64,
    mean_r: f64,
    dropped_degenerate: usize,
}

#[derive(Serialize)]
struct SpectralAggregate<'a> {
    protocol: Protocol,
    #[serde(rename = "L")]
    len: usize,
    n_realizations: usize,
    mean_r: f64,
    stderr: f64,
    pooled_mean_r: f64,
    dropped_degenerate: usize,
    references: ReferenceMeans,
    histogram: &'a crate::spectral_stats::Histogram,
}

/// `spectral_<protocol>.csv` (one row per realization) and
/// `spectral_<protocol>.json` (aggregate with histogram).
pub fn write_spectral(dir: &Path, out: &SpectralOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("spectral_{}.csv", out.protocol));
    let rows: Vec<RealizationRow> = out
        .per_realization
        .iter()
        .enumerate()
        .map(|(i, r)| RealizationRow { seed: i as u64, mean_r: r.mean_r, dropped_degenerate: r.dropped_degenerate })
        .collect();
    write_rows(&csv_path, &rows)?;
    let agg = SpectralAggregate {
        protocol: out.protocol,
        len: out.len,
        n_realizations: out.per_realization.len(),
        mean_r: out.mean_r.mean,
        stderr: out.mean_r.stderr,
        pooled_mean_r: out.aggregate.mean_r,
        dropped_degenerate: out.aggregate.dropped_degenerate,
        references: out.references,
        histogram: &out.aggregate.histogram,
    };
    let json_path = dir.join(format!("spectral_{}.json", out.protocol));
    fs::write(&json_path, serde_json::to_string_pretty(&agg)?)?;
    Ok(vec![csv_path, json_path])
}

pub fn write_haar(path: &Path, refs: &[HaarReference]) -> Result<()> {
    write_rows(path, refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(protocol: Protocol) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(protocol, 6);
        c.n0_list = vec![2, 3];
        c.n_samples = 6;
        c.master_seed = 9;
        if !protocol.has_integer_time() {
            c.times = vec![0.0, 0.5, 20.0];
        } else {
            c.times = vec![0.0, 3.0, 12.0];
        }
        c
    }

    #[test]
    fn parse_config_text() {
        let text = "# thermal run\nprotocol = nn_thermal\nL = 8\nn0_list = 3, 4\ntimes = 1000, 0.1, 2\n\
                    n_samples = 10  # small\nmaster_seed = 5\nW = 0.7\nout_dir = /tmp/x\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.protocol, Protocol::NnThermal);
        assert_eq!((c.len, c.n_samples, c.master_seed), (8, 10, 5));
        assert_eq!(c.n0_list, vec![3, 4]);
        assert_eq!(c.times, vec![0.1, 2.0, 1000.0]);
        assert_eq!(c.w, 0.7);
        assert_eq!(ExperimentConfig::parse(&c.to_config_text()).unwrap(), c);
    }

    #[test]
    fn protocol_defaults() {
        let m = ExperimentConfig::parse("protocol = mbl").unwrap();
        assert_eq!((m.len, m.w), (12, 5.0));
        assert_eq!(m.times, vec![0.1, 10.0, 1e12]);
        let f = ExperimentConfig::parse("protocol = floquet").unwrap();
        assert_eq!((f.w, f.t0, f.t1), (5.0, 1.0, 2.5));
        let r = ExperimentConfig::parse("protocol = rqc\nL = 16").unwrap();
        assert_eq!(r.times, vec![5.0, 100.0, 2000.0]);
        let g = ExperimentConfig::parse("protocol = nn_thermal\ntime_grid = 0.1 1000 5").unwrap();
        assert_eq!(g.times.len(), 5);
        assert!((g.times[2] - 10.0).abs() < 1e-9 && g.times[4] == 1000.0);
    }

    #[test]
    fn config_errors_name_the_line() {
        for (text, line) in [
            ("protocol = nn_thermal\nbogus = 1", 2),
            ("protocol = nn_thermal\nL 12", 2),
            ("protocol = nn_thermal\n\nn_samples = ten", 3),
        ] {
            match ExperimentConfig::parse(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(ExperimentConfig::parse("L = 12").is_err());
        assert!(ExperimentConfig::parse("protocol = heisenberg").is_err());
        assert!(ExperimentConfig::parse("protocol = nn_thermal\nL = 11").is_err());
        assert!(ExperimentConfig::parse("protocol = nn_thermal\nn0_list = 7").is_err());
        assert!(ExperimentConfig::parse("protocol = nn_thermal\ntimes = -1").is_err());
    }

    #[test]
    fn every_protocol_runs_and_conserves() {
        for p in Protocol::ALL {
            let out = run_protocol(&small(p)).unwrap();
            assert_eq!(out.records.len(), 2);
            let n_reps = enumerate_representatives(6, 3).unwrap().count();
            assert_eq!(out.records_for(3).unwrap().len(), 3 * n_reps);
            assert!(out.audit.max_norm_drift < 1e-10, "{p}: {:?}", out.audit);
            if p.is_hamiltonian() {
                assert!(out.audit.max_energy_drift_rel.unwrap() < 1e-8, "{p}");
            }
            if p.is_sector_restricted() {
                assert_eq!(out.audit.max_sector_leakage, Some(0.0), "{p}");
            }
            // computational basis states and product states start unentangled
            let first = &out.half_chain[0];
            assert_eq!(first.time, 0.0);
            assert!(first.mean_s.abs() < 1e-9, "{p}");
            assert!(out.half_chain[2].mean_s > 0.1, "{p}");
            for r in out.records_for(3).unwrap() {
                assert!(r.stderr >= 0.0 && r.mean_s >= -1e-12 && r.mean_s <= 3.0 + 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_under_thread_count() {
        let cfg = small(Protocol::Rqc);
        let a = run_protocol(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_protocol(&cfg).unwrap());
        assert_eq!(a.records, b.records);
        assert_eq!(a.mutual_info, b.mutual_info);
        assert_eq!(a.half_chain, b.half_chain);
    }

    #[test]
    fn krylov_and_spectral_runs_agree() {
        let mut cfg = small(Protocol::MixedField);
        cfg.propagator = PropagatorKind::Spectral;
        let a = run_protocol(&cfg).unwrap();
        cfg.propagator = PropagatorKind::Krylov;
        let b = run_protocol(&cfg).unwrap();
        for (x, y) in a.half_chain.iter().zip(&b.half_chain) {
            assert!((x.mean_s - y.mean_s).abs() < 1e-7);
        }
    }

    #[test]
    fn block_evolution_matches_full_space() {
        // random-product runs evolve per sector; compare with a full-space Krylov run
        let cfg = small(Protocol::NnRandomProduct);
        let a = run_protocol(&cfg).unwrap();
        let ctx = RunContext::new(&cfg).unwrap();
        let mut rng = sample_rng(cfg.master_seed, 0);
        let disorder = sample_disorder(cfg.w, None, 6, &mut rng).unwrap();
        let psi0 = sample_random_product_state(6, &mut rng).unwrap();
        let h = ctx.hamiltonian(&disorder, &ctx.full).unwrap();
        let psi = evolve_krylov(&h, &psi0, 20.0, 1e-12).unwrap();
        let s = entanglement_entropy(&psi, half_chain_mask(6)).unwrap();
        let per_time = ctx.values_per_time();
        let mut one = vec![0.0; 3 * per_time];
        ctx.run_sample(0, &mut one).unwrap();
        assert!((one[3 * per_time - 1] - s).abs() < 1e-8);
        assert!(a.half_chain[2].mean_s > 0.0);
    }

    #[test]
    fn tomography_and_csv_round_trip() {
        let out = run_protocol(&small(Protocol::NnThermal)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_run(dir.path(), &out).unwrap();
        assert_eq!(files.len(), 5);
        let (len, recs) = read_entropy_csv(&dir.path().join(entropy_csv_name(Protocol::NnThermal, 3))).unwrap();
        assert_eq!(len, 6);
        assert_eq!(recs, out.records_for(3).unwrap());
        let fits = run_tomography(len, Protocol::NnThermal, &recs).unwrap();
        assert_eq!(fits.len(), 3);
        assert!(fits.windows(2).all(|w| w[0].time < w[1].time));
        for f in &fits {
            assert!(f.fit.r2 <= 1.0 + 1e-12);
        }
        let missing = &recs[1..];
        assert!(run_tomography(len, Protocol::NnThermal, missing).is_err());
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest_nn_thermal.json")).unwrap()).unwrap();
        assert_eq!(manifest["sample_streams"].as_array().unwrap().len(), 6);
        assert_eq!(manifest["config"]["protocol"], "nn_thermal");
    }

    #[test]
    fn malformed_csv_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "time,rep_id,mask,n1,n2,n3,mean_S,stderr\n1,0,7,2,4,3,abc,0.1\n").unwrap();
        let err = read_entropy_csv(&p).unwrap_err().to_string();
        assert!(err.contains("mean_S"), "{err}");
        fs::write(&p, "time,rep_id,mask,n1,n2,n3,mean_S,stderr\n1,0,7,9,9,9,1.0,0.1\n").unwrap();
        assert!(read_entropy_csv(&p).is_err());
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(read_entropy_csv(&p).is_err());
    }

    #[test]
    fn spectral_diagnostics_small() {
        let mut cfg = ExperimentConfig::new(Protocol::NnThermal, 8);
        cfg.n_samples = 4;
        let out = run_spectral_diagnostics(&cfg).unwrap();
        assert_eq!(out.per_realization.len(), 4);
        assert!(out.mean_r.mean > 0.0 && out.mean_r.mean < 1.0);
        cfg.protocol = Protocol::Floquet;
        let f = run_spectral_diagnostics(&cfg).unwrap();
        // 70 quasienergies give 68 ratios
        assert_eq!(f.per_realization[0].ratios.len() + f.per_realization[0].dropped_degenerate, 68);
        cfg.protocol = Protocol::Rqc;
        assert!(run_spectral_diagnostics(&cfg).is_err());
        let dir = tempfile::tempdir().unwrap();
        let files = write_spectral(dir.path(), &f).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[1]).unwrap()).unwrap();
        assert_eq!(v["histogram"]["density"].as_array().unwrap().len(), 50);
    }

    #[test]
    fn haar_reference_rows() {
        let refs = haar_references(6, &[1, 3], 200, 4).unwrap();
        assert_eq!(refs.len(), 2);
        // one site of a half-filled chain: p(↑) = 1/2 on average, entropy below 1
        assert!(refs[0].sector_mean < 1.0 && refs[0].sector_mean > 0.7);
        assert!(refs[1].sector_mean < refs[1].page);
        assert!(haar_references(6, &[4], 200, 4).is_err());
    }
}
