//! Computational bases for periodic spin-1/2 chains.
//!
//! Site `i` maps to bit `i` of a mask; a set bit is spin up. States live either
//! in the full `2^L` space or in a fixed-magnetization sector, whose basis is
//! the ascending list of masks with a given popcount.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};

pub const MAX_SITES: usize = 16;

/// Chain lengths accepted by every builder: even, `2..=MAX_SITES`.
pub fn check_chain_length(len: usize) -> Result<()> {
    if len < 2 || len > MAX_SITES || len % 2 != 0 {
        return param(format!("chain length must be even and in 2..={MAX_SITES}, got {len}"));
    }
    Ok(())
}

/// Independent random stream for ensemble member `index`.
///
/// Every sample owns its own ChaCha stream keyed by the master seed, so the
/// values drawn never depend on which worker ran the sample or in what order.
pub fn sample_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// A computational basis state of an `L`-site chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub bits: u32,
    pub len: usize,
}

impl BasisState {
    pub fn new(bits: u32, len: usize) -> Result<Self> {
        check_chain_length(len)?;
        if (bits as u64) >> len != 0 {
            return param(format!("mask {bits:#b} has bits beyond site {}", len - 1));
        }
        Ok(Self { bits, len })
    }

    pub fn is_up(&self, site: usize) -> bool {
        self.bits >> site & 1 == 1
    }

    pub fn n_up(&self) -> usize {
        self.bits.count_ones() as usize
    }
}

impl fmt::Display for BasisState {
    /// Site 0 first, `1` for up.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for site in 0..self.len {
            f.write_str(if self.is_up(site) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// All masks of Hamming weight `n_up`, ascending, with an inverse lookup.
#[derive(Debug)]
pub struct SectorBasis {
    len: usize,
    n_up: usize,
    states: Vec<u32>,
    index: Vec<u32>,
}

const NOT_IN_SECTOR: u32 = u32::MAX;

impl SectorBasis {
    pub fn new(len: usize, n_up: usize) -> Result<Self> {
        check_chain_length(len)?;
        if n_up > len {
            return param(format!("n_up = {n_up} exceeds chain length {len}"));
        }
        let full = 1usize << len;
        let mut states = Vec::new();
        let mut index = vec![NOT_IN_SECTOR; full];
        for mask in 0..full as u32 {
            if mask.count_ones() as usize == n_up {
                index[mask as usize] = states.len() as u32;
                states.push(mask);
            }
        }
        Ok(Self { len, n_up, states, index })
    }

    pub fn half_filling(len: usize) -> Result<Self> {
        Self::new(len, len / 2)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> u32 {
        self.states[idx]
    }

    pub fn index_of(&self, mask: u32) -> Option<usize> {
        match self.index.get(mask as usize) {
            Some(&i) if i != NOT_IN_SECTOR => Some(i as usize),
            _ => None,
        }
    }
}

/// Build the `C(L, n_up)`-dimensional sector basis.
pub fn build_sector_basis(len: usize, n_up: usize) -> Result<SectorBasis> {
    SectorBasis::new(len, n_up)
}

#[derive(Clone, Debug)]
pub enum Basis {
    Full { len: usize },
    Sector(Arc<SectorBasis>),
}

impl Basis {
    pub fn full(len: usize) -> Result<Self> {
        check_chain_length(len)?;
        Ok(Basis::Full { len })
    }

    pub fn sector(sector: Arc<SectorBasis>) -> Self {
        Basis::Sector(sector)
    }

    pub fn len(&self) -> usize {
        match self {
            Basis::Full { len } => *len,
            Basis::Sector(s) => s.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Full { len } => 1 << len,
            Basis::Sector(s) => s.dim(),
        }
    }

    /// Mask of basis vector `idx`.
    #[inline]
    pub fn mask(&self, idx: usize) -> u32 {
        match self {
            Basis::Full { .. } => idx as u32,
            Basis::Sector(s) => s.state(idx),
        }
    }

    #[inline]
    pub fn index_of(&self, mask: u32) -> Option<usize> {
        match self {
            Basis::Full { len } => ((mask as u64) >> len == 0).then_some(mask as usize),
            Basis::Sector(s) => s.index_of(mask),
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Basis::Full { .. })
    }

    pub fn sector_n_up(&self) -> Option<usize> {
        match self {
            Basis::Full { .. } => None,
            Basis::Sector(s) => Some(s.n_up()),
        }
    }

    pub fn same_as(&self, other: &Basis) -> bool {
        self.len() == other.len() && self.sector_n_up() == other.sector_n_up()
    }

    pub fn describe(&self) -> String {
        match self {
            Basis::Full { len } => format!("full space, L = {len}"),
            Basis::Sector(s) => format!("sector L = {}, n_up = {}", s.len(), s.n_up()),
        }
    }

    pub(crate) fn ensure_same(&self, other: &Basis) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::BasisMismatch(format!("{} vs {}", self.describe(), other.describe())))
        }
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    basis: Basis,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(basis: Basis, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    /// The basis vector `mask` in `basis`.
    pub fn basis_state(basis: Basis, mask: u32) -> Result<Self> {
        let idx = basis.index_of(mask).ok_or_else(|| {
            Error::BasisMismatch(format!("mask {mask:#b} is not in {}", basis.describe()))
        })?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.basis.ensure_same(&other.basis)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Full-space copy; sector amplitudes are placed at their masks.
    pub fn embed(&self) -> StateVector {
        match &self.basis {
            Basis::Full { .. } => self.clone(),
            Basis::Sector(s) => {
                let mut full = vec![Complex64::new(0.0, 0.0); 1 << s.len()];
                for (amp, &mask) in self.amplitudes.iter().zip(s.states()) {
                    full[mask as usize] = *amp;
                }
                StateVector { basis: Basis::Full { len: s.len() }, amplitudes: full }
            }
        }
    }

    /// Restrict a full-space state to `sector`, discarding weight outside it.
    pub fn project(&self, sector: &Arc<SectorBasis>) -> Result<StateVector> {
        match &self.basis {
            Basis::Full { len } if *len == sector.len() => {
                let amplitudes =
                    sector.states().iter().map(|&m| self.amplitudes[m as usize]).collect();
                Ok(StateVector { basis: Basis::Sector(sector.clone()), amplitudes })
            }
            Basis::Sector(s) if s.len() == sector.len() && s.n_up() == sector.n_up() => {
                Ok(self.clone())
            }
            other => Err(Error::BasisMismatch(format!(
                "cannot project {} onto sector n_up = {}",
                other.describe(),
                sector.n_up()
            ))),
        }
    }

    /// Total weight on basis states whose popcount differs from `n_up`.
    pub fn weight_outside_sector(&self, n_up: usize) -> f64 {
        (0..self.dim())
            .filter(|&i| self.basis.mask(i).count_ones() as usize != n_up)
            .map(|i| self.amplitudes[i].norm_sqr())
            .sum()
    }
}

/// Embed a sector state into the full space.
pub fn embed_sector_state(v: &StateVector) -> StateVector {
    v.embed()
}

impl SectorBasis {
    /// A basis state drawn uniformly from this sector.
    pub fn sample_basis_state<R: Rng + ?Sized>(self: &Arc<Self>, rng: &mut R) -> StateVector {
        let idx = rng.random_range(0..self.dim());
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); self.dim()];
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        StateVector { basis: Basis::Sector(self.clone()), amplitudes }
    }
}

/// Uniformly random computational basis state with `L/2` up spins, expressed
/// in the half-filling sector basis.
pub fn sample_half_filling_state<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<StateVector> {
    let sector = Arc::new(SectorBasis::half_filling(len)?);
    Ok(sector.sample_basis_state(rng))
}

/// Bloch angles of a product state, one pair per site.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductStateAngles {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
}

impl ProductStateAngles {
    /// Uniform on the Bloch sphere: `cos θ ~ U[-1, 1]`, `φ ~ U[0, 2π)`.
    pub fn sample<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut thetas = Vec::with_capacity(len);
        let mut phis = Vec::with_capacity(len);
        for _ in 0..len {
            let cos_theta: f64 = rng.random_range(-1.0..=1.0);
            thetas.push(cos_theta.clamp(-1.0, 1.0).acos());
            phis.push(rng.random_range(0.0..2.0 * PI));
        }
        Self { thetas, phis }
    }

    /// `⊗ᵢ (cos(θᵢ/2)|↑⟩ + e^{iφᵢ} sin(θᵢ/2)|↓⟩)` in the full basis.
    pub fn to_state(&self) -> Result<StateVector> {
        let len = self.thetas.len();
        if self.phis.len() != len {
            return param("theta and phi lists differ in length");
        }
        check_chain_length(len)?;
        let factors: Vec<(Complex64, Complex64)> = self
            .thetas
            .iter()
            .zip(&self.phis)
            .map(|(&th, &ph)| {
                let up = Complex64::new((th / 2.0).cos(), 0.0);
                let down = Complex64::from_polar((th / 2.0).sin(), ph);
                (up, down)
            })
            .collect();
        // Build the tensor product one site at a time.
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for (site, (up, down)) in factors.iter().enumerate() {
            let mut next = vec![Complex64::new(0.0, 0.0); amps.len() * 2];
            for (mask, a) in amps.iter().enumerate() {
                next[mask] = a * down;
                next[mask | 1 << site] = a * up;
            }
            amps = next;
        }
        StateVector::new(Basis::Full { len }, amps)
    }
}

pub fn sample_random_product_state<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<StateVector> {
    ProductStateAngles::sample(len, rng).to_state()
}
