//! Schmidt spectra and von Neumann entropies over arbitrary site subsets.
//!
//! The amplitude vector is reshaped into a `2^{|A|} × 2^{L−|A|}` matrix by
//! routing the bits of `A` to the row index, and the spectrum of `ρ_A` is read
//! off its squared singular values. `ρ_A` itself is never formed.

use std::f64::consts::LN_2;

use faer::{c64, Mat};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{param, Error, Result};
use crate::spin_basis::{Basis, SectorBasis, StateVector};
use crate::stats::MeanStderr;

/// Eigenvalues below this are dropped before taking logarithms.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Squared Schmidt coefficients, nonincreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    pub lambdas: Vec<f64>,
}

/// Gather the bits of `value` selected by `select` into the low bits.
#[inline]
fn extract_bits(value: u32, select: u32) -> u32 {
    let mut out = 0;
    let mut pos = 0;
    let mut s = select;
    while s != 0 {
        let bit = s.trailing_zeros();
        out |= ((value >> bit) & 1) << pos;
        pos += 1;
        s &= s - 1;
    }
    out
}

pub fn schmidt_spectrum(psi: &StateVector, mask: u32) -> Result<SchmidtSpectrum> {
    let len = psi.len();
    let full = (1u32 << len) - 1;
    if mask & !full != 0 {
        return param(format!("mask {mask:#b} has sites beyond L = {len}"));
    }
    let n0 = mask.count_ones() as usize;
    if n0 == 0 || n0 == len {
        return param("bipartition must leave both sides nonempty");
    }
    // entropies of A and its complement agree; put the smaller side on rows
    let rows_mask = if 2 * n0 <= len { mask } else { !mask & full };
    let cols_mask = !rows_mask & full;
    let n_rows = 1usize << rows_mask.count_ones();
    let n_cols = 1usize << cols_mask.count_ones();

    let mut m = Mat::<c64>::zeros(n_rows, n_cols);
    match psi.basis() {
        Basis::Full { .. } => {
            for (k, a) in psi.amplitudes().iter().enumerate() {
                if *a != Complex64::new(0.0, 0.0) {
                    let k = k as u32;
                    m[(extract_bits(k, rows_mask) as usize, extract_bits(k, cols_mask) as usize)] = *a;
                }
            }
        }
        Basis::Sector(sector) => {
            for (a, &k) in psi.amplitudes().iter().zip(sector.states()) {
                m[(extract_bits(k, rows_mask) as usize, extract_bits(k, cols_mask) as usize)] = *a;
            }
        }
    }
    let sv = m
        .singular_values()
        .map_err(|e| Error::LinAlg(format!("Schmidt decomposition: {e:?}")))?;
    let mut lambdas: Vec<f64> = sv.into_iter().map(|s| s * s).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok(SchmidtSpectrum { lambdas })
}

/// `−Σ λ log₂ λ`, skipping `λ < 1e-12`.
pub fn entropy_bits(s: &SchmidtSpectrum) -> f64 {
    let h: f64 = s
        .lambdas
        .iter()
        .filter(|&&l| l >= EIGENVALUE_FLOOR)
        .map(|&l| -l * l.log2())
        .sum();
    h.max(0.0)
}

pub fn entanglement_entropy(psi: &StateVector, mask: u32) -> Result<f64> {
    Ok(entropy_bits(&schmidt_spectrum(psi, mask)?))
}

/// `I_j = S({0}) + S({j}) − S({0, j})`.
pub fn mutual_information(psi: &StateVector, j: usize) -> Result<f64> {
    let len = psi.len();
    if j < 1 || j > len / 2 {
        return param(format!("distance must satisfy 1 <= j <= L/2, got {j}"));
    }
    let s0 = entanglement_entropy(psi, 1)?;
    let sj = entanglement_entropy(psi, 1 << j)?;
    let s0j = if len == 2 { 0.0 } else { entanglement_entropy(psi, 1 | 1 << j)? };
    Ok(s0 + sj - s0j)
}

/// Mean entropy of a Haar-random pure state on `dim_a ⊗ dim_b`, in bits.
pub fn page_entropy_bits(dim_a: usize, dim_b: usize) -> f64 {
    let (a, b) = if dim_a <= dim_b { (dim_a, dim_b) } else { (dim_b, dim_a) };
    if a <= 1 {
        return 0.0;
    }
    let harmonic: f64 = (b + 1..=a * b).map(|k| 1.0 / k as f64).sum();
    (harmonic - (a - 1) as f64 / (2.0 * b as f64)) / LN_2
}

/// Gaussian amplitudes over `basis`, normalized: a Haar-random state there.
pub fn haar_random_state<R: Rng + ?Sized>(basis: Basis, rng: &mut R) -> StateVector {
    let amps = (0..basis.dim())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let mut v = StateVector::new(basis, amps).expect("dimension matches basis");
    v.normalize();
    v
}

/// Monte Carlo mean entropy of Haar-random states restricted to the `n_up`
/// sector (or the whole space when `n_up` is `None`), cut at `mask`.
pub fn haar_sector_entropy_mc<R: Rng + ?Sized>(
    len: usize,
    n_up: Option<usize>,
    mask: u32,
    n_samples: usize,
    rng: &mut R,
) -> Result<MeanStderr> {
    if n_samples < 100 {
        return param(format!("Haar Monte Carlo needs at least 100 samples, got {n_samples}"));
    }
    let basis = match n_up {
        Some(k) => Basis::Sector(std::sync::Arc::new(SectorBasis::new(len, k)?)),
        None => Basis::full(len)?,
    };
    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let psi = haar_random_state(basis.clone(), rng);
        values.push(entanglement_entropy(&psi, mask)?);
    }
    Ok(MeanStderr::from_samples(&values))
}
