//! Adjacent level-spacing ratios and random-matrix references.

use faer::{Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Spacings at or below this are treated as exact degeneracies.
pub const DEGENERACY_TOL: f64 = 1e-12;
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    /// Uniform bins on `[0, 1]`, normalized to unit area.
    pub fn unit_interval(values: &[f64], bins: usize) -> Self {
        let edges = (0..=bins).map(|k| k as f64 / bins as f64).collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            let b = ((v * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let scale = if values.is_empty() { 0.0 } else { bins as f64 / values.len() as f64 };
        let density = counts.into_iter().map(|c| c as f64 * scale).collect();
        Self { edges, density }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub ratios: Vec<f64>,
    pub mean_r: f64,
    pub histogram: Histogram,
    pub dropped_degenerate: usize,
}

impl RatioStats {
    fn from_ratios(ratios: Vec<f64>, dropped_degenerate: usize) -> Self {
        let mean_r = if ratios.is_empty() {
            f64::NAN
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        let histogram = Histogram::unit_interval(&ratios, HISTOGRAM_BINS);
        Self { ratios, mean_r, histogram, dropped_degenerate }
    }

    /// Concatenates the ratios of several spectra.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a RatioStats>) -> Self {
        let mut ratios = Vec::new();
        let mut dropped = 0;
        for p in parts {
            ratios.extend_from_slice(&p.ratios);
            dropped += p.dropped_degenerate;
        }
        Self::from_ratios(ratios, dropped)
    }
}

/// `r_k = min(δ_k, δ_{k+1}) / max(δ_k, δ_{k+1})` over consecutive spacings.
/// Ratios with both spacings degenerate are dropped and counted.
pub fn level_spacing_ratios(energies: &[f64]) -> Result<RatioStats> {
    if energies.len() < 3 {
        return param(format!("need at least 3 levels, got {}", energies.len()));
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return param("levels must be finite");
    }
    if energies.windows(2).any(|w| w[1] < w[0]) {
        return param("levels must be sorted ascending");
    }
    let spacings: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    let mut ratios = Vec::with_capacity(spacings.len() - 1);
    let mut dropped = 0;
    for w in spacings.windows(2) {
        let (lo, hi) = if w[0] <= w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
        if hi <= DEGENERACY_TOL {
            dropped += 1;
        } else if lo <= DEGENERACY_TOL {
            ratios.push(0.0);
        } else {
            ratios.push(lo / hi);
        }
    }
    Ok(RatioStats::from_ratios(ratios, dropped))
}

/// Slice `[⌊D/3⌋, ⌊2D/3⌋)`.
pub fn middle_third(energies: &[f64]) -> &[f64] {
    let d = energies.len();
    &energies[d / 3..2 * d / 3]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeans {
    pub goe: f64,
    pub coe: f64,
    pub poisson: f64,
}

pub fn reference_means() -> ReferenceMeans {
    ReferenceMeans {
        goe: 4.0 - 2.0 * 3f64.sqrt(),
        coe: 0.527,
        poisson: 2.0 * std::f64::consts::LN_2 - 1.0,
    }
}

/// Pooled ratios of `n_samples` real symmetric Gaussian matrices.
pub fn goe_surrogate_ratios<R: Rng + ?Sized>(dim: usize, n_samples: usize, rng: &mut R) -> Result<RatioStats> {
    if dim < 50 {
        return param(format!("GOE surrogate needs dim >= 50, got {dim}"));
    }
    let mut parts = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let a = Mat::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
        let h = Mat::<f64>::from_fn(dim, dim, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let mut e = h
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::LinAlg(format!("GOE sample: {e:?}")))?;
        e.sort_by(f64::total_cmp);
        parts.push(level_spacing_ratios(&e)?);
    }
    Ok(RatioStats::pooled(&parts))
}

/// Ratios of `n_levels` sorted i.i.d. uniform levels.
pub fn poisson_surrogate_ratios<R: Rng + ?Sized>(n_levels: usize, rng: &mut R) -> Result<RatioStats> {
    let mut e: Vec<f64> = (0..n_levels).map(|_| rng.random::<f64>()).collect();
    e.sort_by(f64::total_cmp);
    level_spacing_ratios(&e)
}
