//! Multi-bipartition design matrix and the bond-additive least-squares fit
//! `S = S₀ + Σ_{j<L/2} ωⱼ nⱼ`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::bipartition::{CrossedBondVector, RepresentativeSet};
use crate::error::{param, Error, Result};

/// Rows are representatives; columns are `[1, n₁, …, n_{L/2−1}]`.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    pub len: usize,
    pub n0: usize,
    x: Mat<f64>,
}

impl DesignMatrix {
    pub fn from_geometries<'a>(
        len: usize,
        n0: usize,
        geometries: impl IntoIterator<Item = &'a CrossedBondVector>,
    ) -> Result<Self> {
        let rows: Vec<&CrossedBondVector> = geometries.into_iter().collect();
        if rows.is_empty() {
            return param("design matrix needs at least one representative");
        }
        let ncols = len / 2;
        if let Some(bad) = rows.iter().find(|g| g.0.len() != ncols) {
            return param(format!("geometry of length {} does not fit L = {len}", bad.0.len()));
        }
        let x = Mat::from_fn(rows.len(), ncols, |i, j| {
            if j == 0 { 1.0 } else { rows[i].order(j) as f64 }
        });
        Ok(Self { len, n0, x })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.x[(row, col)]
    }

    fn apply(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.x[(i, j)] * coef[j]).sum())
            .collect()
    }
}

pub fn build_design_matrix(set: &RepresentativeSet) -> Result<DesignMatrix> {
    DesignMatrix::from_geometries(set.len, set.n0, set.iter().map(|(_, g)| g))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub s0: f64,
    pub omega: Vec<f64>,
    pub r2: f64,
    pub residuals: Vec<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl FitResult {
    /// `ω₁ / max_{j>1} ωⱼ`; `None` without a second tension or when the
    /// denominator is not positive.
    pub fn hierarchy(&self) -> Option<f64> {
        let rest = self.omega.get(1..).filter(|r| !r.is_empty())?;
        let max_rest = rest.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (max_rest > 0.0).then(|| self.omega[0] / max_rest)
    }
}

/// Minimum-norm least squares through a thin SVD. Singular values below
/// `max(m, n)·ε·σ_max` count as zero.
pub fn fit_bond_tensions(x: &DesignMatrix, y: &[f64]) -> Result<FitResult> {
    let (m, n) = (x.nrows(), x.ncols());
    if y.len() != m {
        return param(format!("{} observations for {m} design rows", y.len()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return param("observations must be finite");
    }
    let svd = x
        .x
        .thin_svd()
        .map_err(|e| Error::LinAlg(format!("design matrix SVD: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = m.min(n);
    let sigma_max = (0..k).map(|i| s[i]).fold(0.0, f64::max);
    let cutoff = m.max(n) as f64 * f64::EPSILON * sigma_max;

    let mut coef = vec![0.0; n];
    let mut rank = 0;
    for i in 0..k {
        if s[i] <= cutoff {
            continue;
        }
        rank += 1;
        let uy: f64 = (0..m).map(|r| u[(r, i)] * y[r]).sum::<f64>() / s[i];
        for (c, cf) in coef.iter_mut().enumerate() {
            *cf += v[(c, i)] * uy;
        }
    }

    let pred = x.apply(&coef);
    let residuals: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let mean = y.iter().sum::<f64>() / m as f64;
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = r_squared(ss_res, ss_tot);
    Ok(FitResult {
        s0: coef[0],
        omega: coef[1..].to_vec(),
        r2,
        residuals,
        rank,
        rank_deficient: rank < n,
    })
}

fn r_squared(ss_res: f64, ss_tot: f64) -> f64 {
    // the intercept column makes ss_res ≤ ss_tot, so constant data fits exactly
    if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot }
}

/// `S₀ + Σ_{j<L/2} ωⱼ nⱼ`.
pub fn predict(fit: &FitResult, geometry: &CrossedBondVector) -> f64 {
    fit.s0
        + fit
            .omega
            .iter()
            .zip(geometry.predictors())
            .map(|(w, &n)| w * n as f64)
            .sum::<f64>()
}

/// One serialized fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    #[serde(rename = "L")]
    pub len: usize,
    pub n0: usize,
    pub protocol: String,
    pub time: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
    pub omega: Vec<f64>,
    pub r2: f64,
    pub rank_flag: bool,
    pub hierarchy: Option<f64>,
}

impl FitRecord {
    pub fn new(len: usize, n0: usize, protocol: &str, time: f64, fit: &FitResult) -> Self {
        Self {
            len,
            n0,
            protocol: protocol.to_string(),
            time,
            s0: fit.s0,
            omega: fit.omega.clone(),
            r2: fit.r2,
            rank_flag: fit.rank_deficient,
            hierarchy: fit.hierarchy(),
        }
    }
}
