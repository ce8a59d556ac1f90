//! Disordered XXZ-family Hamiltonians as sparse Hermitian matrices.
//!
//! Spin operators are `Sᵅ = σᵅ/2`, so a nearest-neighbour exchange has matrix
//! element 1/2, `SᶻSᶻ` contributes ±1/4 and a field `hᵢSᶻᵢ` contributes ±hᵢ/2.
//! Bond sums run over `i = 0..L` with partner `(i + d) mod L`.

use std::collections::HashMap;

use faer::{c64, Mat};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{param, Error, Result};
use crate::spin_basis::Basis;

#[derive(Clone, Debug, PartialEq)]
pub struct DisorderRealization {
    /// Longitudinal fields, one per site.
    pub h: Vec<f64>,
    /// Transverse fields, when the model has them.
    pub g: Option<Vec<f64>>,
}

impl DisorderRealization {
    pub fn clean(len: usize) -> Self {
        Self { h: vec![0.0; len], g: None }
    }
}

/// `hᵢ ~ U[-W, W]` i.i.d., and independently `gᵢ ~ U[-W_g, W_g]` when requested.
pub fn sample_disorder<R: Rng + ?Sized>(
    w: f64,
    w_g: Option<f64>,
    len: usize,
    rng: &mut R,
) -> Result<DisorderRealization> {
    if !(w >= 0.0) || w_g.is_some_and(|v| !(v >= 0.0)) {
        return param(format!("disorder strengths must be >= 0 (W = {w}, W_g = {w_g:?})"));
    }
    let mut draw = |width: f64| -> Vec<f64> {
        (0..len)
            .map(|_| if width == 0.0 { 0.0 } else { rng.random_range(-width..=width) })
            .collect()
    };
    let h = draw(w);
    let g = w_g.map(draw);
    Ok(DisorderRealization { h, g })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingParams {
    pub jz: f64,
    pub gamma: f64,
    pub w: f64,
    pub w_g: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self { jz: 0.5, gamma: 24.0 / 25.0, w: 0.5, w_g: 0.5 }
    }
}

/// Hermitian matrix stored as its upper triangle (`row <= col`), sorted by
/// `(row, col)` with no duplicates.
#[derive(Clone, Debug)]
pub struct SparseHermitianOperator {
    basis: Basis,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseHermitianOperator {
    pub fn from_upper_entries(
        basis: Basis,
        entries: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Result<Self> {
        let dim = basis.dim();
        let mut acc: HashMap<(usize, usize), Complex64> = HashMap::new();
        for (r, c, v) in entries {
            if r >= dim || c >= dim {
                return param(format!("entry ({r}, {c}) outside dimension {dim}"));
            }
            let (r, c, v) = if r <= c { (r, c, v) } else { (c, r, v.conj()) };
            *acc.entry((r, c)).or_default() += v;
        }
        let mut entries: Vec<_> = acc.into_iter().map(|((r, c), v)| (r, c, v)).collect();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let op = Self { basis, entries };
        op.check_hermitian()?;
        Ok(op)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    /// Diagonal entries must be real and storage strictly upper/sorted.
    pub fn check_hermitian(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if (w[0].0, w[0].1) >= (w[1].0, w[1].1) {
                return param("operator storage has duplicate or unsorted entries");
            }
        }
        for &(r, c, v) in &self.entries {
            if r > c {
                return param(format!("entry ({r}, {c}) below the diagonal"));
            }
            if r == c && v.im != 0.0 {
                return param(format!("diagonal entry {r} has imaginary part {}", v.im));
            }
        }
        Ok(())
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|e| e.2.im == 0.0)
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|e| e.0 == e.1 || e.2 == Complex64::new(0.0, 0.0))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v.re;
            }
        }
        d
    }

    /// Matrix element `⟨row|H|col⟩` of the full implied matrix.
    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        let (r, c, conj) = if row <= col { (row, col, false) } else { (col, row, true) };
        match self.entries.binary_search_by_key(&(r, c), |e| (e.0, e.1)) {
            Ok(i) => {
                let v = self.entries[i].2;
                if conj { v.conj() } else { v }
            }
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = H x`, expanding the stored triangle symmetrically.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            if r == c {
                y[r] += v * x[c];
            } else {
                y[r] += v * x[c];
                y[c] += v.conj() * x[r];
            }
        }
    }

    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn gershgorin_bound(&self) -> f64 {
        let mut rows = vec![0.0; self.dim()];
        for &(r, c, v) in &self.entries {
            rows[r] += v.norm();
            if r != c {
                rows[c] += v.norm();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense_real(&self) -> Option<Mat<f64>> {
        if !self.is_real() {
            return None;
        }
        let n = self.dim();
        let mut m = Mat::<f64>::zeros(n, n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v.re;
            m[(c, r)] = v.re;
        }
        Some(m)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n, n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
            m[(c, r)] = v.conj();
        }
        m
    }
}

/// Accumulates matrix elements while walking a basis.
struct Builder {
    basis: Basis,
    diag: Vec<f64>,
    offdiag: HashMap<(usize, usize), f64>,
}

impl Builder {
    fn new(basis: &Basis) -> Self {
        Self { basis: basis.clone(), diag: vec![0.0; basis.dim()], offdiag: HashMap::new() }
    }

    /// `c·(SˣSˣ + SʸSʸ) + c·jz·SᶻSᶻ` on every bond at ring distance `distance`.
    fn xxz_bonds(&mut self, distance: usize, c_xy: f64, c_zz: f64) -> Result<()> {
        let len = self.basis.len();
        for idx in 0..self.basis.dim() {
            let mask = self.basis.mask(idx);
            for i in 0..len {
                let j = (i + distance) % len;
                let same = (mask >> i & 1) == (mask >> j & 1);
                self.diag[idx] += c_zz * if same { 0.25 } else { -0.25 };
                if !same && c_xy != 0.0 {
                    let flipped = mask ^ (1 << i) ^ (1 << j);
                    let other = self.basis.index_of(flipped).ok_or_else(|| {
                        Error::BasisMismatch("exchange left the basis".into())
                    })?;
                    if idx < other {
                        *self.offdiag.entry((idx, other)).or_default() += 0.5 * c_xy;
                    }
                }
            }
        }
        Ok(())
    }

    fn z_fields(&mut self, h: &[f64]) {
        for idx in 0..self.basis.dim() {
            let mask = self.basis.mask(idx);
            for (i, &hi) in h.iter().enumerate() {
                self.diag[idx] += hi * if mask >> i & 1 == 1 { 0.5 } else { -0.5 };
            }
        }
    }

    fn x_fields(&mut self, g: &[f64]) -> Result<()> {
        if !self.basis.is_full() {
            return Err(Error::BasisMismatch(
                "transverse fields leave every magnetization sector; use the full basis".into(),
            ));
        }
        for idx in 0..self.basis.dim() {
            let mask = self.basis.mask(idx);
            for (i, &gi) in g.iter().enumerate() {
                let other = (mask ^ (1 << i)) as usize;
                if idx < other && gi != 0.0 {
                    *self.offdiag.entry((idx, other)).or_default() += 0.5 * gi;
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<SparseHermitianOperator> {
        let diag = self.diag.into_iter().enumerate().map(|(i, d)| (i, i, Complex64::new(d, 0.0)));
        let off = self
            .offdiag
            .into_iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|((r, c), v)| (r, c, Complex64::new(v, 0.0)));
        SparseHermitianOperator::from_upper_entries(self.basis, diag.chain(off))
    }
}

fn check_fields(len: usize, fields: &[f64], what: &str) -> Result<()> {
    if fields.len() != len {
        return param(format!("{what}: {} values for {len} sites", fields.len()));
    }
    Ok(())
}

fn check_nn_length(len: usize) -> Result<()> {
    if len < 4 {
        return param(format!("periodic nearest-neighbour chains need L >= 4, got {len}"));
    }
    Ok(())
}

/// `Σᵢ (SˣᵢSˣᵢ₊₁ + SʸᵢSʸᵢ₊₁ + Jz SᶻᵢSᶻᵢ₊₁ + hᵢ Sᶻᵢ)`.
pub fn build_h_nn(
    params: &CouplingParams,
    disorder: &DisorderRealization,
    basis: &Basis,
) -> Result<SparseHermitianOperator> {
    let len = basis.len();
    check_nn_length(len)?;
    check_fields(len, &disorder.h, "longitudinal fields")?;
    let mut b = Builder::new(basis);
    b.xxz_bonds(1, 1.0, params.jz)?;
    b.z_fields(&disorder.h);
    b.finish()
}

/// `H_NN + γ Σᵢ (SˣᵢSˣᵢ₊₂ + SʸᵢSʸᵢ₊₂ + Jz SᶻᵢSᶻᵢ₊₂)`; fields appear only in the NN part.
pub fn build_h_nnn(
    params: &CouplingParams,
    disorder: &DisorderRealization,
    basis: &Basis,
) -> Result<SparseHermitianOperator> {
    let len = basis.len();
    if len < 6 {
        return param(format!("next-nearest-neighbour bonds double count below L = 6, got {len}"));
    }
    check_fields(len, &disorder.h, "longitudinal fields")?;
    let mut b = Builder::new(basis);
    b.xxz_bonds(1, 1.0, params.jz)?;
    b.xxz_bonds(2, params.gamma, params.gamma * params.jz)?;
    b.z_fields(&disorder.h);
    b.finish()
}

/// `H_NN + Σᵢ gᵢ Sˣᵢ`, full basis only.
pub fn build_h_mf(
    params: &CouplingParams,
    disorder: &DisorderRealization,
    basis: &Basis,
) -> Result<SparseHermitianOperator> {
    let len = basis.len();
    check_nn_length(len)?;
    check_fields(len, &disorder.h, "longitudinal fields")?;
    let g = disorder
        .g
        .as_deref()
        .ok_or_else(|| Error::Parameter("mixed-field model needs transverse fields".into()))?;
    check_fields(len, g, "transverse fields")?;
    let mut b = Builder::new(basis);
    b.x_fields(g)?;
    b.xxz_bonds(1, 1.0, params.jz)?;
    b.z_fields(&disorder.h);
    b.finish()
}

/// The two halves of the periodic drive: `H0 = Σ (SᶻSᶻ + hᵢSᶻᵢ)` and
/// `H1 = Σ (SˣSˣ + SʸSʸ)`.
pub fn build_floquet_parts(
    disorder: &DisorderRealization,
    basis: &Basis,
) -> Result<(SparseHermitianOperator, SparseHermitianOperator)> {
    let len = basis.len();
    check_nn_length(len)?;
    check_fields(len, &disorder.h, "longitudinal fields")?;
    let mut b0 = Builder::new(basis);
    b0.xxz_bonds(1, 0.0, 1.0)?;
    b0.z_fields(&disorder.h);
    let mut b1 = Builder::new(basis);
    b1.xxz_bonds(1, 1.0, 0.0)?;
    Ok((b0.finish()?, build_hopping_only(b1)?))
}

fn build_hopping_only(b: Builder) -> Result<SparseHermitianOperator> {
    // keep an explicit zero diagonal out of storage
    let off = b
        .offdiag
        .into_iter()
        .filter(|&(_, v)| v != 0.0)
        .map(|((r, c), v)| (r, c, Complex64::new(v, 0.0)));
    SparseHermitianOperator::from_upper_entries(b.basis, off)
}

/// Total `Sᶻ` as a diagonal operator.
pub fn total_sz(basis: &Basis) -> Result<SparseHermitianOperator> {
    let len = basis.len() as f64;
    let entries = (0..basis.dim()).map(|i| {
        let up = basis.mask(i).count_ones() as f64;
        (i, i, Complex64::new(up - len / 2.0, 0.0))
    });
    SparseHermitianOperator::from_upper_entries(basis.clone(), entries)
}
