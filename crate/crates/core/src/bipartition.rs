//! Bipartitions of a periodic chain and their crossed-bond geometry.
//!
//! A bipartition is a site mask `A`. Its geometry is `(n₁, …, n_{L/2})`, where
//! `nⱼ` counts unordered site pairs at ring distance `j` with exactly one end in
//! `A`. Antipodal pairs exist once each, so `Σⱼ nⱼ = n₀(L − n₀)`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{param, Result};
use crate::spin_basis::check_chain_length;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bipartition {
    pub mask: u32,
    pub n0: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CrossedBondVector(pub Vec<u32>);

impl CrossedBondVector {
    /// `n_j` for 1-based bond order `j`.
    pub fn order(&self, j: usize) -> u32 {
        self.0[j - 1]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Regression predictors `n₁..n_{L/2−1}`; `n_{L/2}` is implied by the sum rule.
    pub fn predictors(&self) -> &[u32] {
        &self.0[..self.0.len() - 1]
    }
}

pub fn crossed_bond_vector(mask: u32, len: usize) -> CrossedBondVector {
    let half = len / 2;
    let full = full_mask(len);
    let mut n = vec![0u32; half];
    for (j, nj) in n.iter_mut().enumerate() {
        let d = j + 1;
        // bit i of `crossed` is set when sites i and i+d disagree
        let crossed = (mask ^ rotate_right(mask, d, len)) & full;
        let count = crossed.count_ones();
        *nj = if d == half && len % 2 == 0 { count / 2 } else { count };
    }
    CrossedBondVector(n)
}

#[inline]
fn full_mask(len: usize) -> u32 {
    if len == 32 { u32::MAX } else { (1u32 << len) - 1 }
}

/// Site `i` of the result holds site `i + k` of `mask`.
#[inline]
fn rotate_right(mask: u32, k: usize, len: usize) -> u32 {
    let k = k % len;
    if k == 0 {
        return mask;
    }
    ((mask >> k) | (mask << (len - k))) & full_mask(len)
}

#[inline]
fn reflect(mask: u32, len: usize) -> u32 {
    mask.reverse_bits() >> (32 - len)
}

/// Smallest mask in the dihedral orbit, also over complements at `n₀ = L/2`.
pub fn canonicalize(mask: u32, len: usize) -> u32 {
    let full = full_mask(len);
    let mask = mask & full;
    let mut seeds = vec![mask, reflect(mask, len)];
    if 2 * mask.count_ones() as usize == len {
        let comp = !mask & full;
        seeds.push(comp);
        seeds.push(reflect(comp, len));
    }
    seeds
        .into_iter()
        .flat_map(|m| (0..len).map(move |k| rotate_right(m, k, len)))
        .min()
        .expect("orbit is nonempty")
}

/// Representatives of one `(L, n₀)` slice, ascending by mask.
#[derive(Clone, Debug)]
pub struct RepresentativeSet {
    pub len: usize,
    pub n0: usize,
    reps: Vec<Bipartition>,
    geometry: Vec<CrossedBondVector>,
}

impl RepresentativeSet {
    pub fn reps(&self) -> &[Bipartition] {
        &self.reps
    }

    pub fn geometry(&self, rep_index: usize) -> &CrossedBondVector {
        &self.geometry[rep_index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Bipartition, &CrossedBondVector)> {
        self.reps.iter().zip(&self.geometry)
    }

    /// `N(L, n₀)`.
    pub fn count(&self) -> usize {
        self.reps.len()
    }

    /// `M(L, n₀)`: distinct geometry vectors.
    pub fn unique_geometries(&self) -> usize {
        self.geometry.iter().collect::<BTreeSet<_>>().len()
    }
}

/// Masks with exactly `k` of the low `len` bits set, ascending (Gosper's hack).
pub fn masks_with_popcount(len: usize, k: usize) -> impl Iterator<Item = u32> {
    let limit = 1u64 << len;
    let first = if k == 0 { 0u64 } else { (1u64 << k) - 1 };
    let mut next = Some(first).filter(|&m| m < limit);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let n = (((r ^ cur) >> 2) / c) | r;
            (n < limit).then_some(n)
        };
        Some(cur as u32)
    })
}

pub fn enumerate_representatives(len: usize, n0: usize) -> Result<RepresentativeSet> {
    check_chain_length(len)?;
    if n0 < 1 || n0 > len / 2 {
        return param(format!("subsystem size must satisfy 1 <= n0 <= L/2, got n0 = {n0}, L = {len}"));
    }
    let canon: BTreeSet<u32> = masks_with_popcount(len, n0).map(|m| canonicalize(m, len)).collect();
    let reps: Vec<Bipartition> = canon.into_iter().map(|mask| Bipartition { mask, n0 }).collect();
    let geometry = reps.iter().map(|b| crossed_bond_vector(b.mask, len)).collect();
    Ok(RepresentativeSet { len, n0, reps, geometry })
}

/// Largest number of representatives sharing one geometry vector.
pub fn geometry_degeneracy(set: &RepresentativeSet) -> usize {
    let mut counts: BTreeMap<&CrossedBondVector, usize> = BTreeMap::new();
    for g in &set.geometry {
        *counts.entry(g).or_default() += 1;
    }
    counts.into_values().max().unwrap_or(0)
}

/// Every mask in the symmetry orbit of `mask` (translations, reflection, and
/// complement at half size).
pub fn orbit(mask: u32, len: usize) -> BTreeSet<u32> {
    let full = full_mask(len);
    let mut seeds = vec![mask, reflect(mask, len)];
    if 2 * mask.count_ones() as usize == len {
        seeds.push(!mask & full);
        seeds.push(reflect(!mask & full, len));
    }
    seeds.into_iter().flat_map(|m| (0..len).map(move |k| rotate_right(m, k, len))).collect()
}

/// Contiguous block of the first `L/2` sites.
pub fn half_chain_mask(len: usize) -> u32 {
    (1u32 << (len / 2)) - 1
}
