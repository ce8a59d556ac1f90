//! Time propagation of chain states.
//!
//! Hamiltonian dynamics defaults to exact spectral propagation
//! `e^{-iHt} = V e^{-iEt} V†`. A Lanczos propagator covers dimensions beyond
//! the dense cap. Circuits use an in-place two-qubit kernel and the periodic
//! drive alternates a hopping propagator with a diagonal phase.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use faer::{c64, Mat, Side};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{param, Error, Result};
use crate::operators::SparseHermitianOperator;
use crate::spin_basis::{Basis, StateVector};

pub const DEFAULT_DIAGONALIZATION_CAP: usize = 16_384;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Low word of 2π, so that `TAU + TAU_LO` carries ~107 bits.
const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `E·t` reduced into `[-π, π)`.
///
/// The product is formed exactly (`fma` residual) and reduced against a
/// double-word 2π, so at `t = 10¹²` the only remaining phase error is the one
/// inherited from the eigenvalue itself.
pub fn reduced_phase(energy: f64, t: f64) -> f64 {
    let p = energy * t;
    if !p.is_finite() {
        return f64::NAN;
    }
    let err = energy.mul_add(t, -p);
    let k = (p / TAU).round();
    let r = (-k).mul_add(TAU, p) - k * TAU_LO + err;
    wrap_angle(r)
}

/// Map an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut r = theta - TAU * ((theta + PI) / TAU).floor();
    if r >= PI {
        r -= TAU;
    }
    if r < -PI {
        r += TAU;
    }
    r
}

#[derive(Clone, Debug)]
enum Eigenvectors {
    /// column-major `dim × dim`
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Eigenpairs of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    basis: Basis,
    eigenvalues: Vec<f64>,
    vectors: Eigenvectors,
}

/// Dense diagonalization; real-symmetric operators take the real path.
pub fn diagonalize(h: &SparseHermitianOperator, cap: usize) -> Result<SpectralDecomposition> {
    let n = h.dim();
    if n > cap {
        return Err(Error::Capacity { dim: n, cap });
    }
    let lin = |e: faer::linalg::evd::EvdError| Error::LinAlg(format!("eigensolver: {e:?}"));
    if let Some(dense) = h.to_dense_real() {
        let evd = dense.self_adjoint_eigen(Side::Lower).map_err(lin)?;
        let eigenvalues = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        let mut v = Vec::with_capacity(n * n);
        for k in 0..n {
            v.extend((0..n).map(|i| u[(i, k)]));
        }
        Ok(SpectralDecomposition {
            basis: h.basis().clone(),
            eigenvalues,
            vectors: Eigenvectors::Real(v),
        })
    } else {
        let evd = h.to_dense().self_adjoint_eigen(Side::Lower).map_err(lin)?;
        let eigenvalues = (0..n).map(|k| evd.S()[k].re).collect();
        let u = evd.U();
        let mut v = Vec::with_capacity(n * n);
        for k in 0..n {
            v.extend((0..n).map(|i| u[(i, k)]));
        }
        Ok(SpectralDecomposition {
            basis: h.basis().clone(),
            eigenvalues,
            vectors: Eigenvectors::Complex(v),
        })
    }
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(h: &SparseHermitianOperator, cap: usize) -> Result<Vec<f64>> {
    let n = h.dim();
    if n > cap {
        return Err(Error::Capacity { dim: n, cap });
    }
    let lin = |e: faer::linalg::evd::EvdError| Error::LinAlg(format!("eigensolver: {e:?}"));
    match h.to_dense_real() {
        Some(dense) => dense.self_adjoint_eigenvalues(Side::Lower).map_err(lin),
        None => h.to_dense().self_adjoint_eigenvalues(Side::Lower).map_err(lin),
    }
}

impl SpectralDecomposition {
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `max |E_k|`, the operator 2-norm.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// Component `i` of eigenvector `k`.
    pub fn vector_entry(&self, i: usize, k: usize) -> Complex64 {
        let n = self.dim();
        match &self.vectors {
            Eigenvectors::Real(v) => Complex64::new(v[k * n + i], 0.0),
            Eigenvectors::Complex(v) => v[k * n + i],
        }
    }

    pub fn eigenvector(&self, k: usize) -> StateVector {
        let amps = (0..self.dim()).map(|i| self.vector_entry(i, k)).collect();
        StateVector::new(self.basis.clone(), amps).expect("dimension matches basis")
    }

    /// Eigenbasis coefficients `V† ψ`.
    pub fn coefficients(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        self.basis.ensure_same(psi.basis())?;
        let n = self.dim();
        let x = psi.amplitudes();
        let out = match &self.vectors {
            Eigenvectors::Real(v) => (0..n)
                .map(|k| {
                    let col = &v[k * n..(k + 1) * n];
                    col.iter().zip(x).fold(ZERO, |acc, (&a, b)| acc + b * a)
                })
                .collect(),
            Eigenvectors::Complex(v) => (0..n)
                .map(|k| {
                    let col = &v[k * n..(k + 1) * n];
                    col.iter().zip(x).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
                })
                .collect(),
        };
        Ok(out)
    }

    /// `V c`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> StateVector {
        let n = self.dim();
        let mut out = vec![ZERO; n];
        match &self.vectors {
            Eigenvectors::Real(v) => {
                for (k, c) in coeffs.iter().enumerate() {
                    if *c == ZERO {
                        continue;
                    }
                    let col = &v[k * n..(k + 1) * n];
                    out.iter_mut().zip(col).for_each(|(o, &a)| *o += c * a);
                }
            }
            Eigenvectors::Complex(v) => {
                for (k, c) in coeffs.iter().enumerate() {
                    let col = &v[k * n..(k + 1) * n];
                    out.iter_mut().zip(col).for_each(|(o, a)| *o += c * a);
                }
            }
        }
        StateVector::new(self.basis.clone(), out).expect("dimension matches basis")
    }

    /// Eigenbasis coefficients advanced by time `t`.
    pub fn advance(&self, coeffs: &[Complex64], t: f64) -> Vec<Complex64> {
        coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, &e)| c * Complex64::from_polar(1.0, -reduced_phase(e, t)))
            .collect()
    }

    pub fn evolve(&self, psi0: &StateVector, t: f64) -> Result<StateVector> {
        if t == 0.0 {
            self.basis.ensure_same(psi0.basis())?;
            return Ok(psi0.clone());
        }
        let c = self.coefficients(psi0)?;
        Ok(self.synthesize(&self.advance(&c, t)))
    }

    /// `max_k ‖H v_k − E_k v_k‖`.
    pub fn max_residual(&self, h: &SparseHermitianOperator) -> f64 {
        let mut worst: f64 = 0.0;
        let mut hv = vec![ZERO; self.dim()];
        for k in 0..self.dim() {
            let v = self.eigenvector(k);
            h.apply(v.amplitudes(), &mut hv);
            let r: f64 = hv
                .iter()
                .zip(v.amplitudes())
                .map(|(a, b)| (a - b * self.eigenvalues[k]).norm_sqr())
                .sum();
            worst = worst.max(r.sqrt());
        }
        worst
    }

    /// `max |V†V − I|` entrywise.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                let dot: Complex64 =
                    (0..n).map(|i| self.vector_entry(i, a).conj() * self.vector_entry(i, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

/// `e^{-iHt} ψ₀` from a precomputed decomposition.
pub fn evolve_spectral(
    d: &SpectralDecomposition,
    psi0: &StateVector,
    t: f64,
) -> Result<StateVector> {
    d.evolve(psi0, t)
}

const KRYLOV_DIM: usize = 30;
const KRYLOV_MAX_HALVINGS: usize = 16;

/// Lanczos propagation with the step count doubled until two successive
/// refinements agree to `tol` in 2-norm.
pub fn evolve_krylov(
    h: &SparseHermitianOperator,
    psi0: &StateVector,
    t: f64,
    tol: f64,
) -> Result<StateVector> {
    h.basis().ensure_same(psi0.basis())?;
    if !(tol > 0.0) {
        return param(format!("Krylov tolerance must be positive, got {tol}"));
    }
    if t == 0.0 {
        return Ok(psi0.clone());
    }
    let bound = h.gershgorin_bound();
    if bound == 0.0 {
        return Ok(psi0.clone());
    }
    let mut steps = ((bound * t.abs()) / 8.0).ceil().max(1.0) as usize;
    let mut coarse = krylov_propagate(h, psi0.amplitudes(), t, steps)?;
    let mut achieved = f64::INFINITY;
    for _ in 0..KRYLOV_MAX_HALVINGS {
        steps *= 2;
        let fine = krylov_propagate(h, psi0.amplitudes(), t, steps)?;
        achieved = coarse.iter().zip(&fine).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        if achieved <= tol {
            return StateVector::new(psi0.basis().clone(), fine);
        }
        coarse = fine;
    }
    Err(Error::NonConvergence { achieved, tol })
}

fn krylov_propagate(
    h: &SparseHermitianOperator,
    x: &[Complex64],
    t: f64,
    steps: usize,
) -> Result<Vec<Complex64>> {
    let dt = t / steps as f64;
    let mut v = x.to_vec();
    for _ in 0..steps {
        v = lanczos_exp(h, &v, dt)?;
    }
    Ok(v)
}

/// One `e^{-iH dt} v` via a Lanczos basis with full reorthogonalization.
fn lanczos_exp(h: &SparseHermitianOperator, v: &[Complex64], dt: f64) -> Result<Vec<Complex64>> {
    let n = v.len();
    let beta0 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if beta0 == 0.0 {
        return Ok(v.to_vec());
    }
    let m_max = KRYLOV_DIM.min(n);
    let mut q: Vec<Vec<Complex64>> = vec![v.iter().map(|a| a / beta0).collect()];
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![ZERO; n];
    let scale = h.gershgorin_bound().max(1.0);
    for j in 0..m_max {
        h.apply(&q[j], &mut w);
        let a: f64 = q[j].iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        alpha.push(a);
        // twice-iterated Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for qk in &q {
                let proj: Complex64 = qk.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                w.iter_mut().zip(qk).for_each(|(y, x)| *y -= proj * x);
            }
        }
        let b = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if j + 1 == m_max || b <= 1e-13 * scale {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|a| a / b).collect());
    }
    let m = alpha.len();
    let mut t = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("Lanczos eigensolver: {e:?}")))?;
    let (s, u) = (evd.S(), evd.U());
    // y = e^{-iT dt} e₀
    let y: Vec<Complex64> = (0..m)
        .map(|i| {
            (0..m)
                .map(|l| Complex64::from_polar(u[(0, l)] * u[(i, l)], -s[l] * dt))
                .sum::<Complex64>()
        })
        .collect();
    let mut out = vec![ZERO; n];
    for (yi, qi) in y.iter().zip(&q) {
        out.iter_mut().zip(qi).for_each(|(o, x)| *o += yi * x * beta0);
    }
    Ok(out)
}

/// A two-site unitary in the ordered basis `{↑↑, ↑↓, ↓↑, ↓↓}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitGate {
    pub matrix: [[Complex64; 4]; 4],
}

/// `exp(-iπ(SˣSˣ + SʸSʸ)/2) · exp(-iπ SᶻSᶻ)` in closed form.
///
/// The exchange exponent is zero on `↑↑`, `↓↓` and `σˣ/2` on `{↑↓, ↓↑}`, so it
/// exponentiates to `(1 − iσˣ)/√2` there. The Ising factor is `e^{∓iπ/4}` on
/// aligned/anti-aligned pairs.
pub fn build_two_qubit_gate() -> TwoQubitGate {
    let aligned = Complex64::from_polar(1.0, -PI / 4.0);
    let anti = Complex64::from_polar(1.0, PI / 4.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let diag = anti * s;
    let off = anti * Complex64::new(0.0, -s);
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = aligned;
    m[3][3] = aligned;
    m[1][1] = diag;
    m[2][2] = diag;
    m[1][2] = off;
    m[2][1] = off;
    TwoQubitGate { matrix: m }
}

impl TwoQubitGate {
    /// Position of the two-spin configuration in the gate basis.
    #[inline]
    fn slot(first_up: bool, second_up: bool) -> usize {
        2 * usize::from(!first_up) + usize::from(!second_up)
    }

    pub fn mul(&self, other: &TwoQubitGate) -> TwoQubitGate {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = (0..4).map(|k| self.matrix[i][k] * other.matrix[k][j]).sum();
            }
        }
        TwoQubitGate { matrix: m }
    }

    /// `max |U†U − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let dot: Complex64 = (0..4).map(|k| self.matrix[k][i].conj() * self.matrix[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    /// Block-diagonal over two-site magnetization `{↑↑}, {↑↓, ↓↑}, {↓↓}`.
    pub fn conserves_magnetization(&self) -> bool {
        let sector = [2, 1, 1, 0];
        (0..4).all(|i| (0..4).all(|j| sector[i] == sector[j] || self.matrix[i][j] == ZERO))
    }
}

/// Apply `gate` on the ordered site pair `(first, second)` in place.
pub fn apply_gate(
    psi: &mut StateVector,
    first: usize,
    second: usize,
    gate: &TwoQubitGate,
) -> Result<()> {
    let len = psi.len();
    if first >= len || second >= len || first == second {
        return param(format!("invalid gate sites ({first}, {second}) for L = {len}"));
    }
    let (bf, bs) = (1u32 << first, 1u32 << second);
    let m = &gate.matrix;
    match psi.basis().clone() {
        Basis::Full { .. } => {
            let amps = psi.amplitudes_mut();
            for base in 0..amps.len() as u32 {
                if base & (bf | bs) != 0 {
                    continue;
                }
                let idx = [base | bf | bs, base | bf, base | bs, base].map(|x| x as usize);
                let a = idx.map(|i| amps[i]);
                for (r, &i) in idx.iter().enumerate() {
                    amps[i] = (0..4).map(|c| m[r][c] * a[c]).sum();
                }
            }
        }
        Basis::Sector(sector) => {
            if !gate.conserves_magnetization() {
                return Err(Error::BasisMismatch(
                    "gate mixes magnetization sectors; apply it in the full basis".into(),
                ));
            }
            let amps = psi.amplitudes_mut();
            for (idx, &mask) in sector.states().iter().enumerate() {
                let f_up = mask & bf != 0;
                let s_up = mask & bs != 0;
                if f_up == s_up {
                    let k = TwoQubitGate::slot(f_up, s_up);
                    amps[idx] *= m[k][k];
                } else if f_up {
                    // visit each anti-aligned pair once, from its ↑↓ member
                    let partner = sector
                        .index_of(mask ^ bf ^ bs)
                        .expect("exchange partner has the same popcount");
                    let (a_ud, a_du) = (amps[idx], amps[partner]);
                    amps[idx] = m[1][1] * a_ud + m[1][2] * a_du;
                    amps[partner] = m[2][1] * a_ud + m[2][2] * a_du;
                }
            }
        }
    }
    Ok(())
}

/// Apply the gate to a uniformly chosen bond `(i, i+1 mod L)`; returns `i`.
pub fn rqc_step<R: Rng + ?Sized>(
    psi: &mut StateVector,
    gate: &TwoQubitGate,
    rng: &mut R,
) -> Result<usize> {
    let len = psi.len();
    let i = rng.random_range(0..len);
    apply_gate(psi, i, (i + 1) % len, gate)?;
    Ok(i)
}

/// One drive period `e^{-iT0 H0} e^{-iT1 H1}` with a diagonal `H0`.
#[derive(Clone, Debug)]
pub struct FloquetMap {
    pub t0: f64,
    pub t1: f64,
    h0_diag: Vec<f64>,
    h1: Arc<SpectralDecomposition>,
}

pub const FLOQUET_T0: f64 = 1.0;
pub const FLOQUET_T1: f64 = 2.5;

impl FloquetMap {
    /// `h1` is typically disorder-free and shared across realizations.
    pub fn new(
        h0: &SparseHermitianOperator,
        h1: Arc<SpectralDecomposition>,
        t0: f64,
        t1: f64,
    ) -> Result<Self> {
        h0.basis().ensure_same(h1.basis())?;
        if !h0.is_diagonal() {
            return param("drive part H0 must be diagonal in the computational basis");
        }
        Ok(Self { t0, t1, h0_diag: h0.diagonal(), h1 })
    }

    pub fn basis(&self) -> &Basis {
        self.h1.basis()
    }

    pub fn dim(&self) -> usize {
        self.h0_diag.len()
    }
}

/// Advance one period in place: hopping first, then the diagonal phase.
pub fn floquet_step(psi: &mut StateVector, map: &FloquetMap) -> Result<()> {
    map.basis().ensure_same(psi.basis())?;
    if map.t1 != 0.0 {
        *psi = map.h1.evolve(psi, map.t1)?;
    }
    if map.t0 != 0.0 {
        for (a, &e) in psi.amplitudes_mut().iter_mut().zip(&map.h0_diag) {
            *a *= Complex64::from_polar(1.0, -reduced_phase(e, map.t0));
        }
    }
    Ok(())
}

pub struct FloquetSpectrum {
    pub unitary: Mat<c64>,
    /// `θ_k` with eigenvalues `e^{-iθ_k}`, in `[-π, π)`, ascending.
    pub quasienergies: Vec<f64>,
    /// `max_k ||λ_k| − 1|`.
    pub max_modulus_error: f64,
}

/// Dense `F` and its quasienergies.
pub fn materialize_floquet_unitary(map: &FloquetMap, cap: usize) -> Result<FloquetSpectrum> {
    let n = map.dim();
    if n > cap {
        return Err(Error::Capacity { dim: n, cap });
    }
    let d = &map.h1;
    let v = Mat::<c64>::from_fn(n, n, |i, k| d.vector_entry(i, k));
    let phased = Mat::<c64>::from_fn(n, n, |i, k| {
        d.vector_entry(i, k) * Complex64::from_polar(1.0, -reduced_phase(d.eigenvalues()[k], map.t1))
    });
    let u1 = &phased * v.adjoint();
    let unitary = Mat::<c64>::from_fn(n, n, |i, j| {
        Complex64::from_polar(1.0, -reduced_phase(map.h0_diag[i], map.t0)) * u1[(i, j)]
    });
    let eig = unitary
        .eigenvalues()
        .map_err(|e| Error::LinAlg(format!("Floquet eigenvalues: {e:?}")))?;
    let max_modulus_error = eig.iter().fold(0.0f64, |m, z| m.max((z.norm() - 1.0).abs()));
    let mut quasienergies: Vec<f64> = eig.iter().map(|z| wrap_angle(-z.arg())).collect();
    quasienergies.sort_by(f64::total_cmp);
    Ok(FloquetSpectrum { unitary, quasienergies, max_modulus_error })
}
