//! Spin-chain dynamics with entanglement measured across every inequivalent
//! bipartition, and least-squares extraction of bond tensions.

pub mod bipartition;
pub mod entanglement;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod operators;
pub mod spectral_stats;
pub mod spin_basis;
pub mod stats;
pub mod tomography;

pub use bipartition::{Bipartition, CrossedBondVector, RepresentativeSet};
pub use error::{Error, Result};
pub use evolution::{FloquetMap, SpectralDecomposition, TwoQubitGate};
pub use operators::{CouplingParams, DisorderRealization, SparseHermitianOperator};
pub use spectral_stats::RatioStats;
pub use spin_basis::{Basis, BasisState, SectorBasis, StateVector};
pub use stats::MeanStderr;
pub use tomography::{DesignMatrix, FitResult};
