//! Quantum stochastic calculus on truncated Guichardet-Fock spaces over a
//! finite, strictly time-ordered lattice.
//!
//! Vectors are functions on chains (finite ordered point sets) with values in
//! the initial space tensored with the multiplicity spaces of the chain's
//! points. On top of that sit the point splitter and Skorokhod integrals, the
//! four fundamental processes, single and multiple QS integrals with their
//! weighted norms, Q-adapted processes and g-commutators, and a dense oracle
//! used to cross-check all of them.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod multi_qs;
pub mod oracle;
pub mod q_adapted;
pub mod sample;
pub mod scalar;
pub mod single_qs;
pub mod space;
pub mod splitter;
pub mod suites;

pub use error::{QsError, Result};
pub use linalg::Matrix;
pub use scalar::{Real, C};
pub use space::{Chain, FockVector, Lattice, LatticePoint, WeightFunction};

pub type Lattice64 = Lattice<f64>;
pub type Lattice32 = Lattice<f32>;
pub type FockVector64 = FockVector<f64>;
pub type FockVector32 = FockVector<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type WeightFunction64 = WeightFunction<f64>;
pub type WeightFunction32 = WeightFunction<f32>;
