//! Discretized ordered space, chains, weights and truncated Fock vectors.

pub mod chain;
pub mod lattice;
pub mod vector;
pub mod weight;

pub use chain::{chains_within, Chain, MAX_POINTS};
pub use lattice::{build_lattice, interleave_permutation, uniform_lattice, Basis, Lattice, LatticePoint};
pub use vector::{chain_weight, norm, pairing, FockVector};
pub use weight::{admissible_p, WeightClass, WeightFunction};
