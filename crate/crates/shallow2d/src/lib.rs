//! Simulation of shallow 2D random quantum circuits.
//!
//! Lattice sites are `(row, col)` with both coordinates 0-based. Dense
//! vectors over a set of sites list the sites in row-major order, first site
//! most significant. Every qudit starts in basis state 0. Entropies are in
//! bits; stat-mech couplings use natural logarithms.

pub mod architecture;
pub mod cli;
pub mod effective1d;
pub mod error;
pub mod mps;
pub mod oracle;
pub mod patching;
pub mod rng;
pub mod sebd;
pub mod stats;
pub mod statmech;
pub mod tensor;

pub use error::{Error, Result};
