//! Quantum-classical fidelity of the perturbed cat map on the 2-torus.
//!
//! The crate quantises the map `p' = p + k q + eps . V'(q)`, `q' = q + p'`
//! on an `N`-dimensional Hilbert space, evolves Gaussian packet densities
//! and coherent states side by side, and measures their phase-space overlap
//! `F(t) = sum W_{phi^t} rho^t` together with its perturbative pieces.

pub mod classical;
pub mod error;
pub mod fidelity;
pub mod hilbert;
pub mod propagator;
pub mod scaling;
pub mod weyl;

pub use classical::{lyapunov, MapParams, Packet, PhasePoint};
pub use error::{Error, Result};
pub use hilbert::{HilbertDim, StateVector};
pub use propagator::{Convention, Propagator};
pub use weyl::{DenseOperator, GridFunction};
