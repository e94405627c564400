//! Simulation and reconstruction toolkit for continuous-variable quantum
//! process and detector tomography with squeezed probe states.
//!
//! The crate simulates homodyne tomography runs in which a quantum channel
//! (or a photon detector) is probed by an ensemble of displaced, rotated
//! squeezed states, and reconstructs the process matrix chi_{km,ln} (or the
//! POVM elements Pi^k) by averaging loss-compensating pattern functions over
//! the recorded quadrature data. Exact Kraus/Choi oracles for a library of
//! channels and detectors are included so every estimate can be validated.

pub mod channel;
pub mod detector;
pub mod error;
pub mod estimate;
pub mod fock;
pub mod gaussian;
pub mod homodyne;
pub mod linalg;
pub mod mc;
pub mod pattern;
pub mod probe;
pub mod quad;
pub mod validate;

pub use error::{Error, Result};
pub use fock::FockOperator;
