//! Classical simulation of magic-state quantum circuits through exact
//! convex-geometric state decompositions.
//!
//! A quantum state over `n` magic qubits is represented as an exact convex
//! combination of vertices of the polytope of unit-trace Hermitian operators
//! with nonnegative overlap against every pure stabilizer state. Pauli
//! measurements become stochastic transitions between vertices, so a circuit
//! run is a random walk over a finite phase space. The crate provides:
//!
//! - exact scalar arithmetic over Q and Q(sqrt 2) ([`scalar`]);
//! - the Pauli group with a Hermitian phase convention and Clifford
//!   tableaux ([`pauli`], [`clifford`]);
//! - stabilizer-state enumeration and counting formulas ([`stabilizer`]);
//! - the polytope machinery: facet systems, exact LP vertex search,
//!   Caratheodory decomposition, measurement updates, vertex enumeration
//!   ([`polytope`]);
//! - the circuit samplers with transcript and memory-ledger reporting
//!   ([`hvm`]);
//! - counting bounds on the phase-space size ([`bounds`]);
//! - an independent dense quantum-mechanical oracle ([`oracle`]).
//!
//! Everything geometric is exact; floating point appears only when converting
//! a probability for a pseudo-random draw and in report output.

pub mod bounds;
pub mod clifford;
pub mod error;
pub mod herm;
pub mod hvm;
pub mod linalg;
pub mod oracle;
pub mod pauli;
pub mod polytope;
pub mod scalar;
pub mod stabilizer;

pub use error::{Error, Result};
pub use scalar::{QSqrt2, Rational};
