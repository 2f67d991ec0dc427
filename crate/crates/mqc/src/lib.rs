//! Compilation of layered two-qubit circuits into multi-qubit Ising (ZZ) gate
//! layers with small nuclear norm, plus a Pauli-trajectory statevector
//! simulator for quantum-volume benchmarks.
//!
//! Pipeline: [`cartan`] and [`lhdecomp`] factor SU(4) blocks, [`pullback`]
//! rewrites LH factors so both ends are ZZ rotations, [`optimizer`] assembles
//! [`circuit_ir::CompiledCircuit`]s of [`mqlayer::MQLayer`]s, and [`sim`]
//! evaluates them under the [`noise`] models.

pub mod cartan;
pub mod circuit_ir;
pub mod lhdecomp;
pub mod linalg;
pub mod mqlayer;
pub mod noise;
pub mod optimizer;
pub mod pullback;
pub mod sim;

pub use circuit_ir::{CircuitIR, CompiledCircuit};
pub use linalg::{phase_distance, ComplexMatrix, C64, M2, M4};
