//! Pulse synthesis for qubit arrays with always-on ZZ coupling.
//!
//! Driving a suitable subset of an array splits its Hamiltonian into
//! mutually commuting star-shaped blocks: a driven center plus its undriven
//! neighbours. Each block is small enough to simulate exactly, so a pulse
//! can be optimized per block to enact a target gate on the center while
//! returning every boundary qubit to identity. The crate covers
//!
//! * [`lattice`]: coupling graphs, driving patterns and block decomposition;
//! * [`hamiltonian`]: Pauli embeddings and the piecewise-constant block
//!   Hamiltonian with its control derivatives;
//! * [`propagation`]: time evolution, trace fidelity and exact gradients;
//! * [`robust`]: parameter hypercubes and the worst-case / average-fidelity
//!   pulse optimizers;
//! * [`calibration`]: bare-frequency recovery from one- and two-photon
//!   peak positions;
//! * [`compiler`]: scheduling circuits as sequences of driving patterns.
//!
//! Energies are in units of the nominal coupling `J̄` and times in `1/J̄`.
//! The crate is `no_std` (with `alloc`) unless the `std` feature is on.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod calibration;
pub mod compiler;
mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod propagation;
pub mod robust;

pub use error::{Error, Result};
