//! Simulation of hybrid photon-atom CNOT, Fredkin and Toffoli gates built
//! from single-sided cavities holding Λ-type atoms.
//!
//! The crate is layered bottom-up: [`state`] holds the photon-atom state
//! vector, [`elements`] and [`cavity`] act on it, [`circuits`] assembles the
//! gates, [`metrics`] scores them, and [`cli`] drives everything from the
//! command line.

pub mod cavity;
pub mod circuits;
pub mod cli;
pub mod elements;
pub mod metrics;
pub mod state;

pub use cavity::{CavityParams, ScatterCoeffs};
pub use circuits::{Circuit, GateKind, GateVariant, Mode};
pub use elements::{ElementStep, HwpAngle, MergePolicy};
pub use state::{Amplitude, AtomGround, BasisKet, HybridState, LineLabel, Polarization};
