//! Differential-algebraic power-system simulation with impasse-surface
//! monitoring.
//!
//! The network side works on dense complex admittance matrices
//! ([`netmodel`]); machines and loads live in [`devices`]; [`algebraic`]
//! evaluates the power-flow constraint and its Jacobian; [`impasse`] holds the
//! admittance-matrix tests for singularity of that Jacobian; [`simulator`]
//! integrates the whole thing in time.

pub mod algebraic;
pub mod devices;
pub mod error;
pub mod impasse;
pub mod linalg;
pub mod netmodel;
pub mod numerics;
pub mod simulator;

pub use algebraic::{AlgebraicState, PowerSystem, StateLayout, SystemState};
pub use error::{Error, Result};
pub use netmodel::{AdmittanceSet, Bus, BusKind, Line, NetworkCase};
