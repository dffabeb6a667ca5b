//! Quantum hydrodynamics in one dimension: Lagrangian fluid elements moved
//! by classical and quantum forces, with meshfree derivative estimation,
//! plus a sine-DVR reference solver and closed-form oracles.

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod dvr;
pub mod lagrangian;
pub mod mwls;
pub mod qcore;
pub mod runner;

pub use lagrangian::{Dynamics, DynamicsError, HydroState, MwlsSettings, StepController, StepDiagnostics};
pub use mwls::{BasisFamily, BasisSpec, FitError, FitResult};
pub use qcore::{Ensemble, FluidElement, PhysicalSystem, Potential, HARTREE_TO_WAVENUMBER, HBAR};
