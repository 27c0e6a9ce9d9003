//! Numerical laboratory for sourced continuity equations and Ehrenfest
//! relations of Schrödinger and complex Klein-Gordon fields in external
//! scalar potentials.

pub mod error;
pub mod exec;
pub mod fieldgrid;
pub mod kleingordon;
pub mod linalg;
pub mod observables;
pub mod potential;
pub mod scenario;
pub mod schrodinger;
pub mod verify;

pub use error::{Error, Result};
