//! P1 finite elements for the monodomain equations with Aliev-Panfilov
//! kinetics: implicit Euler plus Newton-Galerkin time stepping, residual a
//! posteriori indicators and the verification studies built on them.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod io;
pub mod ionic;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
