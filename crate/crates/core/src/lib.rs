//! Spectral viscosity approximation of the 2D incompressible Euler equations
//! and Monte Carlo computation of approximate measure-valued solutions.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod initial;
pub mod io;
pub mod solver;
pub mod spectral;
pub mod statistics;

pub use error::{Error, Result};
