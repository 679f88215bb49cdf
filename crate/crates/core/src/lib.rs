//! Hybrid FE² solver: periodic RVE finite elements, a POD-DeepONet cell
//! surrogate and a macroscale Newton driver that runs on either.

pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod macroscale;
pub mod mechanics;
pub mod net;
pub mod pipeline;
pub mod pod;
pub mod quad4;
pub mod rve;
pub mod surrogate;
pub mod vtk;

pub use error::{Error, Result};
