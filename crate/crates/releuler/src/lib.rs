// Tensor-index code reads best with explicit loops and indexed access.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]
#![allow(clippy::type_complexity)]

//! Simulation and verification laboratory for the 3D relativistic Euler
//! equations on periodic boxes: equivalent formulations (first-order
//! symmetric, wave-transport, vorticity transport, elliptic velocity
//! split), exact identity checks on formal solution jets, and convergence
//! checks on pseudo-spectral trajectories.

pub mod algebra;
pub mod analysis;
pub mod dynamics;
pub mod eos;
pub mod fields;
pub mod geometry;
pub mod error;
pub mod fluidvars;
pub mod grid;
pub mod hyperbolic;
pub mod identities;
pub mod jet;
pub mod minkowski;
pub mod taylor;
pub mod vorticity;

pub use error::{Error, Result};
