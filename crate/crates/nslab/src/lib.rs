//! Desk-scale laboratory for the incompressible Navier–Stokes equations on a
//! periodic box: divergence-free data (including discretely self-similar
//! data), a pseudo-spectral solver with energy bookkeeping, and the
//! regularity quantities evaluated on its trajectories.
pub mod ckn;
pub mod cli;
pub mod config;
pub mod dss;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod localization;
pub mod norms;
pub mod pressure;
pub mod semigroup;
pub mod solver;

pub use error::{LabError, Result};
pub use grid::{GridSpec, ScalarField, SpectralField};
