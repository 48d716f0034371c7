//! Field-effect detected magnetic resonance of NV ensembles.
//!
//! The crate chains an NV photophysics rate model, a local carrier balance,
//! a 2D nonlinear Poisson solve of the biased contact pair and thermionic
//! emission over the reverse-biased barrier to predict photocurrent, its
//! RF contrast and the depletion-region images.

pub mod carriers;
pub mod config;
pub mod constants;
pub mod electrostatics;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod model;
pub mod photophysics;
pub mod transport;
