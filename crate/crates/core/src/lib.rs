//! Projected free evolution ("Zeno dynamics") on bounded domains.
//!
//! A free particle is evolved on a padded periodic grid and repeatedly
//! projected back onto a domain. The crate provides the propagator, the
//! projected product and its diagnostics, Dirichlet spectra for the
//! comparison, thin-domain reductions and the projected operator product.

pub mod algebra;
pub mod dense;
pub mod domain;
pub mod error;
pub mod fit;
pub mod grid;
pub mod pgm;
pub mod propagator;
pub mod reduction;
pub mod spectra;
pub mod wavefunction;
pub mod zeno;

pub use domain::{characteristic_mask, Domain, Mask, MaskRaster};
pub use error::{ErrorClass, Result, ZenoError};
pub use grid::{Axis, Grid, PhysicalUnits};
pub use propagator::{kernel_evolve, SpectralPropagator};
pub use wavefunction::WaveFunction;

pub use num_complex::Complex64;
