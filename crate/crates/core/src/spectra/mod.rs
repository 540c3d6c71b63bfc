//! Dirichlet spectra: closed forms, Bessel roots and a finite-difference oracle.

pub mod angular;
pub mod basis;
pub mod bessel;
pub mod fd;
pub mod radial;
pub mod rectangle;
pub mod roots;

pub use angular::{angular_modes, AngularFamily, AngularMode};
pub use basis::{BasisEntry, QuantumNumberLabel, Representation, SpectralBasis, SpectrumSource};
pub use fd::{fd_dirichlet_eigs, fd_dirichlet_eigs_with, FdOptions};
pub use radial::{annulus_modes, annulus_spectrum, sector_spectrum, shell_radial_modes, shell_spectrum, RadialMode};
pub use rectangle::{interval_modes, rectangle_energy, rectangle_modes};
