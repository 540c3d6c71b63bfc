//! The projected product (P U(t/N) P)^N and its diagnostics.

pub mod convergence;
pub mod engine;
pub mod leakage;
pub mod matrix_elements;

pub use convergence::{convergence_experiment, ConvergencePoint, ConvergenceReport};
pub use engine::{
    build_reference_basis, zeno_evolve, zeno_product, zeno_step, InitialState, ReferenceSource, ZenoRunConfig,
    ZenoSession, ZenoTrajectory,
};
pub use leakage::{leakage, operator_leakage_norm};
pub use matrix_elements::{matrix_elements, MatrixElementTable};
