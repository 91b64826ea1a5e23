//! Convergence analysis of parallel Schwarz methods for time-harmonic waves
//! with natural damping.
//!
//! The crate covers the damped Helmholtz coefficient ([`model`]), strip
//! decompositions ([`geometry`]), Fourier analysis of the interface iteration
//! ([`mode_analysis`]) with its eigenvalue backend ([`spectra`]), a
//! finite-difference solver ([`fd`]), a discrete Schwarz runner used to
//! validate the predictions end to end ([`schwarz`]), and the sweep/export
//! layer behind the command-line tool ([`sweep`], [`output`], [`validation`]).

pub mod error;
pub mod fd;
pub mod geometry;
pub mod mode_analysis;
pub mod model;
pub mod output;
pub mod schwarz;
pub mod spectra;
pub mod sweep;
pub mod validation;

pub use error::{Error, Result};
pub use geometry::Decomposition;
pub use mode_analysis::{
    assemble_iteration_matrix, convergence_factor, convergence_factor_profile, lambda_of, max_mode_rho,
    BoundaryConfig, IterationMatrix, ModeFactor, ModeProblem, Problem, Side, XiGrid,
};
pub use model::{compute_eta, principal_sqrt, DampedCoefficient, PhysicalParams, Regime};
pub use num_complex::Complex64;
pub use spectra::{power_iteration_radius, spectral_radius, DenseComplexMatrix};
