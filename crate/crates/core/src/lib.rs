//! Numerical laboratory for the spectrum of nonlocal Dirichlet operators
//! `u - J*u` on bounded open sets.
//!
//! The crate discretizes the convolution operator by midpoint Nystrom
//! quadrature on a shared container grid, decomposes the resulting symmetric
//! matrices with a cyclic Jacobi solver, and drives the experiment suite:
//! eigenvalue continuity under domain perturbation, shape derivatives of
//! simple eigenvalues, isoperimetric orderings, and the perforated-domain
//! homogenization limit.

pub mod domain;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod report;
pub mod shape;
pub mod spectral;
pub mod svg;

/// Planar point; one-dimensional geometry uses the first slot and keeps the
/// second at exactly zero.
pub type Point = [f64; 2];

pub use domain::{
    ball_of_same_measure, boundary_quadrature, symmetric_difference_measure, BallSpec,
    BoundarySample, DomainSpec, HoleShape, MapSpec, Measure, VectorField,
};
pub use error::{
    DomainError, ExperimentError, KernelError, OperatorError, ShapeError, SpectralError,
};
pub use kernel::{KernelFamily, KernelSpec, Smoothness};
pub use operator::{
    assemble, lambda1_matrix_free, lipschitz_bound, operator_norm_diff, read_operator_dump,
    write_operator_dump, ContainerGrid, DiscreteOperator,
};
pub use spectral::{
    detect_simple_systems, eigendecompose, eigendecompose_with, rayleigh_lambda1, Spectrum,
};
