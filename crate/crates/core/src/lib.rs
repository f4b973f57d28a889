//! Plasmon-polariton eigenmodes of a finite, inhomogeneous, dispersive and
//! absorbing medium, built by solving Lippmann-Schwinger equations on a
//! discretized spectral grid.

// `!(x > 0.0)` is used throughout to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod operator;
pub mod perturbation;
pub mod quadrature;
pub mod regularization;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use model::{DielectricModel, LorentzTerm, MediumModel, PhysicalConstants, Shape, UnitSystem, Voxel};
pub use operator::{BlockVector, OperatorHandle};
pub use regularization::{Regularization, RegularizationPolicy, Sign};
pub use solver::{Family, PolaritonEigenfunction, SolveMethod};
pub use spectral::{build_grids, GridConfig, SpectralGrid};
