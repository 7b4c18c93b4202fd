//! Numerical laboratory for analysis on rotationally symmetric manifolds of
//! pinched negative curvature: minimal Green's functions, Poisson problems
//! with decaying data, spectral gaps, Dirichlet heat kernels and the
//! normalized Ricci flow on surfaces.

pub mod error;
pub mod geometry;
pub mod green;
pub mod heat;
pub mod numerics;
pub mod poisson;
pub mod ricciflow;
pub mod spectrum;

pub use error::{Error, Result};
pub use geometry::{RadialProfile, WarpedModel, Warping};
pub use numerics::field::{Decay, RadialField, ScalarField};
pub use numerics::grid::{GridSpec, PolarGrid};
pub use numerics::operator::{discrete_laplacian, SparseOperator};
