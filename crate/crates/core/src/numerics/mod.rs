//! Discretization and linear-algebra substrate.

pub mod eigen;
pub mod field;
pub mod fourier;
pub mod grid;
pub mod ode;
pub mod operator;
pub mod quadrature;
pub mod reduce;
pub mod solve;
