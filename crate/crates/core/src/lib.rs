//! Numerical laboratory for scalar semilinear parabolic equations
//! `u_t = u_xx + g(t, x, u, u_x)` on periodic domains.
//!
//! The crate integrates such equations on uniform grids made of unit cells,
//! counts and tracks the zeroes of differences of solutions, and checks the
//! balance of zero count, flux and dissipation, the ordered family of
//! time-periodic Burgers orbits and their attractivity, and the same
//! statements at the level of shift-invariant ensembles.

pub mod burgers;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod nodal;
pub mod quadrature;
pub mod suite;
pub mod trajectory;

pub use error::{Error, Result};
