//! Finite-difference simulation of nonlinear ultrasonic heating.
//!
//! The acoustic pressure follows a Westervelt equation whose sound speed
//! depends on temperature; the temperature follows a hyperbolic
//! (Cattaneo) or parabolic (Fourier) Pennes bioheat equation driven by the
//! absorbed acoustic energy. Both fields carry homogeneous Dirichlet data on
//! a rectangular box.
//!
//! Modules, bottom-up:
//!
//! - [`grid`]: tensor grid, central-difference operators, quadrature norms.
//! - [`linalg`]: CSR operators, Jacobi-preconditioned CG, Thomas solver,
//!   inverse power iteration.
//! - [`medium`]: physical parameters and the temperature-dependent
//!   coefficients.
//! - [`acoustic`], [`thermal`]: implicit three-level steppers.
//! - [`simulate`]: the coupled time loop, manufactured-solution and
//!   relaxation-limit studies.
//! - [`energy`]: energy/dissipation functionals, decay fits and
//!   Gronwall certificates.
//! - [`analysis`]: empirical checks of the interpolation inequalities.

pub mod acoustic;
pub mod analysis;
pub mod energy;
pub mod grid;
pub mod linalg;
pub mod medium;
pub mod simulate;
pub mod thermal;

pub use grid::{Grid, GridFunction, NormBundle};
pub use medium::MediumParams;
