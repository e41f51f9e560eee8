//! Solve nonlinear two-point boundary value problems by minimizing the ODE
//! residual over interpolating cubic or quintic splines.
//!
//! The unknowns are the spline's knot values. The boundary derivatives of the
//! spline are not free: they are recovered from the boundary conditions (and,
//! where needed, the ODE itself at the endpoints) every time the spline is
//! rebuilt, so every candidate satisfies the boundary conditions exactly.
//!
//! Layout:
//! - [`spline`]: knot grids, piecewise polynomials, recursive and clamped
//!   construction, the basic clamped basis.
//! - [`coupling`]: problem and boundary definitions, Newton solves that map
//!   boundary conditions to spline end derivatives.
//! - [`gradient`]: residual loss and its gradient with respect to the knot values.
//! - [`optimize`]: L-BFGS with a strong-Wolfe line search.
//! - [`solver`]: full solves and the knot escalation / relocation strategies.
//! - [`bench`]: built-in manufactured problems, error metrics, rate estimates.

pub mod bench;
pub mod coupling;
pub mod error;
pub mod gradient;
pub mod io;
pub mod optimize;
pub mod solver;
pub mod spline;

pub use error::{Error, Result};
