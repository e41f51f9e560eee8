//! Interpolating cubic and quintic splines with prescribed boundary derivatives.

mod basis;
mod clamped;
mod grid;
mod piecewise;
mod recursive;
mod roots;

pub use basis::{basic_clamped_set, basic_clamped_set_with, combine_basis, SplineBasisSet};
pub use clamped::{build_clamped, clamp_cubic_by_shooting, ClampedBuilder};
pub use grid::{make_knots, uniform_points, KnotGrid, KnotMode};
pub use piecewise::PiecewisePolynomial;
pub use recursive::build_recursive;
pub use roots::derivative_roots;

