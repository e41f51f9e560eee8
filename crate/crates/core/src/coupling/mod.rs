//! ODE problems, boundary conditions, and the map from boundary conditions to
//! the spline's boundary-derivative coefficients.

mod alphas;
mod boundary;
pub mod newton;
mod problem;

pub use alphas::{
    resolve_alphas, resolve_alphas_fourth_order, resolve_alphas_second_order, AlphaResolution,
    AlphaSet,
};
pub use boundary::{BoundaryFunction, BoundarySpec};
pub use problem::{OdeProblem, Partials};
