//! Newton–Raphson for the small (at most 4x4) boundary systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 50;
const MAX_CONDITION: f64 = 1e14;
const MAX_HALVINGS: usize = 30;
/// Relative Newton step treated as converged once the residual stops falling.
const STEP_TOL: f64 = 1e-12;
/// Residual accepted at the rounding floor even when above the requested tol.
const FLOOR_TOL: f64 = 1e-8;

/// How the Jacobian is obtained.
pub enum Jacobian<'a> {
    Analytic(&'a dyn Fn(&[f64], &mut DMatrix<f64>)),
    /// Central differences with step `1e-7 (1 + |x_k|)`.
    CentralDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, r| m.max(r.abs()))
}

/// Solve `system(x) = 0` from `x0` until `max |system(x)| <= tol`.
///
/// A step that does not reduce the residual is halved (up to 30 times). If
/// the residual stops falling while the Newton step is negligible, the
/// iterate is accepted as converged to rounding.
pub fn newton_solve(
    system: &dyn Fn(&[f64], &mut [f64]),
    jacobian: Jacobian<'_>,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NewtonSolution> {
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; dim];
    system(&x, &mut r);
    let mut norm = inf_norm(&r);
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    let mut trial = vec![0.0; dim];
    let mut r_trial = vec![0.0; dim];
    let mut iterations = 0;
    while iterations < max_iter {
        if norm <= tol {
            break;
        }
        if !norm.is_finite() {
            break;
        }
        match jacobian {
            Jacobian::Analytic(f) => f(&x, &mut jac),
            Jacobian::CentralDifference => central_jacobian(system, &x, &mut jac),
        }
        let condition = condition_estimate(&jac);
        if condition > MAX_CONDITION {
            return Err(Error::SingularSystem { condition });
        }
        let rhs = DVector::from_iterator(dim, r.iter().map(|v| -v));
        let step = jac
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularSystem {
                condition: f64::INFINITY,
            })?;
        let mut t = 1.0;
        for _ in 0..=MAX_HALVINGS {
            for k in 0..dim {
                trial[k] = x[k] + t * step[k];
            }
            system(&trial, &mut r_trial);
            let n_trial = inf_norm(&r_trial);
            if n_trial < norm || !(t > 1e-9) {
                break;
            }
            t *= 0.5;
        }
        let n_trial = inf_norm(&r_trial);
        if !(n_trial < norm) {
            // No decrease along the Newton direction. A full step that no
            // longer moves x means the residual sits at its rounding floor.
            let tiny = (0..dim).all(|k| step[k].abs() <= STEP_TOL * (1.0 + x[k].abs()));
            if tiny && norm <= FLOOR_TOL {
                return Ok(NewtonSolution {
                    x,
                    iterations,
                    residual: norm,
                });
            }
            break;
        }
        x.copy_from_slice(&trial);
        r.copy_from_slice(&r_trial);
        norm = n_trial;
        iterations += 1;
    }
    if norm <= tol {
        return Ok(NewtonSolution {
            x,
            iterations,
            residual: norm,
        });
    }
    Err(Error::NoConvergence {
        best: x,
        residual: norm,
        iterations,
    })
}

fn central_jacobian(system: &dyn Fn(&[f64], &mut [f64]), x: &[f64], jac: &mut DMatrix<f64>) {
    let dim = x.len();
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; dim];
    let mut fm = vec![0.0; dim];
    for k in 0..dim {
        let step = 1e-7 * (1.0 + x[k].abs());
        xp[k] = x[k] + step;
        system(&xp, &mut fp);
        xp[k] = x[k] - step;
        system(&xp, &mut fm);
        xp[k] = x[k];
        for i in 0..dim {
            jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
}

/// Ratio of extreme singular values; infinite for an exactly singular matrix.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Scalar Newton with an analytic derivative.
pub fn newton_scalar(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    x0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonSolution> {
    let system = |x: &[f64], out: &mut [f64]| out[0] = f(x[0]);
    let jac = |x: &[f64], j: &mut DMatrix<f64>| j[(0, 0)] = df(x[0]);
    newton_solve(&system, Jacobian::Analytic(&jac), &[x0], tol, max_iter)
}
