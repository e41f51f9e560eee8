//! Boundary coefficients of the spline from the boundary conditions.
//!
//! Cubic splines carry `alpha = (S'(a), S'(b))`; quintic splines carry
//! `alpha = (S'(a), S''(a), S'(b), S''(b))`. Whatever the boundary conditions
//! leave undetermined is fixed by requiring the ODE (or its x-derivative) to
//! hold at the endpoints.

use nalgebra::DMatrix;

use super::boundary::{BoundaryFunction, BoundarySpec};
use super::newton::{newton_scalar, newton_solve, Jacobian, NewtonSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};
use super::problem::OdeProblem;
use crate::error::{Error, Result};
use crate::spline::SplineBasisSet;

/// Boundary-derivative coefficients of a spline (2 for cubic, 4 for quintic).
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSet(Vec<f64>);

impl AlphaSet {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaResolution {
    pub alpha: AlphaSet,
    /// Largest Newton iteration count among the sub-solves (0 for closed forms).
    pub newton_iterations: usize,
}

/// Endpoint derivatives of every basis member, `left[l][k] = W_l^(k)(a)`.
#[derive(Debug, Clone)]
pub(crate) struct EndJets {
    pub left: Vec<[f64; 6]>,
    pub right: Vec<[f64; 6]>,
}

impl EndJets {
    pub fn of(basis: &SplineBasisSet) -> Self {
        let q = basis.degree();
        let jet = |w: &crate::spline::PiecewisePolynomial, right: bool| {
            let mut out = [0.0; 6];
            for (k, o) in out.iter_mut().enumerate().take(q + 1) {
                *o = if right { w.right(k) } else { w.left(k) };
            }
            out
        };
        Self {
            left: basis.members().iter().map(|w| jet(w, false)).collect(),
            right: basis.members().iter().map(|w| jet(w, true)).collect(),
        }
    }

    /// `S^(k)` at an endpoint for the combination with coefficients `alpha`.
    pub fn combined(&self, right: bool, k: usize, alpha: &[f64]) -> f64 {
        let jets = if right { &self.right } else { &self.left };
        let base = jets[0][k];
        alpha
            .iter()
            .zip(&jets[1..])
            .fold(base, |acc, (a, w)| acc + a * (w[k] - base))
    }

    /// `d S^(k) / d alpha_l` at an endpoint.
    pub fn sensitivity(&self, right: bool, k: usize, l: usize) -> f64 {
        let jets = if right { &self.right } else { &self.left };
        jets[l + 1][k] - jets[0][k]
    }
}

fn tag(variant: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Boundary {
        variant,
        source: Box::new(e),
    }
}

fn warm(warm: Option<&AlphaSet>, arity: usize) -> Vec<f64> {
    match warm {
        Some(w) if w.len() == arity && w.values().iter().all(|v| v.is_finite()) => w.values().to_vec(),
        _ => vec![0.0; arity],
    }
}

/// Solve `F(x, u, v, w) = 0` for `w` with `x, u, v` fixed.
fn solve_top(problem: &OdeProblem, x: f64, u: f64, v: f64, w0: f64) -> Result<(f64, usize)> {
    let f = |w: f64| problem.residual(x, &[u, v, w]);
    let df = |w: f64| problem.partials(x, &[u, v, w]).state[2];
    if problem.affine_in_top() {
        let d = df(0.0);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::SingularSystem {
                condition: f64::INFINITY,
            });
        }
        return Ok((-f(0.0) / d, 0));
    }
    let s = with_restarts(w0, |start| newton_scalar(f, df, start, DEFAULT_TOL, DEFAULT_MAX_ITER))?;
    Ok((s.x[0], s.iterations))
}

/// Starting points tried after the warm start fails.
const RESTARTS: [f64; 4] = [1.0, -1.0, 10.0, -10.0];

/// Run `solve` from `start`, then from fixed fallbacks; the first error is
/// reported when every attempt fails.
fn with_restarts(start: f64, solve: impl Fn(f64) -> Result<NewtonSolution>) -> Result<NewtonSolution> {
    let first = match solve(start) {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    RESTARTS
        .iter()
        .filter(|&&r| r != start)
        .find_map(|&r| solve(r).ok())
        .ok_or(first)
}

/// Vector version of [`with_restarts`]. Pairs try every combination of the
/// fallbacks; larger systems use each fallback in all components.
fn with_restarts_vec(start: &[f64], solve: impl Fn(&[f64]) -> Result<NewtonSolution>) -> Result<NewtonSolution> {
    let first = match solve(start) {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    let candidates: Vec<Vec<f64>> = if start.len() == 2 {
        RESTARTS
            .iter()
            .flat_map(|&p| RESTARTS.iter().map(move |&q| vec![p, q]))
            .collect()
    } else {
        RESTARTS.iter().map(|&r| vec![r; start.len()]).collect()
    };
    candidates
        .iter()
        .filter(|c| c.as_slice() != start)
        .find_map(|c| solve(c).ok())
        .ok_or(first)
}

/// Solve `g(x, u, v) = 0` for `v`.
fn solve_implicit(g: &BoundaryFunction, x: f64, u: f64, v0: f64, which: &'static str) -> Result<(f64, usize)> {
    let s = with_restarts(v0, |start| {
        newton_scalar(
            |v| g.value(x, &[u, v]),
            |v| g.gradient(x, &[u, v])[1],
            start,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
    })?;
    let v = s.x[0];
    let gv = g.gradient(x, &[u, v])[1];
    if gv == 0.0 || !gv.is_finite() {
        return Err(Error::DegenerateBoundary { which });
    }
    Ok((v, s.iterations))
}

/// Boundary coefficients for a second-order problem.
///
/// `warm_start` seeds every Newton solve (zeros when absent); the root reached
/// from it is accepted without any global search.
pub fn resolve_alphas_second_order(
    problem: &OdeProblem,
    bc: &BoundarySpec,
    basis: &SplineBasisSet,
    warm_start: Option<&AlphaSet>,
) -> Result<AlphaResolution> {
    if problem.order() != 2 {
        return Err(Error::InvalidProblem(
            "second-order coupling needs a second-order ODE".into(),
        ));
    }
    let variant = bc.name();
    let (a, b) = problem.domain();
    let degree = basis.degree();
    let arity = basis.arity();
    let jets = EndJets::of(basis);
    let y0 = jets.left[0][0];
    let yn = jets.right[0][0];
    let start = warm(warm_start, arity);
    let tagged = tag(variant);

    let (values, iterations) = match (bc, degree) {
        (BoundarySpec::Neumann { va, vb }, 3) => (vec![*va, *vb], 0),
        (BoundarySpec::Neumann { va, vb }, _) => {
            let (wa, ia) = solve_top(problem, a, y0, *va, start[1]).map_err(&tagged)?;
            let (wb, ib) = solve_top(problem, b, yn, *vb, start[3]).map_err(&tagged)?;
            (vec![*va, wa, *vb, wb], ia.max(ib))
        }
        (BoundarySpec::Robin { gamma_a, c_a, gamma_b, c_b }, _) => {
            let va = c_a - gamma_a * y0;
            let vb = c_b - gamma_b * yn;
            if degree == 3 {
                (vec![va, vb], 0)
            } else {
                let (wa, ia) = solve_top(problem, a, y0, va, start[1]).map_err(&tagged)?;
                let (wb, ib) = solve_top(problem, b, yn, vb, start[3]).map_err(&tagged)?;
                (vec![va, wa, vb, wb], ia.max(ib))
            }
        }
        (BoundarySpec::Implicit { left, right }, _) => {
            let (ia_slot, ib_slot) = if degree == 3 { (0, 1) } else { (0, 2) };
            let (va, ia) = solve_implicit(left, a, y0, start[ia_slot], "g").map_err(&tagged)?;
            let (vb, ib) = solve_implicit(right, b, yn, start[ib_slot], "h").map_err(&tagged)?;
            if degree == 3 {
                (vec![va, vb], ia.max(ib))
            } else {
                let (wa, ja) = solve_top(problem, a, y0, va, start[1]).map_err(&tagged)?;
                let (wb, jb) = solve_top(problem, b, yn, vb, start[3]).map_err(&tagged)?;
                (vec![va, wa, vb, wb], ia.max(ib).max(ja).max(jb))
            }
        }
        (BoundarySpec::Dirichlet { ua, ub }, 3) => {
            let (ua, ub) = (*ua, *ub);
            let system = |al: &[f64], r: &mut [f64]| {
                r[0] = problem.residual(a, &[ua, al[0], jets.combined(false, 2, al)]);
                r[1] = problem.residual(b, &[ub, al[1], jets.combined(true, 2, al)]);
            };
            let jacobian = |al: &[f64], j: &mut DMatrix<f64>| {
                let pa = problem.partials(a, &[ua, al[0], jets.combined(false, 2, al)]).state;
                let pb = problem.partials(b, &[ub, al[1], jets.combined(true, 2, al)]).state;
                j[(0, 0)] = pa[1] + pa[2] * jets.sensitivity(false, 2, 0);
                j[(0, 1)] = pa[2] * jets.sensitivity(false, 2, 1);
                j[(1, 0)] = pb[2] * jets.sensitivity(true, 2, 0);
                j[(1, 1)] = pb[1] + pb[2] * jets.sensitivity(true, 2, 1);
            };
            let s = with_restarts_vec(&start, |x0| {
                newton_solve(&system, Jacobian::Analytic(&jacobian), x0, DEFAULT_TOL, DEFAULT_MAX_ITER)
            })
            .map_err(&tagged)?;
            (s.x, s.iterations)
        }
        (BoundarySpec::Dirichlet { ua, ub }, _) => {
            let (ua, ub) = (*ua, *ub);
            // ODE at both ends plus its x-derivative at both ends:
            // F_x + u' F_u + u'' F_v + u''' F_w = 0
            let system = |al: &[f64], r: &mut [f64]| {
                let sa = [ua, al[0], al[1]];
                let sb = [ub, al[2], al[3]];
                r[0] = problem.residual(a, &sa);
                r[1] = problem.residual(b, &sb);
                let pa = problem.partials(a, &sa);
                let pb = problem.partials(b, &sb);
                let s3a = jets.combined(false, 3, al);
                let s3b = jets.combined(true, 3, al);
                r[2] = pa.x + al[0] * pa.state[0] + al[1] * pa.state[1] + s3a * pa.state[2];
                r[3] = pb.x + al[2] * pb.state[0] + al[3] * pb.state[1] + s3b * pb.state[2];
            };
            let s = with_restarts_vec(&start, |x0| {
                newton_solve(&system, Jacobian::CentralDifference, x0, DEFAULT_TOL, DEFAULT_MAX_ITER)
            })
            .map_err(&tagged)?;
            (s.x, s.iterations)
        }
        (BoundarySpec::FourthOrder { .. }, _) => {
            return Err(Error::InvalidProblem(
                "fourth-order boundary set used with a second-order ODE".into(),
            ))
        }
    };
    Ok(AlphaResolution {
        alpha: AlphaSet(values),
        newton_iterations: iterations,
    })
}

/// Boundary coefficients for a fourth-order problem on a quintic basis.
///
/// Each endpoint contributes an independent 2x2 system in `(S', S'')`.
pub fn resolve_alphas_fourth_order(
    problem: &OdeProblem,
    bc: &BoundarySpec,
    basis: &SplineBasisSet,
    warm_start: Option<&AlphaSet>,
) -> Result<AlphaResolution> {
    if problem.order() != 4 || basis.degree() != 5 {
        return Err(Error::InvalidProblem(
            "fourth-order coupling needs a fourth-order ODE and a quintic basis".into(),
        ));
    }
    let BoundarySpec::FourthOrder { left, right, affine } = bc else {
        return Err(Error::InvalidProblem(format!(
            "fourth-order problems need a FourthOrderSet boundary spec, got {}",
            bc.name()
        )));
    };
    let (a, b) = problem.domain();
    let jets = EndJets::of(basis);
    let start = warm(warm_start, 4);
    let tagged = tag(bc.name());
    let (la, ia) = solve_pair(left, a, jets.left[0][0], [start[0], start[1]], *affine).map_err(&tagged)?;
    let (lb, ib) = solve_pair(right, b, jets.right[0][0], [start[2], start[3]], *affine).map_err(&tagged)?;
    Ok(AlphaResolution {
        alpha: AlphaSet(vec![la[0], la[1], lb[0], lb[1]]),
        newton_iterations: ia.max(ib),
    })
}

fn solve_pair(
    eqs: &[BoundaryFunction; 2],
    x: f64,
    u: f64,
    start: [f64; 2],
    affine: bool,
) -> Result<([f64; 2], usize)> {
    let system = |al: &[f64], r: &mut [f64]| {
        let s = [u, al[0], al[1]];
        r[0] = eqs[0].value(x, &s);
        r[1] = eqs[1].value(x, &s);
    };
    let jacobian = |al: &[f64], j: &mut DMatrix<f64>| {
        let s = [u, al[0], al[1]];
        for (row, g) in eqs.iter().enumerate() {
            let grad = g.gradient(x, &s);
            j[(row, 0)] = grad[1];
            j[(row, 1)] = grad[2];
        }
    };
    if affine {
        // one exact linear solve from the origin
        let mut r = [0.0; 2];
        system(&[0.0, 0.0], &mut r);
        let mut j = DMatrix::zeros(2, 2);
        jacobian(&[0.0, 0.0], &mut j);
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        let cond = super::newton::condition_estimate(&j);
        if det == 0.0 || cond > 1e14 {
            return Err(Error::SingularSystem { condition: cond });
        }
        let x0 = (-r[0] * j[(1, 1)] + r[1] * j[(0, 1)]) / det;
        let x1 = (-r[1] * j[(0, 0)] + r[0] * j[(1, 0)]) / det;
        return Ok(([x0, x1], 0));
    }
    let s = newton_solve(&system, Jacobian::Analytic(&jacobian), &start, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(([s.x[0], s.x[1]], s.iterations))
}

/// Dispatch on the problem order.
pub fn resolve_alphas(
    problem: &OdeProblem,
    bc: &BoundarySpec,
    basis: &SplineBasisSet,
    warm_start: Option<&AlphaSet>,
) -> Result<AlphaResolution> {
    match problem.order() {
        4 => resolve_alphas_fourth_order(problem, bc, basis, warm_start),
        _ => resolve_alphas_second_order(problem, bc, basis, warm_start),
    }
}
