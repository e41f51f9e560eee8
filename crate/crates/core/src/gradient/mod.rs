//! Physics-informed loss over the free knot values and its gradient.
//!
//! Cubic gradients are exact: the local coefficients are affine in the knot
//! values and the end slopes, and the end slopes' own dependence on the knot
//! values comes from differentiating the boundary equations. Quintic
//! gradients use central differences of the loss.

mod tape;

use std::io::{self, Write};

use nalgebra::{DMatrix, Matrix2, Vector2};

pub use tape::{coefficient_gradient_tape, CoefficientTape, FreePattern};

use crate::coupling::{resolve_alphas, AlphaResolution, AlphaSet, BoundarySpec, OdeProblem};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::spline::{basic_clamped_set_with, combine_basis, uniform_points, ClampedBuilder, KnotGrid, PiecewisePolynomial};

/// Default number of collocation points.
pub const DEFAULT_COLLOCATION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    /// `J = (1/2N) sum R_j^2`.
    #[default]
    L2,
    /// `J = max |R_j|`; the gradient is that of the largest term.
    Linf,
}

/// Collocation points located on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    points: Vec<f64>,
    cells: Vec<(usize, f64)>,
}

impl Collocation {
    pub fn new(grid: &KnotGrid, points: Vec<f64>) -> Result<Self> {
        let cells = points
            .iter()
            .map(|&x| grid.locate(x).map(|i| (i, x - grid.knots()[i])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, cells })
    }

    /// `count` uniformly spaced points including both endpoints.
    pub fn uniform(grid: &KnotGrid, count: usize) -> Result<Self> {
        Self::new(grid, uniform_points(grid.a(), grid.b(), count))
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub residuals: Vec<f64>,
    pub alpha: AlphaSet,
    pub norm: Norm,
    pub newton_iterations: usize,
}

/// Root-mean-square of a residual vector.
pub fn rms(residuals: &[f64]) -> f64 {
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

fn loss_value(residuals: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L2 => residuals.iter().map(|r| r * r).sum::<f64>() / (2.0 * residuals.len() as f64),
        Norm::Linf => residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())),
    }
}

/// Everything about the loss that depends only on the problem and the grid.
#[derive(Debug, Clone)]
pub struct LossEvaluator {
    problem: OdeProblem,
    bc: BoundarySpec,
    degree: usize,
    norm: Norm,
    pattern: FreePattern,
    pinned: (f64, f64),
    colloc: Collocation,
    builder: ClampedBuilder,
    tape: Option<CubicMaps>,
}

#[derive(Debug, Clone)]
struct CubicMaps {
    tape: CoefficientTape,
    /// `dV_i/dy_free` with end slopes fixed.
    knots: Vec<DMatrix<f64>>,
}

impl LossEvaluator {
    pub fn new(
        problem: &OdeProblem,
        bc: &BoundarySpec,
        grid: &KnotGrid,
        degree: usize,
        colloc: Collocation,
        norm: Norm,
    ) -> Result<Self> {
        if problem.order() == 4 && degree != 5 {
            return Err(Error::InvalidProblem(
                "fourth-order problems need quintic splines".into(),
            ));
        }
        let (a, b) = problem.domain();
        if grid.a() != a || grid.b() != b {
            return Err(Error::InvalidProblem(format!(
                "grid spans [{}, {}] but the problem domain is [{a}, {b}]",
                grid.a(),
                grid.b()
            )));
        }
        let builder = ClampedBuilder::new(grid, degree)?;
        let knots = grid.knots().len();
        let (pattern, pinned) = match bc.pinned() {
            (Some(ua), Some(ub)) => (FreePattern::interior(knots), (ua, ub)),
            _ => (FreePattern::all(knots), (0.0, 0.0)),
        };
        let tape = if degree == 3 {
            let tape = coefficient_gradient_tape(grid, &pattern)?;
            let knots = (0..tape.intervals())
                .map(|i| {
                    let m = tape.clamped_knots(i);
                    DMatrix::from_fn(4, pattern.len(), |r, c| m[(r, pattern.free()[c])])
                })
                .collect();
            Some(CubicMaps { tape, knots })
        } else {
            None
        };
        Ok(Self {
            problem: problem.clone(),
            bc: bc.clone(),
            degree,
            norm,
            pattern,
            pinned,
            colloc,
            builder,
            tape,
        })
    }

    pub fn pattern(&self) -> &FreePattern {
        &self.pattern
    }

    pub fn grid(&self) -> &KnotGrid {
        self.builder.grid()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn collocation(&self) -> &Collocation {
        &self.colloc
    }

    pub fn tape(&self) -> Option<&CoefficientTape> {
        self.tape.as_ref().map(|t| &t.tape)
    }

    /// Full knot-value vector, with pinned Dirichlet values filled in.
    pub fn full_values(&self, y_free: &[f64]) -> Result<Vec<f64>> {
        if y_free.len() != self.pattern.len() {
            return Err(Error::Dimension {
                what: "free knot values",
                expected: self.pattern.len(),
                got: y_free.len(),
            });
        }
        Ok(self.pattern.assemble(y_free, self.pinned.0, self.pinned.1))
    }

    /// The spline for `y_free`, with boundary coefficients resolved from `warm`.
    pub fn spline(&self, y_free: &[f64], warm: Option<&AlphaSet>) -> Result<(PiecewisePolynomial, AlphaResolution)> {
        let y = self.full_values(y_free)?;
        let basis = basic_clamped_set_with(&self.builder, &y)?;
        let res = resolve_alphas(&self.problem, &self.bc, &basis, warm)?;
        let spline = combine_basis(&basis, res.alpha.values())?;
        Ok((spline, res))
    }

    fn state(&self, spline: &PiecewisePolynomial, j: usize) -> [f64; 5] {
        let (i, t) = self.colloc.cells[j];
        let mut s = [0.0; 5];
        for (k, v) in s.iter_mut().enumerate().take(self.problem.order() + 1) {
            *v = spline.eval_in(i, t, k);
        }
        s
    }

    /// Residuals of the ODE on `spline` at the collocation points.
    pub fn residuals(&self, spline: &PiecewisePolynomial) -> Result<Vec<f64>> {
        let order = self.problem.order();
        (0..self.colloc.len())
            .map(|j| {
                let s = self.state(spline, j);
                let r = self.problem.residual(self.colloc.points[j], &s[..=order]);
                if r.is_finite() {
                    Ok(r)
                } else {
                    Err(Error::NonFiniteEvaluation { component: j })
                }
            })
            .collect()
    }

    /// Loss value only.
    pub fn loss(&self, y_free: &[f64], warm: Option<&AlphaSet>) -> Result<f64> {
        let (spline, _) = self.spline(y_free, warm)?;
        Ok(loss_value(&self.residuals(&spline)?, self.norm))
    }

    /// Loss, gradient and diagnostics at `y_free`.
    ///
    /// `warm` seeds the boundary Newton solves; the result depends only on
    /// the arguments.
    pub fn loss_and_gradient(&self, y_free: &[f64], warm: Option<&AlphaSet>) -> Result<LossReport> {
        let (spline, res) = self.spline(y_free, warm)?;
        let residuals = self.residuals(&spline)?;
        let value = loss_value(&residuals, self.norm);
        let gradient = match &self.tape {
            Some(maps) => self.cubic_gradient(maps, &spline, &res.alpha, &residuals)?,
            None => {
                let alpha = res.alpha.clone();
                fd_gradient(&|y: &[f64]| self.loss(y, Some(&alpha)), y_free)?
            }
        };
        Ok(LossReport {
            value,
            gradient,
            residuals,
            alpha: res.alpha,
            norm: self.norm,
            newton_iterations: res.newton_iterations,
        })
    }

    /// `d alpha / d y_free` (2 x m) for a cubic spline.
    fn alpha_sensitivity(&self, maps: &CubicMaps, spline: &PiecewisePolynomial, alpha: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.pattern.len();
        let n = spline.intervals();
        let mut out = DMatrix::zeros(2, m);
        let col_of = |k: usize| self.pattern.free().iter().position(|&f| f == k);
        let (a, b) = self.problem.domain();
        match &self.bc {
            BoundarySpec::Neumann { .. } => {}
            BoundarySpec::Robin { gamma_a, gamma_b, .. } => {
                if let Some(c) = col_of(0) {
                    out[(0, c)] = -gamma_a;
                }
                if let Some(c) = col_of(n) {
                    out[(1, c)] = -gamma_b;
                }
            }
            BoundarySpec::Implicit { left, right } => {
                for (row, g, x, k, u) in [(0, left, a, 0, spline.left(0)), (1, right, b, n, spline.right(0))] {
                    let grad = g.gradient(x, &[u, alpha[row]]);
                    if grad[1] == 0.0 || !grad[1].is_finite() {
                        return Err(Error::SingularSensitivity {
                            endpoint: if row == 0 { "a" } else { "b" },
                        });
                    }
                    if let Some(c) = col_of(k) {
                        out[(row, c)] = -grad[0] / grad[1];
                    }
                }
            }
            BoundarySpec::Dirichlet { ua, ub } => {
                // F(x, u, alpha, S''(x)) = 0 at both ends, S'' affine in (y, alpha)
                let hl = self.grid().spacings()[n - 1];
                let second_a = [0.0, 0.0, 2.0, 0.0];
                let second_b = [0.0, 0.0, 2.0, 6.0 * hl];
                let row_of = |mat: &DMatrix<f64>, w: &[f64; 4], col: usize| (0..4).map(|r| w[r] * mat[(r, col)]).sum::<f64>();
                let ends = [(a, *ua, 0usize, &second_a), (b, *ub, n - 1, &second_b)];
                let mut lhs = Matrix2::zeros();
                let mut rhs = DMatrix::zeros(2, m);
                for (row, &(x, u, piece, w)) in ends.iter().enumerate() {
                    let s2 = if row == 0 { spline.left(2) } else { spline.right(2) };
                    let p = self.problem.partials(x, &[u, alpha[row], s2]).state;
                    let q = maps.tape.clamped_ends(piece);
                    for l in 0..2 {
                        lhs[(row, l)] = p[2] * row_of(q, w, l);
                    }
                    lhs[(row, row)] += p[1];
                    for c in 0..m {
                        rhs[(row, c)] = -p[2] * row_of(&maps.knots[piece], w, c);
                    }
                }
                let cond = crate::coupling::newton::condition_estimate(&DMatrix::from_column_slice(2, 2, lhs.as_slice()));
                let inv = lhs.try_inverse().filter(|_| cond <= 1e14).ok_or(Error::SingularSensitivity { endpoint: "a/b" })?;
                for c in 0..m {
                    let v = inv * Vector2::new(rhs[(0, c)], rhs[(1, c)]);
                    out[(0, c)] = v[0];
                    out[(1, c)] = v[1];
                }
            }
            BoundarySpec::FourthOrder { .. } => {
                return Err(Error::InvalidProblem("fourth-order boundary set on a cubic spline".into()))
            }
        }
        Ok(out)
    }

    fn cubic_gradient(
        &self,
        maps: &CubicMaps,
        spline: &PiecewisePolynomial,
        alpha: &AlphaSet,
        residuals: &[f64],
    ) -> Result<Vec<f64>> {
        let m = self.pattern.len();
        let dalpha = self.alpha_sensitivity(maps, spline, alpha.values())?;
        let dv: Vec<DMatrix<f64>> = (0..spline.intervals())
            .map(|i| &maps.knots[i] + maps.tape.clamped_ends(i) * &dalpha)
            .collect();
        let nc = residuals.len();
        let weight = |j: usize| -> f64 {
            match self.norm {
                Norm::L2 => residuals[j] / nc as f64,
                Norm::Linf => 0.0,
            }
        };
        let terms: Vec<(usize, f64)> = match self.norm {
            Norm::L2 => (0..nc).map(|j| (j, weight(j))).collect(),
            Norm::Linf => {
                let mut best = 0;
                for j in 1..nc {
                    if residuals[j].abs() > residuals[best].abs() {
                        best = j;
                    }
                }
                vec![(best, residuals[best].signum())]
            }
        };
        let mut grad = vec![0.0; m];
        for (j, w) in terms {
            let (i, t) = self.colloc.cells[j];
            let s = self.state(spline, j);
            let p = self.problem.partials(self.colloc.points[j], &s[..3]).state;
            // d/dV of S, S', S'' at local offset t
            let rows = [
                [1.0, t, t * t, t * t * t],
                [0.0, 1.0, 2.0 * t, 3.0 * t * t],
                [0.0, 0.0, 2.0, 6.0 * t],
            ];
            let mut coef = [0.0; 4];
            for (k, row) in rows.iter().enumerate() {
                for r in 0..4 {
                    coef[r] += p[k] * row[r];
                }
            }
            for (c, g) in grad.iter_mut().enumerate() {
                let d: f64 = (0..4).map(|r| coef[r] * dv[i][(r, c)]).sum();
                *g += w * d;
            }
        }
        Ok(grad)
    }
}

/// Convenience wrapper: build an evaluator and take one loss/gradient.
pub fn loss_and_gradient(
    problem: &OdeProblem,
    bc: &BoundarySpec,
    grid: &KnotGrid,
    y_free: &[f64],
    colloc: &Collocation,
    degree: usize,
    norm: Norm,
    warm: Option<&AlphaSet>,
) -> Result<LossReport> {
    LossEvaluator::new(problem, bc, grid, degree, colloc.clone(), norm)?.loss_and_gradient(y_free, warm)
}

/// Central-difference gradient with step `1e-6 (1 + |y_k|)`.
pub fn fd_gradient(loss: &dyn Fn(&[f64]) -> Result<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let mut probe = y.to_vec();
    let mut grad = Vec::with_capacity(y.len());
    for k in 0..y.len() {
        let step = 1e-6 * (1.0 + y[k].abs());
        probe[k] = y[k] + step;
        let up = loss(&probe)?;
        probe[k] = y[k] - step;
        let down = loss(&probe)?;
        probe[k] = y[k];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteEvaluation { component: k });
        }
        grad.push((up - down) / (2.0 * step));
    }
    Ok(grad)
}

/// CSV with header `xi,residual`.
pub fn write_residual_profile<W: Write>(mut out: W, points: &[f64], residuals: &[f64]) -> io::Result<()> {
    writeln!(out, "xi,residual")?;
    for (x, r) in points.iter().zip(residuals) {
        writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*r))?;
    }
    Ok(())
}
