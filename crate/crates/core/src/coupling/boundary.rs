use std::fmt;
use std::sync::Arc;

use crate::spline::PiecewisePolynomial;

type ValueFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(f64, &[f64]) -> [f64; 3] + Send + Sync>;

/// One implicit boundary equation `g(x, u, u'[, u'']) = 0` with its gradient
/// `(dg/du, dg/du', dg/du'')` (the last entry is ignored for second-order BCs).
#[derive(Clone)]
pub struct BoundaryFunction {
    value: ValueFn,
    gradient: GradFn,
}

impl fmt::Debug for BoundaryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryFunction")
    }
}

impl BoundaryFunction {
    pub fn new<V, G>(value: V, gradient: G) -> Self
    where
        V: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(f64, &[f64]) -> [f64; 3] + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn value(&self, x: f64, state: &[f64]) -> f64 {
        (self.value)(x, state)
    }

    pub fn gradient(&self, x: f64, state: &[f64]) -> [f64; 3] {
        (self.gradient)(x, state)
    }
}

/// Boundary conditions of a two-point problem.
#[derive(Debug, Clone)]
pub enum BoundarySpec {
    /// `u(a) = ua`, `u(b) = ub`.
    Dirichlet { ua: f64, ub: f64 },
    /// `u'(a) = va`, `u'(b) = vb`.
    Neumann { va: f64, vb: f64 },
    /// `u'(a) + gamma_a u(a) = c_a`, `u'(b) + gamma_b u(b) = c_b`.
    Robin {
        gamma_a: f64,
        c_a: f64,
        gamma_b: f64,
        c_b: f64,
    },
    /// `g(a, u(a), u'(a)) = 0`, `h(b, u(b), u'(b)) = 0`.
    Implicit {
        left: BoundaryFunction,
        right: BoundaryFunction,
    },
    /// Two equations per endpoint in `(u, u', u'')`, for fourth-order problems.
    /// `affine` declares both pairs affine in `(u', u'')`.
    FourthOrder {
        left: [BoundaryFunction; 2],
        right: [BoundaryFunction; 2],
        affine: bool,
    },
}

impl BoundarySpec {
    pub fn name(&self) -> &'static str {
        match self {
            BoundarySpec::Dirichlet { .. } => "Dirichlet",
            BoundarySpec::Neumann { .. } => "Neumann",
            BoundarySpec::Robin { .. } => "Robin",
            BoundarySpec::Implicit { .. } => "GeneralImplicit",
            BoundarySpec::FourthOrder { .. } => "FourthOrderSet",
        }
    }

    /// Knot values fixed by the conditions: `(y_0, y_n)`.
    pub fn pinned(&self) -> (Option<f64>, Option<f64>) {
        match self {
            BoundarySpec::Dirichlet { ua, ub } => (Some(*ua), Some(*ub)),
            _ => (None, None),
        }
    }

    /// Residuals of every boundary equation evaluated on `spline`.
    pub fn residuals(&self, spline: &PiecewisePolynomial) -> Vec<f64> {
        let (a, b) = (spline.grid().a(), spline.grid().b());
        let left = [spline.left(0), spline.left(1), spline.left(2)];
        let right = [spline.right(0), spline.right(1), spline.right(2)];
        match self {
            BoundarySpec::Dirichlet { ua, ub } => vec![left[0] - ua, right[0] - ub],
            BoundarySpec::Neumann { va, vb } => vec![left[1] - va, right[1] - vb],
            BoundarySpec::Robin {
                gamma_a,
                c_a,
                gamma_b,
                c_b,
            } => vec![
                left[1] + gamma_a * left[0] - c_a,
                right[1] + gamma_b * right[0] - c_b,
            ],
            BoundarySpec::Implicit { left: g, right: h } => {
                vec![g.value(a, &left[..2]), h.value(b, &right[..2])]
            }
            BoundarySpec::FourthOrder {
                left: g, right: h, ..
            } => vec![
                g[0].value(a, &left),
                g[1].value(a, &left),
                h[0].value(b, &right),
                h[1].value(b, &right),
            ],
        }
    }
}
