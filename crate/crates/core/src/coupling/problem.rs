use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Partial derivatives of an operator `F(x, u, u', ...)`.
///
/// `state[k]` is the derivative with respect to `u^(k)`; slots above the
/// problem order are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Partials {
    pub x: f64,
    pub state: [f64; 5],
}

type ResidualFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type PartialsFn = Arc<dyn Fn(f64, &[f64]) -> Partials + Send + Sync>;

/// `F(x, u, u', u'') = 0` or `F(x, u, u', u'', u''', u'''') = 0` on `[a, b]`.
///
/// The state slice handed to the closures is `[u, u', ..., u^(order)]`.
#[derive(Clone)]
pub struct OdeProblem {
    order: usize,
    domain: (f64, f64),
    residual: ResidualFn,
    partials: PartialsFn,
    affine_in_top: bool,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("order", &self.order)
            .field("domain", &self.domain)
            .field("affine_in_top", &self.affine_in_top)
            .finish_non_exhaustive()
    }
}

impl OdeProblem {
    pub fn new<R, P>(order: usize, a: f64, b: f64, residual: R, partials: P) -> Result<Self>
    where
        R: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        P: Fn(f64, &[f64]) -> Partials + Send + Sync + 'static,
    {
        if order != 2 && order != 4 {
            return Err(Error::InvalidProblem(format!(
                "ODE order must be 2 or 4, got {order}"
            )));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidDomain { a, b, n: 1 });
        }
        let problem = Self {
            order,
            domain: (a, b),
            residual: Arc::new(residual),
            partials: Arc::new(partials),
            affine_in_top: false,
        };
        problem.probe()?;
        Ok(problem)
    }

    pub fn second_order<R, P>(a: f64, b: f64, residual: R, partials: P) -> Result<Self>
    where
        R: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        P: Fn(f64, &[f64]) -> Partials + Send + Sync + 'static,
    {
        Self::new(2, a, b, residual, partials)
    }

    pub fn fourth_order<R, P>(a: f64, b: f64, residual: R, partials: P) -> Result<Self>
    where
        R: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        P: Fn(f64, &[f64]) -> Partials + Send + Sync + 'static,
    {
        Self::new(4, a, b, residual, partials)
    }

    /// Declare `F` affine in its highest derivative, which lets endpoint
    /// equations in that derivative be solved in closed form.
    pub fn with_affine_top(mut self, affine: bool) -> Self {
        self.affine_in_top = affine;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn affine_in_top(&self) -> bool {
        self.affine_in_top
    }

    pub fn residual(&self, x: f64, state: &[f64]) -> f64 {
        (self.residual)(x, state)
    }

    pub fn partials(&self, x: f64, state: &[f64]) -> Partials {
        (self.partials)(x, state)
    }

    fn probe(&self) -> Result<()> {
        let (a, b) = self.domain;
        for x in [a, 0.5 * (a + b), b] {
            for level in [0.0, 0.5] {
                let state = vec![level; self.order + 1];
                let p = self.partials(x, &state);
                let finite = self.residual(x, &state).is_finite()
                    && p.x.is_finite()
                    && p.state.iter().all(|v| v.is_finite());
                if !finite {
                    return Err(Error::NonFiniteOperator { x });
                }
            }
        }
        Ok(())
    }
}
