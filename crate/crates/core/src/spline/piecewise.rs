use std::io::{self, Write};

use super::grid::{uniform_points, KnotGrid};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// A degree-3 or degree-5 spline stored as one coefficient row per interval,
/// in powers of the local variable `t = x - x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    grid: KnotGrid,
    degree: usize,
    coeffs: Vec<f64>,
}

pub(crate) fn check_degree(degree: usize) -> Result<()> {
    match degree {
        3 | 5 => Ok(()),
        d => Err(Error::Degree(d)),
    }
}

/// `order`-th derivative of `sum_j c[j] t^j`.
#[inline]
pub(crate) fn local_derivative(c: &[f64], t: f64, order: usize) -> f64 {
    let q = c.len() - 1;
    if order > q {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in (order..=q).rev() {
        acc = acc * t + c[j] * falling(j, order);
    }
    acc
}

#[inline]
fn falling(j: usize, k: usize) -> f64 {
    ((j + 1 - k)..=j).fold(1.0, |p, f| p * f as f64)
}

impl PiecewisePolynomial {
    /// Build from a flat coefficient array with `degree + 1` entries per interval.
    pub fn from_flat(grid: KnotGrid, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_degree(degree)?;
        let expected = grid.intervals() * (degree + 1);
        if coeffs.len() != expected {
            return Err(Error::Dimension {
                what: "coefficient array",
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            grid,
            degree,
            coeffs,
        })
    }

    pub fn from_rows(grid: KnotGrid, degree: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != degree + 1) {
            return Err(Error::Dimension {
                what: "coefficient row",
                expected: degree + 1,
                got: rows.iter().map(Vec::len).find(|&l| l != degree + 1).unwrap_or(0),
            });
        }
        Self::from_flat(grid, degree, rows.concat())
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.grid.intervals()
    }

    pub fn piece(&self, i: usize) -> &[f64] {
        let s = self.degree + 1;
        &self.coeffs[i * s..(i + 1) * s]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Exact `order`-th derivative at `x`.
    pub fn eval(&self, x: f64, order: usize) -> Result<f64> {
        if order > self.degree {
            return Err(Error::DerivativeOrder {
                order,
                degree: self.degree,
            });
        }
        let i = self.grid.locate(x)?;
        Ok(self.eval_in(i, x - self.grid.knots()[i], order))
    }

    /// Evaluate on interval `i` at local offset `t` without domain checks.
    pub fn eval_in(&self, i: usize, t: f64, order: usize) -> f64 {
        local_derivative(self.piece(i), t, order)
    }

    /// Value and all derivatives up to the degree at `x`.
    pub fn jet(&self, x: f64) -> Result<Vec<f64>> {
        let i = self.grid.locate(x)?;
        let t = x - self.grid.knots()[i];
        Ok((0..=self.degree).map(|k| self.eval_in(i, t, k)).collect())
    }

    /// `order`-th derivative at `a`, taken from the first piece.
    pub fn left(&self, order: usize) -> f64 {
        self.eval_in(0, 0.0, order)
    }

    /// `order`-th derivative at `b`, taken from the last piece.
    pub fn right(&self, order: usize) -> f64 {
        let last = self.intervals() - 1;
        self.eval_in(last, self.grid.spacings()[last], order)
    }

    /// Values at the knots of `new_grid`.
    pub fn resample(&self, new_grid: &KnotGrid) -> Result<Vec<f64>> {
        new_grid.knots().iter().map(|&x| self.eval(x, 0)).collect()
    }

    /// Row-wise linear combination `sum_k w_k P_k`; all terms must share grid and degree.
    pub fn combine(terms: &[(f64, &PiecewisePolynomial)]) -> Result<Self> {
        let first = terms.first().ok_or(Error::Dimension {
            what: "combination terms",
            expected: 1,
            got: 0,
        })?;
        let (grid, degree) = (&first.1.grid, first.1.degree);
        let mut coeffs = vec![0.0; first.1.coeffs.len()];
        for (w, p) in terms {
            if p.degree != degree || p.grid != *grid {
                return Err(Error::Dimension {
                    what: "combination term layout",
                    expected: first.1.coeffs.len(),
                    got: p.coeffs.len(),
                });
            }
            for (c, pc) in coeffs.iter_mut().zip(&p.coeffs) {
                *c += w * pc;
            }
        }
        Ok(Self {
            grid: grid.clone(),
            degree,
            coeffs,
        })
    }

    /// Largest jump of the derivatives of order `0..degree` across interior knots,
    /// relative to `1 + |value|`.
    pub fn max_continuity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.intervals() {
            let h = self.grid.spacings()[i - 1];
            for k in 0..self.degree {
                let l = self.eval_in(i - 1, h, k);
                let r = self.eval_in(i, 0.0, k);
                worst = worst.max((l - r).abs() / (1.0 + l.abs().max(r.abs())));
            }
        }
        worst
    }

    /// CSV dump with columns `x, s0, ..., s<degree>` at `count` uniform samples.
    pub fn write_samples<W: Write>(&self, mut out: W, count: usize) -> io::Result<()> {
        let header: Vec<String> = std::iter::once("x".to_string())
            .chain((0..=self.degree).map(|k| format!("s{k}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for x in uniform_points(self.grid.a(), self.grid.b(), count) {
            let jet = self.jet(x).map_err(io::Error::other)?;
            let row: Vec<String> = std::iter::once(x).chain(jet).map(fmt_f64).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
