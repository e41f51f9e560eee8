use super::clamped::ClampedBuilder;
use super::grid::KnotGrid;
use super::piecewise::PiecewisePolynomial;
use crate::error::{Error, Result};

/// The basic clamped splines `W_0, ..., W_{q-1}` on one data set.
///
/// `W_0` has all prescribed end derivatives zero; `W_l` (l >= 1) sets exactly
/// one of them to one, in the order `S'(a), S'(b)` (cubic) or
/// `S'(a), S''(a), S'(b), S''(b)` (quintic).
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasisSet {
    degree: usize,
    members: Vec<PiecewisePolynomial>,
    /// `W_l - W_0` for l >= 1: clamped splines of zero data with one unit end
    /// derivative.
    directions: Vec<PiecewisePolynomial>,
}

impl SplineBasisSet {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn members(&self) -> &[PiecewisePolynomial] {
        &self.members
    }

    /// Number of boundary coefficients (2 for cubic, 4 for quintic).
    pub fn arity(&self) -> usize {
        self.members.len() - 1
    }

    pub fn grid(&self) -> &KnotGrid {
        self.members[0].grid()
    }
}

pub fn basic_clamped_set(grid: &KnotGrid, y: &[f64], degree: usize) -> Result<SplineBasisSet> {
    basic_clamped_set_with(&ClampedBuilder::new(grid, degree)?, y)
}

/// Same as [`basic_clamped_set`] but reusing a cached builder.
pub fn basic_clamped_set_with(builder: &ClampedBuilder, y: &[f64]) -> Result<SplineBasisSet> {
    let arity = builder.degree() - 1;
    let zeros = vec![0.0; y.len()];
    let base = builder.build(y, &vec![0.0; arity])?;
    let directions = (0..arity)
        .map(|l| {
            let mut ends = vec![0.0; arity];
            ends[l] = 1.0;
            builder.build(&zeros, &ends)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut members = vec![base.clone()];
    for d in &directions {
        members.push(PiecewisePolynomial::combine(&[(1.0, &base), (1.0, d)])?);
    }
    Ok(SplineBasisSet {
        degree: builder.degree(),
        members,
        directions,
    })
}

/// `S = (1 - sum alpha_l) W_0 + sum alpha_l W_l`.
pub fn combine_basis(basis: &SplineBasisSet, alphas: &[f64]) -> Result<PiecewisePolynomial> {
    if alphas.len() != basis.arity() {
        return Err(Error::Dimension {
            what: "alpha coefficients",
            expected: basis.arity(),
            got: alphas.len(),
        });
    }
    // same combination written as W_0 + sum alpha_l (W_l - W_0), which avoids
    // cancelling large member coefficients
    let terms: Vec<(f64, &PiecewisePolynomial)> = std::iter::once(1.0)
        .chain(alphas.iter().copied())
        .zip(std::iter::once(&basis.members[0]).chain(&basis.directions))
        .collect();
    PiecewisePolynomial::combine(&terms)
}
