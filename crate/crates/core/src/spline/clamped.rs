//! Clamped interpolating splines: prescribed first derivatives at both ends
//! (cubic) or first and second derivatives at both ends (quintic).

use nalgebra::{DMatrix, DVector, LU};

use super::grid::KnotGrid;
use super::piecewise::{check_degree, local_derivative, PiecewisePolynomial};
use super::recursive::{check_len, cubic_rows};
use crate::error::{Error, Result};

/// Geometry-only precomputation for repeated clamped builds on one grid.
///
/// Each piece is the Hermite interpolant of the value and the first `q/2`
/// derivatives at both of its knots. The interior derivatives are fixed by
/// continuity of the remaining ones (second for cubics, third and fourth for
/// quintics). That system depends only on the spacings and is factorized here.
#[derive(Debug, Clone)]
pub struct ClampedBuilder {
    grid: KnotGrid,
    degree: usize,
    /// Per interval: Hermite data of both ends -> continuity derivatives at
    /// the left end (first half of the rows) and the right end (second half).
    local: Vec<Vec<Vec<f64>>>,
    lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

/// Entries per knot in the Hermite data: 2 for cubic, 3 for quintic.
fn width(degree: usize) -> usize {
    degree.div_ceil(2)
}

impl ClampedBuilder {
    pub fn new(grid: &KnotGrid, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let w = width(degree);
        let u = w - 1;
        let local: Vec<Vec<Vec<f64>>> = grid
            .spacings()
            .iter()
            .map(|&h| {
                let mut rows = vec![vec![0.0; 2 * w]; 2 * u];
                for col in 0..2 * w {
                    let mut unit = vec![0.0; 2 * w];
                    unit[col] = 1.0;
                    let c = hermite(degree, h, &unit);
                    for r in 0..u {
                        rows[r][col] = local_derivative(&c, 0.0, w + r);
                        rows[u + r][col] = local_derivative(&c, h, w + r);
                    }
                }
                rows
            })
            .collect();
        let n = grid.intervals();
        let size = u * (n - 1);
        let lu = if size == 0 {
            None
        } else {
            let mut mat = DMatrix::<f64>::zeros(size, size);
            for knot in 1..n {
                for r in 0..u {
                    // jump = left piece at its end - right piece at its start
                    for (piece, sign, row) in [(knot - 1, 1.0, u + r), (knot, -1.0, r)] {
                        for off in 0..2 {
                            let j = piece + off;
                            if j == 0 || j == n {
                                continue;
                            }
                            for slot in 0..u {
                                mat[(u * (knot - 1) + r, u * (j - 1) + slot)] +=
                                    sign * local[piece][row][w * off + 1 + slot];
                            }
                        }
                    }
                }
            }
            let lu = mat.lu();
            if !lu.is_invertible() {
                return Err(Error::DegenerateGeometry {
                    min_spacing: grid.min_spacing(),
                    detail: "clamped continuity system is singular".into(),
                });
            }
            Some(lu)
        };
        Ok(Self {
            grid: grid.clone(),
            degree,
            local,
            lu,
        })
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `ends` is `(v_0, v_n)` for cubics and `(v_0, w_0, v_n, w_n)` for quintics.
    pub fn build(&self, y: &[f64], ends: &[f64]) -> Result<PiecewisePolynomial> {
        check_len("knot values", self.grid.intervals() + 1, y.len())?;
        check_len("end derivatives", self.degree - 1, ends.len())?;
        let n = self.grid.intervals();
        let w = width(self.degree);
        let u = w - 1;
        // knot data (y, m[, k]) with the unknown interior derivatives zeroed
        let mut data = vec![0.0; w * (n + 1)];
        for (i, &yi) in y.iter().enumerate() {
            data[w * i] = yi;
        }
        data[1..w].copy_from_slice(&ends[..u]);
        data[w * n + 1..].copy_from_slice(&ends[u..]);
        if let Some(lu) = &self.lu {
            let mut rhs = DVector::<f64>::zeros(u * (n - 1));
            for knot in 1..n {
                for r in 0..u {
                    let left = dot(&self.local[knot - 1][u + r], &data[w * (knot - 1)..w * (knot + 1)]);
                    let right = dot(&self.local[knot][r], &data[w * knot..w * (knot + 2)]);
                    rhs[u * (knot - 1) + r] = right - left;
                }
            }
            let z = lu.solve(&rhs).ok_or_else(|| Error::DegenerateGeometry {
                min_spacing: self.grid.min_spacing(),
                detail: "clamped continuity solve failed".into(),
            })?;
            for knot in 1..n {
                data[w * knot + 1..w * (knot + 1)].copy_from_slice(&z.as_slice()[u * (knot - 1)..u * knot]);
            }
        }
        let mut out = Vec::with_capacity((self.degree + 1) * n);
        for (i, &h) in self.grid.spacings().iter().enumerate() {
            out.extend(hermite(self.degree, h, &data[w * i..w * (i + 2)]));
        }
        PiecewisePolynomial::from_flat(self.grid.clone(), self.degree, out)
    }
}

fn dot(row: &[f64], data: &[f64]) -> f64 {
    row.iter().zip(data).map(|(a, b)| a * b).sum()
}

/// Hermite piece on `[0, h]`; `d` holds the left end data, then the right.
fn hermite(degree: usize, h: f64, d: &[f64]) -> Vec<f64> {
    if degree == 3 {
        let (y0, m0, y1, m1) = (d[0], d[1], d[2], d[3]);
        let slope = (y1 - y0) / h;
        vec![
            y0,
            m0,
            (3.0 * slope - 2.0 * m0 - m1) / h,
            (m0 + m1 - 2.0 * slope) / (h * h),
        ]
    } else {
        quintic_hermite(h, &[d[0], d[1], d[2], d[3], d[4], d[5]]).to_vec()
    }
}

/// Quintic Hermite piece on `[0, h]` from value, slope and curvature at both ends.
pub(crate) fn quintic_hermite(h: f64, d: &[f64; 6]) -> [f64; 6] {
    let [y0, m0, k0, y1, m1, k1] = *d;
    let a = y1 - y0 - m0 * h - 0.5 * k0 * h * h;
    let b = m1 - m0 - k0 * h;
    let c = k1 - k0;
    let h2 = h * h;
    [
        y0,
        m0,
        0.5 * k0,
        (20.0 * a - 8.0 * b * h + c * h2) / (2.0 * h2 * h),
        (-15.0 * a + 7.0 * b * h - c * h2) / (h2 * h2),
        (12.0 * a - 6.0 * b * h + c * h2) / (2.0 * h2 * h2 * h),
    ]
}

/// Clamped cubic as `alpha R_0 + (1 - alpha) R_1`, where `R_0 = R(v_0, 0)` and
/// `R_1 = R(v_0, 1)` are forward recursions and
/// `alpha = (v_n - R_1'(x_n)) / (R_0'(x_n) - R_1'(x_n))`.
///
/// Rounding grows by about 3.7 per interval, so this matches [`build_clamped`]
/// only on short grids.
pub fn clamp_cubic_by_shooting(
    grid: &KnotGrid,
    y: &[f64],
    v0: f64,
    vn: f64,
) -> Result<PiecewisePolynomial> {
    check_len("knot values", grid.intervals() + 1, y.len())?;
    let h = grid.spacings();
    let r0 = cubic_rows(h, y, v0, 0.0);
    let r1 = cubic_rows(h, y, v0, 1.0);
    let hn = h[h.len() - 1];
    let tail = r0.len() - 4;
    let denom = local_derivative(&r0[tail..], hn, 1) - local_derivative(&r1[tail..], hn, 1);
    if !denom.is_finite() || denom.abs() < 1e-12 * grid.min_spacing() {
        return Err(Error::DegenerateGeometry {
            min_spacing: grid.min_spacing(),
            detail: format!("R_0'(x_n) - R_1'(x_n) = {denom:e}"),
        });
    }
    let alpha = (vn - local_derivative(&r1[tail..], hn, 1)) / denom;
    let coeffs = r0
        .iter()
        .zip(&r1)
        .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
        .collect();
    PiecewisePolynomial::from_flat(grid.clone(), 3, coeffs)
}

/// Clamped spline through `(x_i, y_i)`; see [`ClampedBuilder::build`] for `ends`.
pub fn build_clamped(
    grid: &KnotGrid,
    y: &[f64],
    degree: usize,
    ends: &[f64],
) -> Result<PiecewisePolynomial> {
    ClampedBuilder::new(grid, degree)?.build(y, ends)
}
