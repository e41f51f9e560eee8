//! Forward (shooting) construction of interpolating splines from derivative
//! data at the first knot. No linear solve; each interval is fixed by the
//! incoming value and derivatives plus interpolation of the next knot value.

use super::grid::KnotGrid;
use super::piecewise::{check_degree, local_derivative, PiecewisePolynomial};
use crate::error::{Error, Result};

/// Interpolating spline with prescribed derivatives at `x_0`.
///
/// `init_derivs` holds `(S'(x_0), S''(x_0))` for cubics and
/// `(S', S'', S''', S'''')` at `x_0` for quintics.
pub fn build_recursive(
    grid: &KnotGrid,
    y: &[f64],
    degree: usize,
    init_derivs: &[f64],
) -> Result<PiecewisePolynomial> {
    check_degree(degree)?;
    check_len("knot values", grid.intervals() + 1, y.len())?;
    check_len("initial derivatives", degree - 1, init_derivs.len())?;
    let coeffs = match degree {
        3 => cubic_rows(grid.spacings(), y, init_derivs[0], init_derivs[1]),
        _ => quintic_rows(grid.spacings(), y, init_derivs),
    };
    PiecewisePolynomial::from_flat(grid.clone(), degree, coeffs)
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

/// Cubic recursion: `a_i = y_i`, `b_i`, `c_i` carried from the previous
/// interval, `d_i` closing the interpolation of `y_{i+1}`.
pub(crate) fn cubic_rows(h: &[f64], y: &[f64], v0: f64, w0: f64) -> Vec<f64> {
    let n = h.len();
    let mut out = Vec::with_capacity(4 * n);
    let (mut b, mut c) = (v0, 0.5 * w0);
    for i in 0..n {
        let hi = h[i];
        if i > 0 {
            let hp = h[i - 1];
            let (bp, cp, dp) = (out[4 * i - 3], out[4 * i - 2], out[4 * i - 1]);
            b = bp + 2.0 * cp * hp + 3.0 * dp * hp * hp;
            c = cp + 3.0 * dp * hp;
        }
        let d = (y[i + 1] - y[i] - b * hi - c * hi * hi) / (hi * hi * hi);
        out.extend_from_slice(&[y[i], b, c, d]);
    }
    out
}

fn quintic_rows(h: &[f64], y: &[f64], init: &[f64]) -> Vec<f64> {
    let n = h.len();
    let mut out = Vec::with_capacity(6 * n);
    let mut derivs = [init[0], init[1], init[2], init[3]];
    for i in 0..n {
        let hi = h[i];
        let mut c = [
            y[i],
            derivs[0],
            derivs[1] / 2.0,
            derivs[2] / 6.0,
            derivs[3] / 24.0,
            0.0,
        ];
        let partial = c[..5].iter().rev().fold(0.0, |acc, &ck| acc * hi + ck);
        c[5] = (y[i + 1] - partial) / hi.powi(5);
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = local_derivative(&c, hi, k + 1);
        }
        out.extend_from_slice(&c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cubic_piece_from_zero_slope() {
        let g = KnotGrid::new(vec![0.0, 1.0]).unwrap();
        let s = build_recursive(&g, &[0.0, 1.0], 3, &[0.0, 0.0]).unwrap();
        assert_eq!(s.piece(0), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn linear_data_with_matching_slope() {
        let g = KnotGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let s = build_recursive(&g, &[0.0, 1.0, 2.0], 3, &[1.0, 0.0]).unwrap();
        for i in 0..2 {
            let p = s.piece(i);
            assert!((p[1] - 1.0).abs() < 1e-15 && p[2].abs() < 1e-15 && p[3].abs() < 1e-15);
        }
    }

    #[test]
    fn quintic_reproduces_degree_five_polynomial() {
        // p(x) = 1 - 2x + x^3/3 + 0.1 x^5
        let p = |x: f64| [
            1.0 - 2.0 * x + x.powi(3) / 3.0 + 0.1 * x.powi(5),
            -2.0 + x * x + 0.5 * x.powi(4),
            2.0 * x + 2.0 * x.powi(3),
            2.0 + 6.0 * x * x,
            12.0 * x,
            12.0,
        ];
        // forward shooting amplifies rounding by ~23x per quintic interval,
        // so keep the interval count small
        let g = KnotGrid::new(vec![-1.0, -0.2, 0.5, 1.5]).unwrap();
        let y: Vec<f64> = g.knots().iter().map(|&x| p(x)[0]).collect();
        let d = p(-1.0);
        let s = build_recursive(&g, &y, 5, &d[1..5]).unwrap();
        for i in 0..g.intervals() {
            let xi = g.knots()[i];
            let exact = p(xi);
            // local coefficients are Taylor coefficients of p at x_i
            let fact = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];
            for k in 0..6 {
                let want = exact[k] / fact[k];
                assert!((s.piece(i)[k] - want).abs() < 1e-10, "piece {i} coeff {k}: {} vs {want}", s.piece(i)[k]);
            }
        }
    }

    #[test]
    fn size_mismatch_rejected() {
        let g = KnotGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            build_recursive(&g, &[0.0, 1.0], 3, &[0.0, 0.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(build_recursive(&g, &[0.0, 1.0, 2.0], 5, &[0.0, 0.0]).is_err());
    }
}
