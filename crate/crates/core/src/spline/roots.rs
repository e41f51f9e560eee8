use super::piecewise::{local_derivative, PiecewisePolynomial};
use crate::error::{Error, Result};

const SUBDIVISIONS: usize = 32;

/// Interior zeros of `S^(order)`, sorted, with near-duplicates merged.
///
/// Degree-1 and degree-2 factors are solved in closed form; higher-degree
/// pieces are bracketed on a sub-grid and refined with safeguarded Newton.
/// Roots within `1e-8 (b - a)` of an endpoint are dropped.
pub fn derivative_roots(spline: &PiecewisePolynomial, order: usize) -> Result<Vec<f64>> {
    if order == 0 || order >= spline.degree() {
        return Err(Error::DerivativeOrder {
            order,
            degree: spline.degree(),
        });
    }
    let grid = spline.grid();
    let (a, b) = (grid.a(), grid.b());
    let merge_tol = 1e-8 * (b - a);
    let mut roots = Vec::new();
    for i in 0..spline.intervals() {
        let h = grid.spacings()[i];
        let x0 = grid.knots()[i];
        // coefficients of the derivative polynomial in t
        let c = spline.piece(i);
        let dc: Vec<f64> = (order..c.len())
            .map(|j| c[j] * ((j + 1 - order)..=j).fold(1.0, |p, f| p * f as f64))
            .collect();
        let mut local = match dc.len() - 1 {
            1 => linear_roots(dc[0], dc[1]),
            2 => quadratic_roots(dc[0], dc[1], dc[2]),
            _ => bracketed_roots(c, order, h),
        };
        local.retain(|&t| t >= -1e-12 * h && t <= h * (1.0 + 1e-12));
        roots.extend(local.into_iter().map(|t| x0 + t.clamp(0.0, h)));
    }
    roots.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        if r - a <= merge_tol || b - r <= merge_tol {
            continue;
        }
        match merged.last() {
            Some(&last) if r - last <= merge_tol => {}
            _ => merged.push(r),
        }
    }
    Ok(merged)
}

fn linear_roots(c0: f64, c1: f64) -> Vec<f64> {
    if c1 == 0.0 {
        Vec::new()
    } else {
        vec![-c0 / c1]
    }
}

fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if c2.abs() <= 1e-14 * scale {
        return linear_roots(c0, c1);
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    let mut r = vec![q / c2, c0 / q];
    r.sort_by(f64::total_cmp);
    r
}

fn bracketed_roots(c: &[f64], order: usize, h: f64) -> Vec<f64> {
    let f = |t: f64| local_derivative(c, t, order);
    let mut out = Vec::new();
    let mut t_prev = 0.0;
    let mut f_prev = f(0.0);
    if f_prev == 0.0 {
        out.push(0.0);
    }
    for k in 1..=SUBDIVISIONS {
        let t = h * k as f64 / SUBDIVISIONS as f64;
        let ft = f(t);
        if ft == 0.0 {
            out.push(t);
        } else if f_prev != 0.0 && f_prev.signum() != ft.signum() {
            out.push(refine(&f, |t| local_derivative(c, t, order + 1), t_prev, t));
        }
        t_prev = t;
        f_prev = ft;
    }
    out
}

/// Newton steps kept inside a shrinking bisection bracket.
fn refine(f: &impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let ft = f(t);
        if ft == 0.0 {
            return t;
        }
        if ft.signum() == f_lo.signum() {
            lo = t;
            f_lo = ft;
        } else {
            hi = t;
        }
        let d = df(t);
        let newton = t - ft / d;
        t = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
    }
    t
}
