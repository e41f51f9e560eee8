use nalgebra::DMatrix;

use crate::error::Result;
use crate::spline::{ClampedBuilder, KnotGrid};

/// Which knot values are optimization variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreePattern {
    knots: usize,
    free: Vec<usize>,
}

impl FreePattern {
    /// Every knot value is free.
    pub fn all(knots: usize) -> Self {
        Self {
            knots,
            free: (0..knots).collect(),
        }
    }

    /// First and last knot values are pinned.
    pub fn interior(knots: usize) -> Self {
        Self {
            knots,
            free: (1..knots.saturating_sub(1)).collect(),
        }
    }

    pub fn knots(&self) -> usize {
        self.knots
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    /// Full knot-value vector from the free values and the pinned ends.
    pub fn assemble(&self, free_values: &[f64], first: f64, last: f64) -> Vec<f64> {
        let mut y = vec![0.0; self.knots];
        y[0] = first;
        y[self.knots - 1] = last;
        for (&k, &v) in self.free.iter().zip(free_values) {
            y[k] = v;
        }
        y
    }

    pub fn extract(&self, y: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&k| y[k]).collect()
    }
}

/// Sensitivities of the cubic local coefficients `V_i = (a_i, b_i, c_i, d_i)`
/// with respect to the free knot values.
///
/// For the forward recursion started from `(v0, w0)`:
/// `grad_V_0 = A_0`, `grad_V_i = A_i + B_{i-1} grad_V_{i-1}`, and `H_i`
/// collects `dV_i/d(v0, w0)`. The clamped maps give
/// `V_i = P_i y + Q_i (S'(a), S'(b))` for the clamped spline.
/// Nothing here depends on the knot values.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTape {
    pattern: FreePattern,
    builders_a: Vec<DMatrix<f64>>,
    builders_b: Vec<DMatrix<f64>>,
    grads: Vec<DMatrix<f64>>,
    init: Vec<DMatrix<f64>>,
    clamped_y: Vec<DMatrix<f64>>,
    clamped_alpha: Vec<DMatrix<f64>>,
}

/// Build the tape for a cubic spline on `grid`.
pub fn coefficient_gradient_tape(grid: &KnotGrid, pattern: &FreePattern) -> Result<CoefficientTape> {
    let h = grid.spacings();
    let n = h.len();
    let knots = n + 1;
    let mut builders_a = Vec::with_capacity(n);
    let mut builders_b = Vec::with_capacity(n.saturating_sub(1));
    let mut full = Vec::with_capacity(n);
    let mut init = Vec::with_capacity(n);

    for i in 0..n {
        let hi = h[i];
        let h3 = hi * hi * hi;
        let mut a = DMatrix::zeros(4, knots);
        a[(0, i)] = 1.0;
        if i == 0 {
            a[(3, 0)] = -1.0 / h3;
            a[(3, 1)] = 1.0 / h3;
            let mut g = DMatrix::zeros(4, 2);
            g[(1, 0)] = 1.0;
            g[(2, 1)] = 0.5;
            g[(3, 0)] = -hi / h3;
            g[(3, 1)] = -0.5 * hi * hi / h3;
            full.push(a.clone());
            init.push(g);
        } else {
            // d_i = (y_{i+1} - y_i - b_i h_i - c_i h_i^2) / h_i^3
            a[(3, i)] = -1.0 / h3;
            a[(3, i + 1)] = 1.0 / h3;
            let hp = h[i - 1];
            let mut b = DMatrix::zeros(4, 4);
            b[(1, 1)] = 1.0;
            b[(1, 2)] = 2.0 * hp;
            b[(1, 3)] = 3.0 * hp * hp;
            b[(2, 2)] = 1.0;
            b[(2, 3)] = 3.0 * hp;
            for col in 0..4 {
                b[(3, col)] = -(b[(1, col)] * hi + b[(2, col)] * hi * hi) / h3;
            }
            full.push(&a + &b * &full[i - 1]);
            init.push(&b * &init[i - 1]);
            builders_b.push(b);
        }
        builders_a.push(a);
    }

    // The clamped maps are linear in (y, ends); probe the global builder with
    // unit data rather than eliminating through R'(b), which loses about
    // 3.7x per interval.
    let builder = ClampedBuilder::new(grid, 3)?;
    let probe = |y: &[f64], ends: &[f64]| builder.build(y, ends);
    let mut clamped_y = vec![DMatrix::zeros(4, knots); n];
    let mut clamped_alpha = vec![DMatrix::zeros(4, 2); n];
    let mut unit = vec![0.0; knots];
    for k in 0..knots {
        unit[k] = 1.0;
        let s = probe(&unit, &[0.0, 0.0])?;
        unit[k] = 0.0;
        for (i, m) in clamped_y.iter_mut().enumerate() {
            m.column_mut(k).copy_from_slice(s.piece(i));
        }
    }
    for (l, ends) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
        let s = probe(&unit, ends)?;
        for (i, m) in clamped_alpha.iter_mut().enumerate() {
            m.column_mut(l).copy_from_slice(s.piece(i));
        }
    }

    let select = |m: &DMatrix<f64>| {
        DMatrix::from_fn(m.nrows(), pattern.len(), |row, c| m[(row, pattern.free()[c])])
    };
    let grads = full.iter().map(select).collect();
    Ok(CoefficientTape {
        pattern: pattern.clone(),
        builders_a: builders_a.iter().map(select).collect(),
        builders_b,
        grads,
        init,
        clamped_y,
        clamped_alpha,
    })
}

impl CoefficientTape {
    pub fn pattern(&self) -> &FreePattern {
        &self.pattern
    }

    pub fn intervals(&self) -> usize {
        self.grads.len()
    }

    /// `A_i` restricted to the free columns.
    pub fn builder_a(&self, i: usize) -> &DMatrix<f64> {
        &self.builders_a[i]
    }

    /// `B_i`, mapping `V_i` into `V_{i+1}`.
    pub fn builder_b(&self, i: usize) -> &DMatrix<f64> {
        &self.builders_b[i]
    }

    /// `dV_i/dy_free` for the forward recursion with `(v0, w0)` held fixed.
    pub fn grad(&self, i: usize) -> &DMatrix<f64> {
        &self.grads[i]
    }

    /// `dV_i/d(v0, w0)`.
    pub fn init_sensitivity(&self, i: usize) -> &DMatrix<f64> {
        &self.init[i]
    }

    /// `dV_i/dy` (all knots) of the clamped spline with its end slopes held fixed.
    pub fn clamped_knots(&self, i: usize) -> &DMatrix<f64> {
        &self.clamped_y[i]
    }

    /// `dV_i/d(S'(a), S'(b))` of the clamped spline.
    pub fn clamped_ends(&self, i: usize) -> &DMatrix<f64> {
        &self.clamped_alpha[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::{build_recursive, make_knots, KnotMode};

    #[test]
    fn first_builder_difference_row() {
        let grid = make_knots(0.0, 4.0, 4, KnotMode::Uniform).unwrap();
        let tape = coefficient_gradient_tape(&grid, &FreePattern::all(5)).unwrap();
        let row: Vec<f64> = (0..5).map(|c| tape.builder_a(0)[(3, c)]).collect();
        assert_eq!(row, vec![-1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pinned_pattern_drops_end_columns() {
        let grid = make_knots(0.0, 1.0, 5, KnotMode::Uniform).unwrap();
        let tape = coefficient_gradient_tape(&grid, &FreePattern::interior(6)).unwrap();
        assert_eq!(tape.grad(2).ncols(), 4);
        assert_eq!(tape.pattern().free(), &[1, 2, 3, 4]);
    }

    #[test]
    fn matches_finite_differences_of_recursion() {
        let grid = KnotGrid::new(vec![0.0, 0.3, 0.7, 1.2, 1.5, 2.1]).unwrap();
        let tape = coefficient_gradient_tape(&grid, &FreePattern::all(6)).unwrap();
        let y = [0.2, -0.4, 0.9, 0.1, -0.3, 0.5];
        let (v0, w0) = (0.7, -1.1);
        for k in 0..6 {
            let step = 1e-6;
            let mut yp = y;
            let mut ym = y;
            yp[k] += step;
            ym[k] -= step;
            let sp = build_recursive(&grid, &yp, 3, &[v0, w0]).unwrap();
            let sm = build_recursive(&grid, &ym, 3, &[v0, w0]).unwrap();
            for i in 0..5 {
                for row in 0..4 {
                    let fd = (sp.piece(i)[row] - sm.piece(i)[row]) / (2.0 * step);
                    let exact = tape.grad(i)[(row, k)];
                    assert!((fd - exact).abs() <= 1e-7 * (1.0 + exact.abs()), "{i} {row} {k}: {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn clamped_maps_reproduce_the_clamped_spline() {
        let grid = KnotGrid::new(vec![-1.0, -0.4, 0.1, 0.8, 1.0]).unwrap();
        let tape = coefficient_gradient_tape(&grid, &FreePattern::all(5)).unwrap();
        let y = [0.3, 0.1, -0.2, 0.6, 0.4];
        let ends = [1.3, -0.7];
        let s = crate::spline::build_clamped(&grid, &y, 3, &ends).unwrap();
        let yv = nalgebra::DVector::from_row_slice(&y);
        let ev = nalgebra::DVector::from_row_slice(&ends);
        for i in 0..4 {
            let v = tape.clamped_knots(i) * &yv + tape.clamped_ends(i) * &ev;
            for row in 0..4 {
                assert!((v[row] - s.piece(i)[row]).abs() < 1e-11);
            }
        }
    }
}
