use std::f64::consts::PI;

use crate::error::{Error, Result};

/// How knots are distributed over `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnotMode {
    Uniform,
    /// Chebyshev–Lobatto points; both endpoints are knots.
    Chebyshev,
}

/// Strictly increasing knot coordinates `x_0 < ... < x_n` with cached spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotGrid {
    knots: Vec<f64>,
    spacings: Vec<f64>,
}

impl KnotGrid {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Dimension {
                what: "knot count",
                expected: 2,
                got: knots.len(),
            });
        }
        if let Some(index) = knots
            .windows(2)
            .position(|w| !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite())
        {
            return Err(Error::UnsortedKnots { index: index + 1 });
        }
        let spacings = knots.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { knots, spacings })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// Number of intervals `n`.
    pub fn intervals(&self) -> usize {
        self.spacings.len()
    }

    pub fn a(&self) -> f64 {
        self.knots[0]
    }

    pub fn b(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacings.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Interval index containing `x`; `x = b` maps to the last interval.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let (a, b) = (self.a(), self.b());
        if !(x >= a && x <= b) {
            return Err(Error::OutOfDomain { x, a, b });
        }
        let idx = self.knots.partition_point(|&k| k <= x);
        Ok(idx.saturating_sub(1).min(self.intervals() - 1))
    }
}

/// Generate `n + 1` knots on `[a, b]`.
pub fn make_knots(a: f64, b: f64, n: usize, mode: KnotMode) -> Result<KnotGrid> {
    if !(a < b) || n < 1 || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidDomain { a, b, n });
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut knots: Vec<f64> = (0..=n)
        .map(|i| match mode {
            KnotMode::Uniform => a + (b - a) * i as f64 / n as f64,
            KnotMode::Chebyshev => mid - half * (i as f64 * PI / n as f64).cos(),
        })
        .collect();
    knots[0] = a;
    knots[n] = b;
    // cos(pi/2) is not exactly zero; keep the symmetric midpoint exact.
    if mode == KnotMode::Chebyshev && n % 2 == 0 {
        knots[n / 2] = mid;
    }
    KnotGrid::new(knots)
}

/// `count` uniformly spaced points on `[a, b]`, endpoints included exactly.
pub fn uniform_points(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let mut pts: Vec<f64> = (0..count)
                .map(|j| a + (b - a) * j as f64 / (count - 1) as f64)
                .collect();
            pts[count - 1] = b;
            pts
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_knots_are_arithmetic() {
        let g = make_knots(0.0, 2.0 * PI, 4, KnotMode::Uniform).unwrap();
        let expected = [0.0, PI / 2.0, PI, 1.5 * PI, 2.0 * PI];
        for (k, e) in g.knots().iter().zip(expected) {
            assert!((k - e).abs() < 1e-15);
        }
        assert_eq!(g.intervals(), 4);
    }

    #[test]
    fn chebyshev_lobatto_three_points() {
        let g = make_knots(-1.0, 1.0, 2, KnotMode::Chebyshev).unwrap();
        assert_eq!(g.knots(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn chebyshev_endpoints_exact_and_sorted() {
        let g = make_knots(0.0, 2.0, 7, KnotMode::Chebyshev).unwrap();
        assert_eq!(g.a(), 0.0);
        assert_eq!(g.b(), 2.0);
        assert!(g.spacings().iter().all(|&h| h > 0.0));
    }

    #[test]
    fn zero_intervals_rejected() {
        assert!(matches!(
            make_knots(0.0, 1.0, 0, KnotMode::Uniform),
            Err(Error::InvalidDomain { .. })
        ));
        assert!(make_knots(1.0, 1.0, 3, KnotMode::Uniform).is_err());
    }

    #[test]
    fn unsorted_knots_rejected() {
        assert!(matches!(
            KnotGrid::new(vec![0.0, 1.0, 1.0]),
            Err(Error::UnsortedKnots { index: 2 })
        ));
    }

    #[test]
    fn locate_maps_b_to_last_interval() {
        let g = make_knots(0.0, 1.0, 4, KnotMode::Uniform).unwrap();
        assert_eq!(g.locate(0.0).unwrap(), 0);
        assert_eq!(g.locate(0.25).unwrap(), 1);
        assert_eq!(g.locate(0.3).unwrap(), 1);
        assert_eq!(g.locate(1.0).unwrap(), 3);
        assert!(g.locate(1.0 + 1e-12).is_err());
        assert!(g.locate(f64::NAN).is_err());
    }
}
