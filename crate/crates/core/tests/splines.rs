use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splinebvp::spline::*;

fn grid_from_gaps(start: f64, gaps: &[f64]) -> KnotGrid {
    let mut knots = vec![start];
    for g in gaps {
        knots.push(knots.last().unwrap() + g);
    }
    KnotGrid::new(knots).unwrap()
}

/// Classical clamped cubic through second-derivative moments M_i:
/// h_{i-1} M_{i-1} + 2 (h_{i-1} + h_i) M_i + h_i M_{i+1} = 6 (d_i - d_{i-1}),
/// with the clamp rows at both ends, solved by the Thomas algorithm.
fn moment_oracle(x: &[f64], y: &[f64], v0: f64, vn: f64) -> impl Fn(f64) -> f64 {
    let n = x.len() - 1;
    let h: Vec<f64> = (0..n).map(|i| x[i + 1] - x[i]).collect();
    let d: Vec<f64> = (0..n).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let m = n + 1;
    let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    di[0] = 2.0 * h[0];
    up[0] = h[0];
    rhs[0] = 6.0 * (d[0] - v0);
    for i in 1..n {
        lo[i] = h[i - 1];
        di[i] = 2.0 * (h[i - 1] + h[i]);
        up[i] = h[i];
        rhs[i] = 6.0 * (d[i] - d[i - 1]);
    }
    lo[n] = h[n - 1];
    di[n] = 2.0 * h[n - 1];
    rhs[n] = 6.0 * (vn - d[n - 1]);
    for i in 1..m {
        let w = lo[i] / di[i - 1];
        di[i] -= w * up[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut mom = vec![0.0; m];
    mom[n] = rhs[n] / di[n];
    for i in (0..n).rev() {
        mom[i] = (rhs[i] - up[i] * mom[i + 1]) / di[i];
    }
    let (x, y) = (x.to_vec(), y.to_vec());
    move |t: f64| {
        let i = x.partition_point(|&k| k <= t).clamp(1, n) - 1;
        let (a, b) = (x[i + 1] - t, t - x[i]);
        let hi = h[i];
        mom[i] * a.powi(3) / (6.0 * hi)
            + mom[i + 1] * b.powi(3) / (6.0 * hi)
            + (y[i] - mom[i] * hi * hi / 6.0) * a / hi
            + (y[i + 1] - mom[i + 1] * hi * hi / 6.0) * b / hi
    }
}

#[test]
fn cubic_clamp_matches_tridiagonal_oracle() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=12usize);
        let gaps: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
        let grid = grid_from_gaps(rng.random_range(-2.0..2.0), &gaps);
        let y: Vec<f64> = (0..=n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (v0, vn) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let s = build_clamped(&grid, &y, 3, &[v0, vn]).unwrap();
        let oracle = moment_oracle(grid.knots(), &y, v0, vn);
        let mut worst = 0.0f64;
        for t in uniform_points(grid.a(), grid.b(), 50) {
            worst = worst.max((s.eval(t, 0).unwrap() - oracle(t)).abs());
        }
        assert!(worst <= 1e-9, "seed {seed}: {worst:e}");
    }
}

#[test]
fn four_knot_oracle_example() {
    let grid = KnotGrid::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let y = [0.4, -1.1, 0.7, 0.2];
    let s = build_clamped(&grid, &y, 3, &[0.5, -0.25]).unwrap();
    let oracle = moment_oracle(grid.knots(), &y, 0.5, -0.25);
    for t in uniform_points(0.0, 3.0, 50) {
        assert!((s.eval(t, 0).unwrap() - oracle(t)).abs() < 1e-10);
    }
}

#[test]
fn make_knots_examples() {
    use std::f64::consts::PI;
    let g = make_knots(0.0, 2.0 * PI, 4, KnotMode::Uniform).unwrap();
    let want = [0.0, PI / 2.0, PI, 1.5 * PI, 2.0 * PI];
    for (k, w) in g.knots().iter().zip(want) {
        assert!((k - w).abs() < 1e-15);
    }
    let c = make_knots(-1.0, 1.0, 2, KnotMode::Chebyshev).unwrap();
    assert_eq!(c.knots()[0], -1.0);
    assert!(c.knots()[1].abs() < 1e-15);
    assert_eq!(c.knots()[2], 1.0);
    assert!(make_knots(0.0, 1.0, 0, KnotMode::Uniform).is_err());
    assert!(make_knots(1.0, 1.0, 3, KnotMode::Uniform).is_err());
}

#[test]
fn recursive_examples() {
    let g = KnotGrid::new(vec![0.0, 1.0]).unwrap();
    let s = build_recursive(&g, &[0.0, 1.0], 3, &[0.0, 0.0]).unwrap();
    assert_eq!(s.piece(0), &[0.0, 0.0, 0.0, 1.0]);
    assert_eq!(s.eval(0.5, 2).unwrap(), 3.0);
    assert!(s.eval(1.5, 0).is_err());
    assert!(s.eval(0.5, 4).is_err());
}

#[test]
fn basis_signatures() {
    let grid = make_knots(0.0, 2.0, 5, KnotMode::Uniform).unwrap();
    let y = [0.3, -0.2, 0.8, 0.1, -0.5, 0.6];
    let cubic = basic_clamped_set(&grid, &y, 3).unwrap();
    let w1 = &cubic.members()[1];
    assert!((w1.left(1) - 1.0).abs() < 1e-12 && w1.right(1).abs() < 1e-12);
    let quintic = basic_clamped_set(&grid, &y, 5).unwrap();
    let w2 = &quintic.members()[2];
    assert!((w2.left(2) - 1.0).abs() < 1e-10 && w2.left(1).abs() < 1e-12);
    for set in [&cubic, &quintic] {
        for m in set.members() {
            for (x, yi) in grid.knots().iter().zip(y) {
                assert!((m.eval(*x, 0).unwrap() - yi).abs() < 1e-12);
            }
        }
    }
    assert_eq!(combine_basis(&cubic, &[1.0, 0.0]).unwrap(), cubic.members()[1]);
    assert_eq!(combine_basis(&cubic, &[0.0, 0.0]).unwrap(), cubic.members()[0]);
    assert!(combine_basis(&cubic, &[0.0, 0.0, 0.0]).is_err());
}

#[test]
fn roots_of_clamped_sine() {
    use std::f64::consts::PI;
    let grid = make_knots(0.0, 6.0 * PI, 24, KnotMode::Uniform).unwrap();
    let y: Vec<f64> = grid.knots().iter().map(|x| x.sin()).collect();
    let s = build_clamped(&grid, &y, 3, &[1.0, 1.0]).unwrap();
    let r = derivative_roots(&s, 1).unwrap();
    assert_eq!(r.len(), 6);
    for (k, x) in r.iter().enumerate() {
        assert!((x - (PI / 2.0 + k as f64 * PI)).abs() < 0.2);
    }
    let line = build_clamped(&grid, &grid.knots().to_vec(), 3, &[1.0, 1.0]).unwrap();
    assert!(derivative_roots(&line, 1).unwrap().is_empty());
}

#[test]
fn resample_examples() {
    let g = KnotGrid::new(vec![0.0, 1.0]).unwrap();
    let cube = build_recursive(&g, &[0.0, 1.0], 3, &[0.0, 0.0]).unwrap();
    let other = KnotGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
    assert_eq!(cube.resample(&other).unwrap(), vec![0.0, 0.125, 1.0]);
    assert_eq!(cube.resample(&g).unwrap(), vec![0.0, 1.0]);
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(0.1f64..2.0, n),
            prop::collection::vec(-5.0f64..5.0, n + 1),
            prop::collection::vec(-5.0f64..5.0, 4),
        )
    })
}

fn poly(c: &[f64], x: f64, order: usize) -> f64 {
    let mut s = 0.0;
    for (k, &ck) in c.iter().enumerate().skip(order) {
        let fall: f64 = (0..order).map(|j| (k - j) as f64).product();
        s += ck * fall * x.powi((k - order) as i32);
    }
    s
}

proptest! {
    #[test]
    fn interpolation_and_smoothness((gaps, y, ends) in instance(), quintic in any::<bool>()) {
        let grid = grid_from_gaps(-1.0, &gaps);
        let (degree, e) = if quintic { (5, ends.clone()) } else { (3, ends[..2].to_vec()) };
        let s = build_clamped(&grid, &y, degree, &e).unwrap();
        let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, yi) in grid.knots().iter().zip(&y) {
            prop_assert!((s.eval(*x, 0).unwrap() - yi).abs() <= 1e-10 * scale);
        }
        for i in 1..grid.intervals() {
            let h = grid.spacings()[i - 1];
            for k in 0..degree {
                let left = s.eval_in(i - 1, h, k);
                let right = s.eval_in(i, 0.0, k);
                prop_assert!((left - right).abs() <= 1e-9 * (1.0 + left.abs().max(right.abs())) * scale,
                    "knot {} order {}: {} vs {}", i, k, left, right);
            }
        }
        prop_assert!((s.left(1) - e[0]).abs() <= 1e-10 * scale);
        if quintic {
            prop_assert!((s.left(2) - e[1]).abs() <= 1e-10 * scale);
            prop_assert!((s.right(1) - e[2]).abs() <= 1e-10 * scale);
            prop_assert!((s.right(2) - e[3]).abs() <= 1e-10 * scale);
        } else {
            prop_assert!((s.right(1) - e[1]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn polynomial_reproduction(gaps in prop::collection::vec(0.2f64..1.0, 2..10),
                               c in prop::collection::vec(-2.0f64..2.0, 6), quintic in any::<bool>()) {
        let grid = grid_from_gaps(-1.5, &gaps);
        let degree = if quintic { 5 } else { 3 };
        let c = &c[..=degree];
        let y: Vec<f64> = grid.knots().iter().map(|&x| poly(c, x, 0)).collect();
        let (a, b) = (grid.a(), grid.b());
        let ends = if quintic {
            vec![poly(c, a, 1), poly(c, a, 2), poly(c, b, 1), poly(c, b, 2)]
        } else {
            vec![poly(c, a, 1), poly(c, b, 1)]
        };
        let s = build_clamped(&grid, &y, degree, &ends).unwrap();
        let pts = uniform_points(a, b, 200);
        let scale = pts.iter().fold(1.0f64, |m, &x| m.max(poly(c, x, 0).abs()));
        for x in pts {
            prop_assert!((s.eval(x, 0).unwrap() - poly(c, x, 0)).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn affine_identity((gaps, y, ends) in instance(), quintic in any::<bool>()) {
        let grid = grid_from_gaps(0.0, &gaps);
        let (degree, e) = if quintic { (5, ends.clone()) } else { (3, ends[..2].to_vec()) };
        let basis = basic_clamped_set(&grid, &y, degree).unwrap();
        let via_basis = combine_basis(&basis, &e).unwrap();
        let direct = build_clamped(&grid, &y, degree, &e).unwrap();
        for x in uniform_points(grid.a(), grid.b(), 40) {
            let (p, q) = (via_basis.eval(x, 0).unwrap(), direct.eval(x, 0).unwrap());
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()), "{} vs {}", p, q);
        }
    }

    #[test]
    fn relocated_grid_is_increasing(gaps in prop::collection::vec(0.3f64..1.0, 3..10),
                                    y in prop::collection::vec(-1.0f64..1.0, 11)) {
        let grid = grid_from_gaps(0.0, &gaps);
        let y = &y[..grid.knots().len()];
        let s = build_clamped(&grid, y, 3, &[0.0, 0.0]).unwrap();
        let g = splinebvp::solver::relocate_knots(&s, 0.02, grid.intervals()).unwrap();
        prop_assert_eq!(g.a(), grid.a());
        prop_assert_eq!(g.b(), grid.b());
        prop_assert!(g.knots().windows(2).all(|w| w[1] > w[0]));
    }
}
