use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splinebvp::bench::builtin;
use splinebvp::coupling::newton::{newton_solve, Jacobian, DEFAULT_MAX_ITER, DEFAULT_TOL};
use splinebvp::coupling::*;
use splinebvp::solver::{solve, KnotPolicy, SolverConfig};
use splinebvp::spline::*;

fn partials(x: f64, state: [f64; 5]) -> Partials {
    Partials { x, state }
}

#[test]
fn newton_examples() {
    let sq = |x: &[f64], r: &mut [f64]| r[0] = x[0] * x[0] - 4.0;
    let s = newton_solve(&sq, Jacobian::CentralDifference, &[3.0], 1e-12, 50).unwrap();
    assert!((s.x[0] - 2.0).abs() < 1e-12);

    let lin = |x: &[f64], r: &mut [f64]| {
        r[0] = 2.0 * x[0] + x[1] - 3.0;
        r[1] = x[0] - 4.0 * x[1] + 1.0;
    };
    let jac = |_: &[f64], j: &mut DMatrix<f64>| {
        j.copy_from_slice(&[2.0, 1.0, 1.0, -4.0]);
    };
    let s = newton_solve(&lin, Jacobian::Analytic(&jac), &[10.0, -7.0], 1e-12, 50).unwrap();
    assert_eq!(s.iterations, 1);

    let sys = |x: &[f64], r: &mut [f64]| {
        r[0] = x[0] + x[1] - 3.0;
        r[1] = x[0] * x[1] - 2.0;
    };
    let s = newton_solve(&sys, Jacobian::CentralDifference, &[3.0, 0.0], 1e-12, 50).unwrap();
    let mut r = [0.0; 2];
    sys(&s.x, &mut r);
    assert!(r.iter().all(|v| v.abs() <= 1e-12));
    let mut roots = [s.x[0], s.x[1]];
    roots.sort_by(f64::total_cmp);
    assert!((roots[0] - 1.0).abs() < 1e-10 && (roots[1] - 2.0).abs() < 1e-10);
}

#[test]
fn singular_jacobian_is_reported() {
    let flat = |x: &[f64], r: &mut [f64]| {
        r[0] = x[0] + x[1] - 1.0;
        r[1] = 2.0 * x[0] + 2.0 * x[1] - 3.0;
    };
    let err = newton_solve(&flat, Jacobian::CentralDifference, &[0.0, 0.0], DEFAULT_TOL, DEFAULT_MAX_ITER);
    assert!(matches!(err, Err(splinebvp::Error::SingularSystem { .. })));
}

/// `F = w - f(x)` on `[a, b]`.
fn forced(a: f64, b: f64, f: fn(f64) -> f64, df: fn(f64) -> f64) -> OdeProblem {
    OdeProblem::second_order(a, b, move |x, s| s[2] - f(x), move |x, _| partials(-df(x), [0.0, 0.0, 1.0, 0.0, 0.0]))
        .unwrap()
        .with_affine_top(true)
}

#[test]
fn neumann_cubic_is_verbatim() {
    let grid = make_knots(0.0, 2.0, 6, KnotMode::Chebyshev).unwrap();
    let y = [0.1, 0.4, -0.3, 0.2, 0.9, -0.1, 0.0];
    let basis = basic_clamped_set(&grid, &y, 3).unwrap();
    let p = forced(0.0, 2.0, |x| x.sin(), |x| x.cos());
    let bc = BoundarySpec::Neumann { va: PI, vb: PI / 3.0 };
    let r = resolve_alphas(&p, &bc, &basis, None).unwrap();
    assert_eq!(r.alpha.values(), &[PI, PI / 3.0]);
}

#[test]
fn quintic_neumann_affine_closed_form() {
    let f = |x: f64| 1.0 + x * x;
    let grid = make_knots(-1.0, 2.0, 5, KnotMode::Uniform).unwrap();
    let y = [0.3, -0.2, 0.5, 0.1, 0.7, -0.4];
    let basis = basic_clamped_set(&grid, &y, 5).unwrap();
    let p = forced(-1.0, 2.0, f, |x| 2.0 * x);
    let bc = BoundarySpec::Neumann { va: 0.5, vb: -1.5 };
    let r = resolve_alphas(&p, &bc, &basis, None).unwrap();
    let al = r.alpha.values();
    assert_eq!(al[0], 0.5);
    assert_eq!(al[2], -1.5);
    assert!((al[1] - f(-1.0)).abs() < 1e-12);
    assert!((al[3] - f(2.0)).abs() < 1e-12);
}

#[test]
fn dirichlet_cubic_hand_solution() {
    // exact solution x^3 on [0, 1], one interval
    let p = forced(0.0, 1.0, |x| 6.0 * x, |_| 6.0);
    let grid = KnotGrid::new(vec![0.0, 1.0]).unwrap();
    let basis = basic_clamped_set(&grid, &[0.0, 1.0], 3).unwrap();
    let bc = BoundarySpec::Dirichlet { ua: 0.0, ub: 1.0 };
    let r = resolve_alphas(&p, &bc, &basis, None).unwrap();
    let al = r.alpha.values();
    assert!(al[0].abs() < 1e-12 && (al[1] - 3.0).abs() < 1e-12, "{al:?}");
}

fn beam_problem() -> OdeProblem {
    OdeProblem::fourth_order(
        0.0,
        1.0,
        |x, s| s[4] - s[0] - x,
        |_, _| partials(-1.0, [-1.0, 0.0, 0.0, 0.0, 1.0]),
    )
    .unwrap()
}

fn affine(cu: f64, cv: f64, cw: f64, rhs: f64) -> BoundaryFunction {
    BoundaryFunction::new(
        move |_, s| cu * s[0] + cv * s[1] + cw * s[2] - rhs,
        move |_, _| [cu, cv, cw],
    )
}

#[test]
fn fourth_order_explicit_derivatives() {
    let grid = make_knots(0.0, 1.0, 4, KnotMode::Uniform).unwrap();
    let y = [0.0, 0.2, -0.1, 0.4, 0.3];
    let basis = basic_clamped_set(&grid, &y, 5).unwrap();
    let bc = BoundarySpec::FourthOrder {
        left: [affine(0.0, 1.0, 0.0, 1.0), affine(0.0, 0.0, 1.0, 2.0)],
        right: [affine(0.0, 1.0, 0.0, -0.5), affine(0.0, 0.0, 1.0, 0.25)],
        affine: true,
    };
    let r = resolve_alphas(&beam_problem(), &bc, &basis, None).unwrap();
    let al = r.alpha.values();
    for (got, want) in al.iter().zip([1.0, 2.0, -0.5, 0.25]) {
        assert!((got - want).abs() < 1e-14);
    }
}

#[test]
fn fourth_order_affine_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = make_knots(0.0, 1.0, 5, KnotMode::Uniform).unwrap();
    for _ in 0..10 {
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
        let basis = basic_clamped_set(&grid, &y, 5).unwrap();
        let bc = BoundarySpec::FourthOrder {
            left: [affine(c[0], c[1], c[2], c[3]), affine(c[4], c[5], c[6], c[7])],
            right: [affine(c[8], c[9], c[10], c[11]), affine(c[12], c[13], c[14], c[15])],
            affine: true,
        };
        let r = resolve_alphas(&beam_problem(), &bc, &basis, None).unwrap();
        let al = r.alpha.values();
        for (k, u) in [(0usize, y[0]), (8usize, y[5])] {
            let m = Matrix2::new(c[k + 1], c[k + 2], c[k + 5], c[k + 6]);
            let rhs = Vector2::new(c[k + 3] - c[k] * u, c[k + 7] - c[k + 4] * u);
            let want = m.lu().solve(&rhs).unwrap();
            let off = if k == 0 { 0 } else { 2 };
            for j in 0..2 {
                assert!((al[off + j] - want[j]).abs() <= 1e-12 * (1.0 + want[j].abs()));
            }
        }
    }
}

fn random_y(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Every built-in problem and degree: the assembled spline meets its boundary
/// conditions for random interior data.
#[test]
fn boundary_exactness_all_variants() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for bp in splinebvp::bench::builtin_problems() {
        let degrees: &[usize] = if bp.problem.order() == 4 { &[5] } else { &[3, 5] };
        for &degree in degrees {
            let (a, b) = bp.domain();
            let grid = make_knots(a, b, 7, bp.knot_mode).unwrap();
            for _ in 0..5 {
                let mut y = random_y(&mut rng, 8);
                if let (Some(ua), Some(ub)) = bp.bc.pinned() {
                    y[0] = ua;
                    y[7] = ub;
                }
                let basis = basic_clamped_set(&grid, &y, degree).unwrap();
                let r = match resolve_alphas(&bp.problem, &bp.bc, &basis, None) {
                    Ok(r) => r,
                    Err(e) => panic!("{} q{degree}: {e}", bp.name),
                };
                let s = combine_basis(&basis, r.alpha.values()).unwrap();
                for res in bp.bc.residuals(&s) {
                    assert!(res.abs() <= 1e-10, "{} q{degree}: {res:e}", bp.name);
                }
                if degree == 5 && bp.problem.order() == 2 && !matches!(bp.bc, BoundarySpec::Robin { .. }) {
                    for (x, right) in [(a, false), (b, true)] {
                        let st = if right {
                            [s.right(0), s.right(1), s.right(2)]
                        } else {
                            [s.left(0), s.left(1), s.left(2)]
                        };
                        assert!(bp.problem.residual(x, &st).abs() <= 1e-11, "{} endpoint ODE", bp.name);
                    }
                }
            }
        }
    }
}

#[test]
fn robin_closed_form() {
    let bp = builtin("bvp4").unwrap();
    let grid = make_knots(-1.0, 1.0, 6, KnotMode::Uniform).unwrap();
    let y = [0.2, 0.5, 0.3, -0.1, 0.8, 0.4, 0.6];
    let basis = basic_clamped_set(&grid, &y, 3).unwrap();
    let r = resolve_alphas(&bp.problem, &bp.bc, &basis, None).unwrap();
    assert_eq!(r.newton_iterations, 0);
    let al = r.alpha.values();
    assert!((al[0] - (1.0 - y[0])).abs() < 1e-14 && (al[1] - (-1.0 + y[6])).abs() < 1e-14);
}

/// Accepted optimizer iterates before the warm-start locality check applies.
/// The first L-BFGS steps move the boundary coefficients by O(1).
const TRANSIENT: usize = 15;

/// Warm-started boundary solves converge within 5 Newton iterations through
/// whole solves of the five benchmark problems, once past the opening steps.
#[test]
fn warm_started_newton_is_local() {
    for name in ["bvp1", "bvp2", "bvp3", "bvp4", "bvp5"] {
        let bp = builtin(name).unwrap();
        for seed in 1..=3 {
            let cfg = SolverConfig {
                degree: bp.degree,
                n: 7,
                seed,
                knot_policy: match bp.knot_mode {
                    KnotMode::Chebyshev => KnotPolicy::Chebyshev,
                    KnotMode::Uniform => KnotPolicy::Uniform,
                },
                ..Default::default()
            };
            let sol = solve(&bp.problem, &bp.bc, &cfg).unwrap();
            let history = &sol.warm_newton_history;
            let local = history.iter().skip(TRANSIENT).copied().max().unwrap_or(0);
            println!(
                "{name} seed {seed}: {} accepted, max {} overall, {local} after {TRANSIENT}",
                history.len(),
                sol.max_warm_newton_iterations
            );
            assert!(local <= 5, "{name} seed {seed}: {history:?}");
        }
    }
}
