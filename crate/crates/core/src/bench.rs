//! Built-in manufactured problems, reference splines and error metrics.
//!
//! Every problem is `L(u, u', ...) = f(x)` with `f` obtained by substituting a
//! known solution into `L`. `L` never depends on `x` explicitly, so
//! `dF/dx = -f'(x) = -sum_k dL/du^(k) * u^(k+1)` needs only one extra exact
//! derivative.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::coupling::{BoundaryFunction, BoundarySpec, OdeProblem, Partials};
use crate::error::{Error, Result};
use crate::gradient::{Collocation, LossEvaluator, Norm};
use crate::spline::{uniform_points, KnotGrid, KnotMode, PiecewisePolynomial};

/// Number of exact derivatives carried (orders 0 through 5).
pub const JET: usize = 6;

type JetFn = Arc<dyn Fn(f64) -> [f64; JET] + Send + Sync>;

/// A known solution with derivatives up to order 5.
#[derive(Clone)]
pub struct ExactSolution {
    jet: JetFn,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution")
    }
}

impl ExactSolution {
    pub fn new(jet: impl Fn(f64) -> [f64; JET] + Send + Sync + 'static) -> Self {
        Self { jet: Arc::new(jet) }
    }

    /// `[u, u', ..., u^(5)]` at `x`.
    pub fn jet(&self, x: f64) -> [f64; JET] {
        (self.jet)(x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x)[0]
    }
}

/// `sin x`.
pub fn sine() -> ExactSolution {
    ExactSolution::new(|x| {
        let (s, c) = x.sin_cos();
        [s, c, -s, -c, s, c]
    })
}

/// `x e^{-x} sin x`, as `Im(x e^{(-1+i)x})`.
pub fn damped_sine() -> ExactSolution {
    ExactSolution::new(|x| {
        let lam = Complex64::new(-1.0, 1.0);
        let e = (lam * x).exp();
        let mut out = [0.0; JET];
        let mut pow = Complex64::new(1.0, 0.0);
        let mut prev = Complex64::new(0.0, 0.0);
        for (k, o) in out.iter_mut().enumerate() {
            // d^k/dx^k x e^{lam x} = e^{lam x} (lam^k x + k lam^(k-1))
            *o = (e * (pow * x + prev * k as f64)).im;
            prev = pow;
            pow *= lam;
        }
        out
    })
}

/// `sin(pi x) / (1 + x)` by the Leibniz rule.
pub fn sine_over_linear() -> ExactSolution {
    ExactSolution::new(|x| {
        let mut s = [0.0; JET];
        let mut r = [0.0; JET];
        let mut fact = 1.0;
        for k in 0..JET {
            s[k] = PI.powi(k as i32) * (PI * x + k as f64 * PI / 2.0).sin();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            r[k] = sign * fact / (1.0 + x).powi(k as i32 + 1);
            fact *= (k + 1) as f64;
        }
        let mut out = [0.0; JET];
        for (k, o) in out.iter_mut().enumerate() {
            let mut binom = 1.0;
            for j in 0..=k {
                *o += binom * s[j] * r[k - j];
                binom *= (k - j) as f64 / (j + 1) as f64;
            }
        }
        out
    })
}

/// `1 / (1 + x^2)`, as `Im(1 / (x - i))`.
pub fn lorentzian() -> ExactSolution {
    ExactSolution::new(|x| {
        let z = Complex64::new(x, -1.0);
        let mut out = [0.0; JET];
        let mut fact = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *o = (sign * fact * z.powi(-(k as i32) - 1)).im;
            fact *= (k + 1) as f64;
        }
        out
    })
}

type Lhs = fn(&[f64]) -> f64;
type LhsGrad = fn(&[f64]) -> [f64; 5];

/// `F = L(state) - L(exact state at x)` with analytic partials.
fn manufactured(order: usize, a: f64, b: f64, lhs: Lhs, grad: LhsGrad, exact: &ExactSolution, affine_top: bool) -> OdeProblem {
    let ex_r = exact.clone();
    let ex_p = exact.clone();
    OdeProblem::new(
        order,
        a,
        b,
        move |x, s| lhs(s) - lhs(&ex_r.jet(x)[..=order]),
        move |x, s| {
            let u = ex_p.jet(x);
            let ge = grad(&u[..=order]);
            let fx: f64 = (0..=order).map(|k| ge[k] * u[k + 1]).sum();
            Partials {
                x: -fx,
                state: grad(s),
            }
        },
    )
    .expect("built-in operators are finite on their domains")
    .with_affine_top(affine_top)
}

#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub description: &'static str,
    pub problem: OdeProblem,
    pub bc: BoundarySpec,
    pub exact: ExactSolution,
    /// Degree used by the reference experiments.
    pub degree: usize,
    pub knot_mode: KnotMode,
}

impl BenchmarkProblem {
    pub fn domain(&self) -> (f64, f64) {
        self.problem.domain()
    }

    /// Largest `|F|` of the exact solution over `count` uniform points.
    pub fn consistency_defect(&self, count: usize) -> f64 {
        let (a, b) = self.domain();
        let order = self.problem.order();
        uniform_points(a, b, count)
            .into_iter()
            .map(|x| self.problem.residual(x, &self.exact.jet(x)[..=order]).abs())
            .fold(0.0, f64::max)
    }
}

fn bvp1_lhs(s: &[f64]) -> f64 {
    s[2] + s[1] + (s[1] * s[0]).sin()
}

fn bvp1_grad(s: &[f64]) -> [f64; 5] {
    let c = (s[1] * s[0]).cos();
    [c * s[1], 1.0 + c * s[0], 1.0, 0.0, 0.0]
}

fn bvp2_lhs(s: &[f64]) -> f64 {
    let (u, v, w) = (s[0], s[1], s[2]);
    w + v * v - v * v * v + v * u + u.sin().powi(3)
}

fn bvp2_grad(s: &[f64]) -> [f64; 5] {
    let (u, v) = (s[0], s[1]);
    let (su, cu) = u.sin_cos();
    [v + 3.0 * su * su * cu, 2.0 * v - 3.0 * v * v + u, 1.0, 0.0, 0.0]
}

fn bvp3_lhs(s: &[f64]) -> f64 {
    let (u, w) = (s[0], s[2]);
    -w + 1.0 / (1.0 + w * w) + u * u * u
}

fn bvp3_grad(s: &[f64]) -> [f64; 5] {
    let (u, w) = (s[0], s[2]);
    let d = 1.0 + w * w;
    [3.0 * u * u, 0.0, -1.0 - 2.0 * w / (d * d), 0.0, 0.0]
}

fn bvp4_lhs(s: &[f64]) -> f64 {
    s[2] + s[1] * s[1] + (s[1] * s[0]).sin()
}

fn bvp4_grad(s: &[f64]) -> [f64; 5] {
    let c = (s[1] * s[0]).cos();
    [c * s[1], 2.0 * s[1] + c * s[0], 1.0, 0.0, 0.0]
}

fn bvp5_lhs(s: &[f64]) -> f64 {
    -s[2] + s[1] + s[0].sin()
}

fn bvp5_grad(s: &[f64]) -> [f64; 5] {
    [s[0].cos(), 1.0, -1.0, 0.0, 0.0]
}

fn beam_lhs(s: &[f64]) -> f64 {
    s[4] + s[0] + s[1] * s[0].sin()
}

fn beam_grad(s: &[f64]) -> [f64; 5] {
    let (su, cu) = s[0].sin_cos();
    [1.0 + s[1] * cu, su, 0.0, 0.0, 1.0]
}

fn affine_bc(cu: f64, cv: f64, cw: f64, rhs: f64) -> BoundaryFunction {
    BoundaryFunction::new(
        move |_, s| cu * s[0] + cv * s[1] + cw * s.get(2).copied().unwrap_or(0.0) - rhs,
        move |_, _| [cu, cv, cw],
    )
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 8] = ["bvp1", "bvp2", "bvp3", "bvp4", "bvp5", "bvp1_long", "bvp1_sinc", "beam4"];

/// All built-in benchmark problems, in [`BUILTIN_NAMES`] order.
pub fn builtin_problems() -> Vec<BenchmarkProblem> {
    BUILTIN_NAMES.iter().map(|n| builtin(n).expect("listed name")).collect()
}

/// One built-in problem by name.
pub fn builtin(name: &str) -> Option<BenchmarkProblem> {
    let bp = match name {
        "bvp1" => BenchmarkProblem {
            name: "bvp1",
            description: "u'' + u' + sin(u' u) = f on [0, 2pi], u(0) = u(2pi) = 0, u = sin x",
            problem: manufactured(2, 0.0, 2.0 * PI, bvp1_lhs, bvp1_grad, &sine(), true),
            bc: BoundarySpec::Dirichlet { ua: 0.0, ub: 0.0 },
            exact: sine(),
            degree: 3,
            knot_mode: KnotMode::Uniform,
        },
        "bvp2" => BenchmarkProblem {
            name: "bvp2",
            description: "u'' + u'^2 - u'^3 + u' u + sin(u)^3 = f on [0, pi], u(0) = u(pi) = 0, u = x e^-x sin x",
            problem: manufactured(2, 0.0, PI, bvp2_lhs, bvp2_grad, &damped_sine(), true),
            bc: BoundarySpec::Dirichlet { ua: 0.0, ub: 0.0 },
            exact: damped_sine(),
            degree: 5,
            knot_mode: KnotMode::Uniform,
        },
        "bvp3" => BenchmarkProblem {
            name: "bvp3",
            description: "-u'' + 1/(1 + u''^2) + u^3 = f on [0, 2], u'(0) = pi, u'(2) = pi/3, u = sin(pi x)/(1 + x)",
            problem: manufactured(2, 0.0, 2.0, bvp3_lhs, bvp3_grad, &sine_over_linear(), false),
            bc: BoundarySpec::Neumann {
                va: PI,
                vb: PI / 3.0,
            },
            exact: sine_over_linear(),
            degree: 5,
            knot_mode: KnotMode::Chebyshev,
        },
        "bvp4" => BenchmarkProblem {
            name: "bvp4",
            description: "u'' + u'^2 + sin(u' u) = f on [-1, 1], u(-1) + u'(-1) = 1, u(1) - u'(1) = 1, u = 1/(1 + x^2)",
            problem: manufactured(2, -1.0, 1.0, bvp4_lhs, bvp4_grad, &lorentzian(), true),
            bc: BoundarySpec::Robin {
                gamma_a: 1.0,
                c_a: 1.0,
                gamma_b: -1.0,
                c_b: -1.0,
            },
            exact: lorentzian(),
            degree: 3,
            knot_mode: KnotMode::Uniform,
        },
        "bvp5" => {
            let left_rhs = 1.0 + PI * PI.exp();
            let right_shift = PI.powi(3) * (-3.0 * PI).exp();
            BenchmarkProblem {
                name: "bvp5",
                description: "-u'' + u' + sin u = f on [-pi, pi], sqrt(1 + u^2) + u' = 1 + pi e^pi at -pi, u + u'^3 = -pi^3 e^(-3pi) at pi, u = x e^-x sin x",
                problem: manufactured(2, -PI, PI, bvp5_lhs, bvp5_grad, &damped_sine(), true),
                bc: BoundarySpec::Implicit {
                    left: BoundaryFunction::new(
                        move |_, s| (1.0 + s[0] * s[0]).sqrt() + s[1] - left_rhs,
                        |_, s| [s[0] / (1.0 + s[0] * s[0]).sqrt(), 1.0, 0.0],
                    ),
                    right: BoundaryFunction::new(
                        move |_, s| s[0] + s[1].powi(3) + right_shift,
                        |_, s| [1.0, 3.0 * s[1] * s[1], 0.0],
                    ),
                },
                exact: damped_sine(),
                degree: 5,
                knot_mode: KnotMode::Uniform,
            }
        }
        "bvp1_long" => BenchmarkProblem {
            name: "bvp1_long",
            description: "bvp1 operator on [0, 6pi], u(0) = u(6pi) = 0, u = sin x",
            problem: manufactured(2, 0.0, 6.0 * PI, bvp1_lhs, bvp1_grad, &sine(), true),
            bc: BoundarySpec::Dirichlet { ua: 0.0, ub: 0.0 },
            exact: sine(),
            degree: 3,
            knot_mode: KnotMode::Uniform,
        },
        "bvp1_sinc" => BenchmarkProblem {
            name: "bvp1_sinc",
            description: "bvp1 operator on [0, 3], u(0) = u(3) = 0, u = sin(pi x)/(1 + x)",
            problem: manufactured(2, 0.0, 3.0, bvp1_lhs, bvp1_grad, &sine_over_linear(), true),
            bc: BoundarySpec::Dirichlet { ua: 0.0, ub: 0.0 },
            exact: sine_over_linear(),
            degree: 3,
            knot_mode: KnotMode::Uniform,
        },
        "beam4" => {
            let ex = sine_over_linear();
            let (ja, jb) = (ex.jet(0.0), ex.jet(2.0));
            BenchmarkProblem {
                name: "beam4",
                description: "u'''' + u + u' sin u = f on [0, 2], u' + u and u'' fixed at 0, u' and u'' - u fixed at 2, u = sin(pi x)/(1 + x)",
                problem: manufactured(4, 0.0, 2.0, beam_lhs, beam_grad, &ex, true),
                bc: BoundarySpec::FourthOrder {
                    left: [affine_bc(1.0, 1.0, 0.0, ja[1] + ja[0]), affine_bc(0.0, 0.0, 1.0, ja[2])],
                    right: [affine_bc(0.0, 1.0, 0.0, jb[1]), affine_bc(-1.0, 0.0, 1.0, jb[2] - jb[0])],
                    affine: true,
                },
                exact: ex,
                degree: 5,
                knot_mode: KnotMode::Uniform,
            }
        }
        _ => return None,
    };
    Some(bp)
}

/// Spline through the exact knot values, with the same boundary coupling
/// as a solver iterate. Dirichlet ends take the prescribed boundary values.
pub fn build_exact_spline(bp: &BenchmarkProblem, grid: &KnotGrid, degree: usize) -> Result<PiecewisePolynomial> {
    let eval = LossEvaluator::new(&bp.problem, &bp.bc, grid, degree, Collocation::new(grid, Vec::new())?, Norm::L2)?;
    let y: Vec<f64> = grid.knots().iter().map(|&x| bp.exact.value(x)).collect();
    let free = eval.pattern().extract(&y);
    Ok(eval.spline(&free, None)?.0)
}

/// Mean squares of `(value, first, second derivative)` at the sample points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPieces {
    pub exact: [f64; 3],
    pub error: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Root mean square of the residual, `sqrt((1/N) sum R_j^2)`.
    pub residual_l2: f64,
    pub residual_linf: f64,
    pub err_l2: f64,
    pub err_h1: f64,
    pub err_h2: f64,
    pub sample_count: usize,
    pub pieces: NormPieces,
}

fn percent(err: &[f64], exact: &[f64]) -> Result<f64> {
    let den: f64 = exact.iter().sum();
    if !(den.sqrt() > 1e-14) {
        return Err(Error::DivisionGuard { norm: den.sqrt() });
    }
    Ok(100.0 * (err.iter().sum::<f64>() / den).sqrt())
}

impl MetricsReport {
    pub fn from_pieces(residual_l2: f64, residual_linf: f64, sample_count: usize, pieces: NormPieces) -> Result<Self> {
        let (e, u) = (pieces.error, pieces.exact);
        Ok(Self {
            residual_l2,
            residual_linf,
            err_l2: percent(&e[..1], &u[..1])?,
            err_h1: percent(&e[..2], &u[..2])?,
            err_h2: percent(&e[..3], &u[..3])?,
            sample_count,
            pieces,
        })
    }
}

/// Residual and relative error norms of `spline` at `sample_count` uniform points.
pub fn compute_metrics(bp: &BenchmarkProblem, spline: &PiecewisePolynomial, sample_count: usize) -> Result<MetricsReport> {
    if sample_count < 10 {
        return Err(Error::InvalidConfig(format!(
            "metrics need at least 10 sample points, got {sample_count}"
        )));
    }
    let (a, b) = bp.domain();
    let order = bp.problem.order();
    let n = sample_count as f64;
    let mut pieces = NormPieces {
        exact: [0.0; 3],
        error: [0.0; 3],
    };
    let mut sq = 0.0;
    let mut linf = 0.0f64;
    for x in uniform_points(a, b, sample_count) {
        let s = spline.jet(x)?;
        let u = bp.exact.jet(x);
        let r = bp.problem.residual(x, &s[..=order]);
        sq += r * r;
        linf = linf.max(r.abs());
        for k in 0..3 {
            pieces.exact[k] += u[k] * u[k] / n;
            pieces.error[k] += (u[k] - s[k]).powi(2) / n;
        }
    }
    MetricsReport::from_pieces((sq / n).sqrt(), linf, sample_count, pieces)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub quantity: String,
    pub error_5: f64,
    pub error_10: f64,
    pub h_5: f64,
    pub h_10: f64,
    pub s: f64,
}

/// Two-point rate from errors with 5 and 10 knots, `h_n = (b - a) / (n - 1)`.
pub fn estimate_rate(quantity: &str, error_5: f64, error_10: f64, a: f64, b: f64) -> Result<RateReport> {
    for (n, v) in [(5, error_5), (10, error_10)] {
        if !(v > 0.0) {
            return Err(Error::LogDomain { n, value: v });
        }
    }
    let h_5 = (b - a) / 4.0;
    let h_10 = (b - a) / 9.0;
    Ok(RateReport {
        quantity: quantity.to_string(),
        error_5,
        error_10,
        h_5,
        h_10,
        s: (error_10.ln() - error_5.ln()) / (h_10.ln() - h_5.ln()),
    })
}
