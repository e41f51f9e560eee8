//! Full solves: grid setup, random start, loss minimization with the boundary
//! coupling inside the objective, and the knot escalation / relocation
//! strategies.

use std::cell::{Cell, RefCell};

use crate::coupling::{AlphaSet, BoundarySpec, OdeProblem};
use crate::error::{Error, Result};
use crate::gradient::{Collocation, LossEvaluator, Norm, DEFAULT_COLLOCATION};
use crate::optimize::{minimize_observed, random_init, OptimizeOptions, OptimizeTrace};
use crate::spline::{derivative_roots, make_knots, uniform_points, KnotGrid, KnotMode, PiecewisePolynomial};

/// Seeds tried (`seed, seed + 1, ...`) before giving up on a non-finite start.
pub const MAX_SEED_ATTEMPTS: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum KnotPolicy {
    Uniform,
    Chebyshev,
    /// Explicit knot positions; must span the problem domain.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    None,
    /// Run `iters_per_stage` iterations, then resample onto a uniform grid
    /// with the next interval count; the last stage runs to convergence.
    Escalate { schedule: Vec<usize>, iters_per_stage: usize },
    /// After `warmup` iterations move the knots to the extrema and inflection
    /// points of the current spline; repeat every `period` iterations for
    /// `rounds` relocations in total, then run to convergence.
    Relocate {
        warmup: usize,
        period: usize,
        rounds: usize,
        /// Minimum knot gap as a fraction of `b - a`.
        min_gap: f64,
        /// If set, run `period` iterations on the last relocated grid, then
        /// resample onto this many uniform intervals and run to convergence.
        refine: Option<usize>,
    },
}

impl Strategy {
    pub fn relocate_default() -> Self {
        Strategy::Relocate {
            warmup: 15,
            period: 15,
            rounds: 3,
            min_gap: 0.02,
            refine: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub degree: usize,
    pub knot_policy: KnotPolicy,
    /// Number of intervals (knot count minus one).
    pub n: usize,
    pub collocation_count: usize,
    pub norm: Norm,
    pub seed: u64,
    pub strategy: Strategy,
    pub optimizer: OptimizeOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            knot_policy: KnotPolicy::Uniform,
            n: 9,
            collocation_count: DEFAULT_COLLOCATION,
            norm: Norm::L2,
            seed: 0,
            strategy: Strategy::None,
            optimizer: OptimizeOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, problem: &OdeProblem) -> Result<()> {
        if self.degree != 3 && self.degree != 5 {
            return Err(Error::Degree(self.degree));
        }
        if problem.order() == 4 && self.degree != 5 {
            return Err(Error::InvalidConfig("fourth-order problems need degree 5".into()));
        }
        let n = match &self.knot_policy {
            KnotPolicy::Explicit(k) => k.len().saturating_sub(1),
            _ => self.n,
        };
        if n < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 intervals, got {n}")));
        }
        if self.collocation_count < n + 1 {
            return Err(Error::InvalidConfig(format!(
                "collocation count {} is below the knot count {}",
                self.collocation_count,
                n + 1
            )));
        }
        match &self.strategy {
            Strategy::Escalate { schedule, .. } => {
                let mut prev = n;
                for &next in schedule {
                    if next <= prev {
                        return Err(Error::InvalidConfig(
                            "escalation schedule must be strictly increasing and above n".into(),
                        ));
                    }
                    prev = next;
                }
            }
            Strategy::Relocate { min_gap, rounds, refine, .. } => {
                if !(*min_gap > 0.0 && *min_gap < 0.5) {
                    return Err(Error::InvalidConfig(format!("min_gap must lie in (0, 0.5), got {min_gap}")));
                }
                if *rounds == 0 {
                    return Err(Error::InvalidConfig("relocation needs at least one round".into()));
                }
                if matches!(refine, Some(m) if *m < 2) {
                    return Err(Error::InvalidConfig("refinement needs at least 2 intervals".into()));
                }
            }
            Strategy::None => {}
        }
        self.optimizer.validate()
    }

    fn initial_grid(&self, problem: &OdeProblem) -> Result<KnotGrid> {
        let (a, b) = problem.domain();
        let grid = match &self.knot_policy {
            KnotPolicy::Uniform => make_knots(a, b, self.n, KnotMode::Uniform)?,
            KnotPolicy::Chebyshev => make_knots(a, b, self.n, KnotMode::Chebyshev)?,
            KnotPolicy::Explicit(k) => KnotGrid::new(k.clone())?,
        };
        if grid.a() != a || grid.b() != b {
            return Err(Error::InvalidConfig(format!(
                "explicit knots must start at {a} and end at {b}"
            )));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinsSolution {
    pub spline: PiecewisePolynomial,
    /// Final knot values, pinned Dirichlet ends included.
    pub y_star: Vec<f64>,
    pub alpha: AlphaSet,
    /// One trace per optimization stage.
    pub loss_history: Vec<OptimizeTrace>,
    pub collocation: Vec<f64>,
    pub residual_profile: Vec<f64>,
    pub knots_used: KnotGrid,
    pub final_loss: f64,
    /// Seed that produced the accepted initial point.
    pub seed_used: u64,
    /// Newton iteration count of the warm-started boundary solve at each
    /// accepted optimizer iterate, across all stages. Line-search trials are
    /// not counted.
    pub warm_newton_history: Vec<usize>,
    pub max_warm_newton_iterations: usize,
    /// Grids produced by knot relocation, in order.
    pub relocated_grids: Vec<KnotGrid>,
}

impl SpinsSolution {
    pub fn total_iterations(&self) -> usize {
        self.loss_history.iter().map(|t| t.iterations()).sum()
    }
}

/// One optimization session on a fixed grid. Owns the warm-start cache.
struct Session {
    eval: LossEvaluator,
    /// Boundary coefficients at the last accepted iterate; every evaluation
    /// warm-starts from here so trial points cannot drag the Newton solves
    /// onto another root branch.
    anchor: RefCell<Option<AlphaSet>>,
    /// `(y, alpha, newton iterations)` of the evaluations since the last
    /// accepted iterate.
    pending: RefCell<Vec<(Vec<f64>, AlphaSet, usize)>>,
    evaluations: Cell<usize>,
    newton_history: RefCell<Vec<usize>>,
}

impl Session {
    fn new(problem: &OdeProblem, bc: &BoundarySpec, grid: &KnotGrid, cfg: &SolverConfig, warm: Option<AlphaSet>) -> Result<Self> {
        let colloc = Collocation::uniform(grid, cfg.collocation_count)?;
        Ok(Self {
            eval: LossEvaluator::new(problem, bc, grid, cfg.degree, colloc, cfg.norm)?,
            anchor: RefCell::new(warm),
            pending: RefCell::new(Vec::new()),
            evaluations: Cell::new(0),
            newton_history: RefCell::new(Vec::new()),
        })
    }

    fn objective(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let k = self.evaluations.get();
        self.evaluations.set(k + 1);
        let warm = self.anchor.borrow().clone();
        let report = self
            .eval
            .loss_and_gradient(y, warm.as_ref())
            .map_err(|e| Error::Solve {
                evaluation: k,
                source: Box::new(e),
            })?;
        let iterations = match warm {
            Some(_) => report.newton_iterations,
            None => {
                *self.anchor.borrow_mut() = Some(report.alpha.clone());
                0
            }
        };
        self.pending.borrow_mut().push((y.to_vec(), report.alpha, iterations));
        Ok((report.value, report.gradient))
    }

    fn accept(&self, y: &[f64]) {
        let mut pending = self.pending.borrow_mut();
        if let Some((_, alpha, iterations)) = pending.iter().rev().find(|(x, ..)| x.as_slice() == y) {
            *self.anchor.borrow_mut() = Some(alpha.clone());
            self.newton_history.borrow_mut().push(*iterations);
        }
        pending.clear();
    }

    fn run(&self, y0: &[f64], opts: &OptimizeOptions) -> Result<(Vec<f64>, OptimizeTrace)> {
        let mut f = |y: &[f64]| self.objective(y);
        minimize_observed(&mut f, y0, opts, &mut |y| self.accept(y))
    }

    fn spline(&self, y_free: &[f64]) -> Result<(PiecewisePolynomial, AlphaSet)> {
        let warm = self.anchor.borrow().clone();
        let (s, res) = self.eval.spline(y_free, warm.as_ref())?;
        Ok((s, res.alpha))
    }
}

struct Stage {
    grid: KnotGrid,
    y_free: Vec<f64>,
    warm: Option<AlphaSet>,
}

/// Solve `problem` with boundary conditions `bc`.
pub fn solve(problem: &OdeProblem, bc: &BoundarySpec, config: &SolverConfig) -> Result<SpinsSolution> {
    config.validate(problem)?;
    let grid = config.initial_grid(problem)?;
    let opts = config.optimizer;

    // random start; redraw on a non-finite or failing initial loss
    let mut start = None;
    for attempt in 0..MAX_SEED_ATTEMPTS {
        let seed = config.seed.wrapping_add(attempt);
        let session = Session::new(problem, bc, &grid, config, None)?;
        let y0 = random_init(session.eval.pattern().len(), seed);
        match session.eval.loss(&y0, None) {
            Ok(v) if v.is_finite() => {
                start = Some((seed, y0));
                break;
            }
            _ => continue,
        }
    }
    let Some((seed_used, y0)) = start else {
        return Err(Error::NonFiniteInitialLoss {
            attempts: MAX_SEED_ATTEMPTS as usize,
        });
    };

    let mut traces = Vec::new();
    let mut relocated = Vec::new();
    let mut newton_history = Vec::new();
    let mut stage = Stage {
        grid,
        y_free: y0,
        warm: None,
    };
    let mut run_stage = |stage: &Stage, max_iter: usize, traces: &mut Vec<OptimizeTrace>| -> Result<(Session, Vec<f64>)> {
        let session = Session::new(problem, bc, &stage.grid, config, stage.warm.clone())?;
        let stage_opts = OptimizeOptions { max_iter, ..opts };
        let (y, trace) = session.run(&stage.y_free, &stage_opts)?;
        traces.push(trace);
        newton_history.extend(session.newton_history.borrow().iter().copied());
        Ok((session, y))
    };

    let (session, y_final) = match &config.strategy {
        Strategy::None => run_stage(&stage, opts.max_iter, &mut traces)?,
        Strategy::Escalate { schedule, iters_per_stage } => {
            let mut current = run_stage(&stage, if schedule.is_empty() { opts.max_iter } else { *iters_per_stage }, &mut traces)?;
            for (k, &next) in schedule.iter().enumerate() {
                let (spline, alpha) = current.0.spline(&current.1)?;
                let (a, b) = problem.domain();
                let grid = make_knots(a, b, next, KnotMode::Uniform)?;
                stage = Stage {
                    y_free: resampled_free(&current.0, &spline, &grid)?,
                    grid,
                    warm: Some(alpha),
                };
                let last = k + 1 == schedule.len();
                current = run_stage(&stage, if last { opts.max_iter } else { *iters_per_stage }, &mut traces)?;
            }
            current
        }
        Strategy::Relocate {
            warmup,
            period,
            rounds,
            min_gap,
            refine,
        } => {
            let mut current = run_stage(&stage, *warmup, &mut traces)?;
            for round in 0..*rounds {
                let (spline, alpha) = current.0.spline(&current.1)?;
                let n = stage.grid.intervals();
                let grid = relocate_knots(&spline, *min_gap, n)?;
                relocated.push(grid.clone());
                stage = Stage {
                    y_free: resampled_free(&current.0, &spline, &grid)?,
                    grid,
                    warm: Some(alpha),
                };
                let last = round + 1 == *rounds && refine.is_none();
                current = run_stage(&stage, if last { opts.max_iter } else { *period }, &mut traces)?;
            }
            if let Some(m) = refine {
                let (spline, alpha) = current.0.spline(&current.1)?;
                let (a, b) = problem.domain();
                let grid = make_knots(a, b, *m, KnotMode::Uniform)?;
                stage = Stage {
                    y_free: resampled_free(&current.0, &spline, &grid)?,
                    grid,
                    warm: Some(alpha),
                };
                current = run_stage(&stage, opts.max_iter, &mut traces)?;
            }
            current
        }
    };

    let (spline, alpha) = session.spline(&y_final)?;
    let residual_profile = session.eval.residuals(&spline)?;
    let final_loss = traces.last().map_or(f64::NAN, |t| t.final_loss());
    Ok(SpinsSolution {
        y_star: session.eval.full_values(&y_final)?,
        alpha,
        loss_history: traces,
        collocation: session.eval.collocation().points().to_vec(),
        residual_profile,
        knots_used: session.eval.grid().clone(),
        final_loss,
        seed_used,
        spline,
        max_warm_newton_iterations: newton_history.iter().copied().max().unwrap_or(0),
        warm_newton_history: newton_history,
        relocated_grids: relocated,
    })
}

fn resampled_free(session: &Session, spline: &PiecewisePolynomial, grid: &KnotGrid) -> Result<Vec<f64>> {
    let y = spline.resample(grid)?;
    let knots = grid.knots().len();
    // pinned Dirichlet ends are re-imposed by the next session's pattern
    let pattern = if session.eval.pattern().len() + 2 == session.eval.pattern().knots() {
        crate::gradient::FreePattern::interior(knots)
    } else {
        crate::gradient::FreePattern::all(knots)
    };
    Ok(pattern.extract(&y))
}

/// Knots and values for the next stage after escalating to `next_n` uniform intervals.
pub fn strategy_escalate(spline: &PiecewisePolynomial, next_n: usize, bc: &BoundarySpec) -> Result<(KnotGrid, Vec<f64>)> {
    if next_n <= spline.intervals() {
        return Err(Error::InvalidConfig(format!(
            "escalation needs more than {} intervals, got {next_n}",
            spline.intervals()
        )));
    }
    let grid = make_knots(spline.grid().a(), spline.grid().b(), next_n, KnotMode::Uniform)?;
    let y = pin(spline.resample(&grid)?, bc);
    Ok((grid, y))
}

/// Knots and values for the next stage after relocation.
pub fn strategy_relocate(spline: &PiecewisePolynomial, min_gap: f64, bc: &BoundarySpec) -> Result<(KnotGrid, Vec<f64>)> {
    let grid = relocate_knots(spline, min_gap, spline.intervals())?;
    let y = pin(spline.resample(&grid)?, bc);
    Ok((grid, y))
}

fn pin(mut y: Vec<f64>, bc: &BoundarySpec) -> Vec<f64> {
    if let (Some(ua), Some(ub)) = bc.pinned() {
        let last = y.len() - 1;
        y[0] = ua;
        y[last] = ub;
    }
    y
}

/// `{a, b}` plus the roots of `S'` and `S''`, thinned so that neighbours are
/// at least `min_gap (b - a)` apart. With fewer than 4 interior candidates
/// the interior points of a uniform grid with `fallback_n` intervals are
/// added before thinning.
pub fn relocate_knots(spline: &PiecewisePolynomial, min_gap: f64, fallback_n: usize) -> Result<KnotGrid> {
    let (a, b) = (spline.grid().a(), spline.grid().b());
    let mut cand = derivative_roots(spline, 1)?;
    cand.extend(derivative_roots(spline, 2)?);
    cand.sort_by(f64::total_cmp);
    let gap = min_gap * (b - a);
    let mut interior = thin(&cand, a, b, gap);
    if interior.len() < 4 {
        let uniform = uniform_points(a, b, fallback_n.max(4) + 1);
        cand.extend_from_slice(&uniform[1..uniform.len() - 1]);
        cand.sort_by(f64::total_cmp);
        interior = thin(&cand, a, b, gap);
    }
    let mut knots = Vec::with_capacity(interior.len() + 2);
    knots.push(a);
    knots.extend(interior);
    knots.push(b);
    KnotGrid::new(knots)
}

fn thin(sorted: &[f64], a: f64, b: f64, gap: f64) -> Vec<f64> {
    let mut kept: Vec<f64> = Vec::new();
    let mut last = a;
    for &x in sorted {
        if x - last >= gap && b - x >= gap {
            kept.push(x);
            last = x;
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::build_clamped;

    #[test]
    fn relocation_finds_sine_extrema_and_inflections() {
        let pi = std::f64::consts::PI;
        let grid = make_knots(0.0, 6.0 * pi, 60, KnotMode::Uniform).unwrap();
        let y: Vec<f64> = grid.knots().iter().map(|x| x.sin()).collect();
        let s = build_clamped(&grid, &y, 3, &[1.0, 1.0]).unwrap();
        let g = relocate_knots(&s, 0.02, 8).unwrap();
        assert_eq!(g.a(), 0.0);
        assert_eq!(g.b(), 6.0 * pi);
        for &x in &g.knots()[1..g.knots().len() - 1] {
            let k = (x / (pi / 2.0)).round();
            assert!((x - k * pi / 2.0).abs() < 0.05, "{x}");
        }
        assert_eq!(g.intervals(), 12);
    }

    #[test]
    fn monotone_spline_gets_uniform_padding() {
        let grid = make_knots(0.0, 1.0, 4, KnotMode::Uniform).unwrap();
        let y: Vec<f64> = grid.knots().to_vec();
        let s = build_clamped(&grid, &y, 3, &[1.0, 1.0]).unwrap();
        let g = relocate_knots(&s, 0.02, 4).unwrap();
        assert_eq!(g.knots(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn thinning_respects_gap() {
        let kept = thin(&[0.001, 0.3, 0.305, 0.5, 0.995], 0.0, 1.0, 0.02);
        assert_eq!(kept, vec![0.3, 0.5]);
    }

    #[test]
    fn config_validation() {
        let p = OdeProblem::second_order(0.0, 1.0, |_, s| s[2], |_, _| Default::default()).unwrap();
        let mut cfg = SolverConfig::default();
        assert!(cfg.validate(&p).is_ok());
        cfg.n = 1;
        assert!(cfg.validate(&p).is_err());
        cfg.n = 4;
        cfg.strategy = Strategy::Escalate {
            schedule: vec![6, 5],
            iters_per_stage: 5,
        };
        assert!(cfg.validate(&p).is_err());
        cfg.strategy = Strategy::None;
        cfg.collocation_count = 3;
        assert!(cfg.validate(&p).is_err());
    }
}
