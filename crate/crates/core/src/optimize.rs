//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub memory: usize,
    pub grad_tol: f64,
    /// Stop when an accepted step improves the loss by less than
    /// `loss_tol * max(|f_old|, |f_new|, 1)`.
    pub loss_tol: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub c2: f64,
    /// Cap on interval-shrinking steps inside one line search.
    pub max_bisections: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: 1e-9,
            loss_tol: 1e-14,
            max_iter: 500,
            c1: 1e-4,
            c2: 0.9,
            max_bisections: 40,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::InvalidConfig("L-BFGS memory must be at least 1".into()));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Wolfe constants need 0 < c1 < c2 < 1 (got c1 = {}, c2 = {})",
                self.c1, self.c2
            )));
        }
        if !(self.grad_tol >= 0.0) || !(self.loss_tol >= 0.0) {
            return Err(Error::InvalidConfig("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    GradientTolerance,
    LossTolerance,
    MaxIterations,
    /// The line search could not find an acceptable step.
    Stalled,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::GradientTolerance => "grad_tol",
            Status::LossTolerance => "loss_tol",
            Status::MaxIterations => "max_iter",
            Status::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeTrace {
    /// Entry 0 is the starting point (step length 0).
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub evaluations: usize,
    /// Last objective error swallowed by the line search, if any.
    pub last_error: Option<String>,
}

impl OptimizeTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    /// CSV with header `iter,loss,grad_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iter,loss,grad_norm")?;
        for r in &self.records {
            writeln!(out, "{},{},{}", r.iter, fmt_f64(r.loss), fmt_f64(r.grad_norm))?;
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Objective returning `(loss, gradient)`.
pub type Objective<'a> = dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)> + 'a;

/// Minimize `objective` from `y0`. Returns the best iterate seen.
///
/// Errors from the objective at trial points are treated as infinite loss
/// and shrink the step; an error at `y0` is returned.
pub fn minimize(objective: &mut Objective<'_>, y0: &[f64], opts: &OptimizeOptions) -> Result<(Vec<f64>, OptimizeTrace)> {
    minimize_observed(objective, y0, opts, &mut |_| {})
}

/// [`minimize`] that also reports every accepted iterate to `on_accept`.
pub fn minimize_observed(
    objective: &mut Objective<'_>,
    y0: &[f64],
    opts: &OptimizeOptions,
    on_accept: &mut dyn FnMut(&[f64]),
) -> Result<(Vec<f64>, OptimizeTrace)> {
    opts.validate()?;
    let (f0, g0) = objective(y0)?;
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInitialLoss { attempts: 1 });
    }
    let mut cur = Point {
        x: y0.to_vec(),
        f: f0,
        g: g0,
    };
    let mut trace = OptimizeTrace {
        records: vec![IterationRecord {
            iter: 0,
            loss: cur.f,
            grad_norm: norm2(&cur.g),
            step_length: 0.0,
        }],
        status: Status::MaxIterations,
        evaluations: 1,
        last_error: None,
    };
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);

    let mut iter = 0;
    loop {
        if cur.g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= opts.grad_tol {
            trace.status = Status::GradientTolerance;
            break;
        }
        if iter >= opts.max_iter {
            trace.status = Status::MaxIterations;
            break;
        }
        let mut dir = two_loop(&cur.g, &history);
        if !(dot(&dir, &cur.g) < 0.0) {
            history.clear();
            dir = cur.g.iter().map(|v| -v).collect();
        }
        let first = if history.is_empty() {
            (1.0 / norm2(&cur.g)).min(1.0)
        } else {
            1.0
        };
        let mut found = line_search(objective, &cur, &dir, first, opts, &mut trace);
        if found.is_none() && !history.is_empty() {
            // retry once along steepest descent with a fresh memory
            history.clear();
            dir = cur.g.iter().map(|v| -v).collect();
            let first = (1.0 / norm2(&cur.g)).min(1.0);
            found = line_search(objective, &cur, &dir, first, opts, &mut trace);
        }
        let Some((step, next)) = found else {
            trace.status = Status::Stalled;
            break;
        };
        iter += 1;
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * norm2(&s) * norm2(&yv) && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        let improvement = cur.f - next.f;
        let scale = cur.f.abs().max(next.f.abs()).max(1.0);
        cur = next;
        on_accept(&cur.x);
        trace.records.push(IterationRecord {
            iter,
            loss: cur.f,
            grad_norm: norm2(&cur.g),
            step_length: step,
        });
        if improvement <= opts.loss_tol * scale {
            trace.status = Status::LossTolerance;
            break;
        }
    }
    Ok((cur.x, trace))
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Evaluate along the ray; `None` for errors or non-finite values.
fn probe(objective: &mut Objective<'_>, base: &Point, dir: &[f64], t: f64, trace: &mut OptimizeTrace) -> Option<Point> {
    let x: Vec<f64> = base.x.iter().zip(dir).map(|(x, d)| x + t * d).collect();
    trace.evaluations += 1;
    match objective(&x) {
        Ok((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => Some(Point { x, f, g }),
        Ok(_) => None,
        Err(e) => {
            trace.last_error = Some(e.to_string());
            None
        }
    }
}

/// Strong-Wolfe line search (bracketing, then bisection zoom).
fn line_search(
    objective: &mut Objective<'_>,
    cur: &Point,
    dir: &[f64],
    first: f64,
    opts: &OptimizeOptions,
    trace: &mut OptimizeTrace,
) -> Option<(f64, Point)> {
    let d0 = dot(&cur.g, dir);
    let armijo = |t: f64, f: f64| f <= cur.f + opts.c1 * t * d0;
    let curvature = |p: &Point| dot(&p.g, dir).abs() <= opts.c2 * d0.abs();

    let mut shrinks = 0;
    let mut lo_t = 0.0;
    let mut lo_f = cur.f;
    let mut best: Option<(f64, Point)> = None;
    let mut t = first;
    let hi_t;
    // bracketing phase
    loop {
        let Some(p) = probe(objective, cur, dir, t, trace) else {
            shrinks += 1;
            if shrinks > opts.max_bisections {
                return best;
            }
            t = 0.5 * (lo_t + t);
            continue;
        };
        if !armijo(t, p.f) || (lo_t > 0.0 && p.f >= lo_f) {
            hi_t = t;
            break;
        }
        let dp = dot(&p.g, dir);
        if curvature(&p) {
            return Some((t, p));
        }
        if dp >= 0.0 {
            hi_t = lo_t;
            lo_t = t;
            lo_f = p.f;
            best = Some((t, p));
            break;
        }
        lo_t = t;
        lo_f = p.f;
        best = Some((t, p));
        t *= 2.0;
        if t > 1e10 {
            return best;
        }
    }
    // zoom phase: interval [lo, hi] with lo satisfying Armijo
    let mut hi_t = hi_t;
    for _ in 0..opts.max_bisections {
        let t = 0.5 * (lo_t + hi_t);
        if (hi_t - lo_t).abs() <= 1e-16 * lo_t.abs().max(1e-300) {
            break;
        }
        let Some(p) = probe(objective, cur, dir, t, trace) else {
            hi_t = t;
            continue;
        };
        if !armijo(t, p.f) || p.f >= lo_f {
            hi_t = t;
            continue;
        }
        let dp = dot(&p.g, dir);
        if curvature(&p) {
            return Some((t, p));
        }
        if dp * (hi_t - lo_t) >= 0.0 {
            hi_t = lo_t;
        }
        lo_t = t;
        lo_f = p.f;
        best = Some((t, p));
    }
    // accept a sufficient-decrease point even if curvature was not met
    best.filter(|(_, p)| p.f < cur.f)
}

/// `count` draws uniform in `[-1, 1]` from ChaCha8 seeded with `seed`.
pub fn random_init(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(c: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |y: &[f64]| {
            let g: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a - b).collect();
            Ok((0.5 * dot(&g, &g), g))
        }
    }

    #[test]
    fn quadratic_bowl() {
        let c = vec![1.0, -2.0, 0.5];
        let mut f = bowl(c.clone());
        let (x, trace) = minimize(&mut f, &[4.0, 4.0, 4.0], &OptimizeOptions::default()).unwrap();
        for (a, b) in x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(trace.iterations() <= 3, "{}", trace.iterations());
    }

    #[test]
    fn bowl_iterations_independent_of_dimension() {
        for m in [2, 10, 50] {
            let c: Vec<f64> = (0..m).map(|k| (k as f64).sin()).collect();
            let mut f = bowl(c);
            let (_, trace) = minimize(&mut f, &vec![3.0; m], &OptimizeOptions::default()).unwrap();
            assert!(trace.iterations() <= 3);
        }
    }

    #[test]
    fn rosenbrock() {
        let mut f = |p: &[f64]| {
            let (x, y) = (p[0], p[1]);
            let v = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
            let g = vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)];
            Ok((v, g))
        };
        let (x, trace) = minimize(&mut f, &[-1.2, 1.0], &OptimizeOptions::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
        assert!(trace.iterations() <= 200);
        for w in trace.records.windows(2) {
            assert!(w[1].loss <= w[0].loss);
        }
    }

    #[test]
    fn deterministic_trace() {
        let run = || {
            let mut f = bowl(vec![0.3, 0.7]);
            minimize(&mut f, &random_init(2, 9), &OptimizeOptions::default()).unwrap().1
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stall_returns_best_iterate() {
        // gradient points the wrong way: no descent is possible
        let mut f = |y: &[f64]| Ok((y[0] * y[0], vec![-2.0 * y[0] - 1.0]));
        let (x, trace) = minimize(&mut f, &[1.0], &OptimizeOptions::default()).unwrap();
        assert_eq!(trace.status, Status::Stalled);
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        assert_eq!(random_init(3, 42), random_init(3, 42));
        assert_ne!(random_init(3, 42), random_init(3, 43));
        let v = random_init(100_000, 7);
        assert!(v.iter().all(|x| (-1.0..=1.0).contains(x)));
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.02);
    }

    #[test]
    fn options_validated() {
        let bad = OptimizeOptions {
            c1: 0.95,
            ..OptimizeOptions::default()
        };
        assert!(bad.validate().is_err());
        let zero = OptimizeOptions {
            memory: 0,
            ..OptimizeOptions::default()
        };
        assert!(zero.validate().is_err());
    }
}
