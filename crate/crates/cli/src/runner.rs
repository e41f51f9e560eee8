//! Execute the jobs of an experiment and write its artifacts.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use splinebvp::bench::{build_exact_spline, builtin, compute_metrics, estimate_rate, MetricsReport};
use splinebvp::gradient::write_residual_profile;
use splinebvp::io::fmt_f64;
use splinebvp::solver::{solve, KnotPolicy, SpinsSolution};
use splinebvp::spline::{make_knots, KnotMode};

use crate::config::{ExperimentConfig, Job};
use crate::{write_spline_samples, CliError, SolutionFile};

pub const TABLE_FILE: &str = "table.csv";
pub const RATES_FILE: &str = "rates.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ERROR_FILE: &str = "error.json";

const TABLE_HEADER: &str = "problem,degree,knots,variant,seed,residual_l2,err_l2_pct,err_h1_pct,err_h2_pct";

#[derive(Debug)]
struct Solved {
    solution: SpinsSolution,
    metrics: MetricsReport,
}

#[derive(Debug, Serialize)]
struct JobRecord {
    problem: String,
    degree: usize,
    knots: usize,
    seed: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_used: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_knots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Failure {
    problem: String,
    degree: usize,
    knots: usize,
    seed: u64,
    error: String,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    jobs: Vec<JobRecord>,
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub table: PathBuf,
    pub jobs: usize,
}

fn stem(job: &Job) -> String {
    format!("{}_q{}_k{}_s{}", job.problem, job.degree, job.knots, job.seed)
}

fn solve_job(cfg: &ExperimentConfig, job: &Job) -> Result<Solved, String> {
    let bp = builtin(&job.problem).ok_or("unknown problem")?;
    let sc = cfg.solver_config(&job.problem, job.knots, job.seed).map_err(|e| e.to_string())?;
    let solution = solve(&bp.problem, &bp.bc, &sc).map_err(|e| e.to_string())?;
    let metrics = compute_metrics(&bp, &solution.spline, cfg.metric_samples).map_err(|e| e.to_string())?;
    Ok(Solved { solution, metrics })
}

/// Solve all jobs on a scoped worker pool; results come back in job order.
fn solve_all(cfg: &ExperimentConfig, jobs: &[Job]) -> Vec<Result<Solved, String>> {
    let workers = match cfg.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(jobs.len())
    .max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Solved, String>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = solve_job(cfg, job);
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn exact_metrics(cfg: &ExperimentConfig, job: &Job) -> Result<MetricsReport, String> {
    let bp = builtin(&job.problem).ok_or("unknown problem")?;
    let sc = cfg.solver_config(&job.problem, job.knots, 0).map_err(|e| e.to_string())?;
    let (a, b) = bp.domain();
    let mode = match sc.knot_policy {
        KnotPolicy::Chebyshev => KnotMode::Chebyshev,
        _ => KnotMode::Uniform,
    };
    let grid = make_knots(a, b, sc.n, mode).map_err(|e| e.to_string())?;
    let spline = build_exact_spline(&bp, &grid, job.degree).map_err(|e| e.to_string())?;
    compute_metrics(&bp, &spline, cfg.metric_samples).map_err(|e| e.to_string())
}

fn table_row(job: &Job, variant: &str, seed: &str, m: &MetricsReport) -> String {
    format!(
        "{},{},{},{variant},{seed},{},{},{},{}",
        job.problem,
        job.degree,
        job.knots,
        fmt_f64(m.residual_l2),
        fmt_f64(m.err_l2),
        fmt_f64(m.err_h1),
        fmt_f64(m.err_h2)
    )
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

fn write_loss_history(w: &mut impl Write, sol: &SpinsSolution) -> std::io::Result<()> {
    writeln!(w, "stage,iter,loss,grad_norm,step_length")?;
    for (stage, trace) in sol.loss_history.iter().enumerate() {
        for r in &trace.records {
            writeln!(
                w,
                "{stage},{},{},{},{}",
                r.iter,
                fmt_f64(r.loss),
                fmt_f64(r.grad_norm),
                fmt_f64(r.step_length)
            )?;
        }
    }
    Ok(())
}

fn solution_file(job: &Job, sol: &SpinsSolution) -> SolutionFile {
    SolutionFile {
        problem: job.problem.clone(),
        degree: job.degree,
        seed: job.seed,
        knots: sol.knots_used.knots().to_vec(),
        values: sol.y_star.clone(),
        alpha: sol.alpha.values().to_vec(),
        coefficients: sol.spline.coefficients().to_vec(),
        final_loss: sol.final_loss,
    }
}

fn write_job_files(cfg: &ExperimentConfig, dir: &Path, job: &Job, sol: &SpinsSolution) -> Result<Vec<String>, CliError> {
    let stem = stem(job);
    let mut files = Vec::new();
    let mut emit = |suffix: &str, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> Result<(), CliError> {
        let name = format!("{stem}_{suffix}");
        write_with(&dir.join(&name), |w| f(w))?;
        files.push(name);
        Ok(())
    };
    if cfg.emit.loss_history {
        emit("loss.csv", &|w| write_loss_history(w, sol))?;
    }
    if cfg.emit.residuals {
        emit("residual.csv", &|w| write_residual_profile(w, &sol.collocation, &sol.residual_profile))?;
    }
    if cfg.emit.samples {
        emit("samples.csv", &|w| write_spline_samples(w, &sol.spline, cfg.spline_samples))?;
    }
    if cfg.emit.solutions {
        let body = serde_json::to_string_pretty(&solution_file(job, sol)).expect("plain data serializes");
        emit("solution.json", &|w| writeln!(w, "{body}"))?;
    }
    Ok(files)
}

/// Rows of the rates table for every (problem, degree) run at both 5 and
/// 10 knots. The solved values are the best of the seeds by residual.
fn rate_rows(
    jobs: &[Job],
    results: &[Result<Solved, String>],
    exact: &BTreeMap<(String, usize, usize), MetricsReport>,
) -> Vec<String> {
    let mut best: BTreeMap<(String, usize, usize), &MetricsReport> = BTreeMap::new();
    for (job, r) in jobs.iter().zip(results) {
        if let Ok(s) = r {
            let key = (job.problem.clone(), job.degree, job.knots);
            let slot = best.entry(key).or_insert(&s.metrics);
            if s.metrics.residual_l2 < slot.residual_l2 {
                *slot = &s.metrics;
            }
        }
    }
    let mut rows = Vec::new();
    let mut pairs: Vec<(String, usize)> = best.keys().map(|(p, d, _)| (p.clone(), *d)).collect();
    pairs.dedup();
    for (problem, degree) in pairs {
        let Some(bp) = builtin(&problem) else { continue };
        let (a, b) = bp.domain();
        let k5 = (problem.clone(), degree, 5);
        let k10 = (problem.clone(), degree, 10);
        for (variant, m5, m10) in [
            ("solved", best.get(&k5).copied(), best.get(&k10).copied()),
            ("exact", exact.get(&k5), exact.get(&k10)),
        ] {
            let (Some(m5), Some(m10)) = (m5, m10) else { continue };
            for (quantity, v5, v10) in [
                ("residual_l2", m5.residual_l2, m10.residual_l2),
                ("err_l2", m5.err_l2, m10.err_l2),
                ("err_h1", m5.err_h1, m10.err_h1),
                ("err_h2", m5.err_h2, m10.err_h2),
            ] {
                let rate = estimate_rate(quantity, v5, v10, a, b).map_or(f64::NAN, |r| r.s);
                rows.push(format!(
                    "{problem},{degree},{variant},{quantity},{},{},{}",
                    fmt_f64(v5),
                    fmt_f64(v10),
                    fmt_f64(rate)
                ));
            }
        }
    }
    rows
}

/// Run every job of `cfg`, writing artifacts under its output directory.
///
/// Solver failures do not stop the other jobs; they are collected into
/// `error.json` and reported as [`CliError::Solve`] after everything else
/// has been written.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let jobs = cfg.jobs()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
    let stale = dir.join(ERROR_FILE);
    if stale.exists() {
        fs::remove_file(&stale).map_err(CliError::io(&stale))?;
    }

    let results = solve_all(cfg, &jobs);

    let mut exact: BTreeMap<(String, usize, usize), MetricsReport> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (job, result) in jobs.iter().zip(&results) {
        let key = (job.problem.clone(), job.degree, job.knots);
        if !exact.contains_key(&key) {
            match exact_metrics(cfg, job) {
                Ok(m) => {
                    rows.push(table_row(job, "exact", "", &m));
                    exact.insert(key, m);
                }
                Err(e) => failures.push(Failure {
                    problem: job.problem.clone(),
                    degree: job.degree,
                    knots: job.knots,
                    seed: job.seed,
                    error: format!("exact spline: {e}"),
                }),
            }
        }
        match result {
            Ok(s) => {
                rows.push(table_row(job, "solved", &job.seed.to_string(), &s.metrics));
                let files = write_job_files(cfg, &dir, job, &s.solution)?;
                records.push(JobRecord {
                    problem: job.problem.clone(),
                    degree: job.degree,
                    knots: job.knots,
                    seed: job.seed,
                    status: "ok",
                    seed_used: Some(s.solution.seed_used),
                    iterations: Some(s.solution.total_iterations()),
                    final_loss: Some(s.solution.final_loss),
                    final_knots: Some(s.solution.knots_used.knots().len()),
                    error: None,
                    files,
                });
            }
            Err(e) => {
                failures.push(Failure {
                    problem: job.problem.clone(),
                    degree: job.degree,
                    knots: job.knots,
                    seed: job.seed,
                    error: e.clone(),
                });
                records.push(JobRecord {
                    problem: job.problem.clone(),
                    degree: job.degree,
                    knots: job.knots,
                    seed: job.seed,
                    status: "failed",
                    seed_used: None,
                    iterations: None,
                    final_loss: None,
                    final_knots: None,
                    error: Some(e.clone()),
                    files: Vec::new(),
                });
            }
        }
    }

    let table = dir.join(TABLE_FILE);
    write_with(&table, |w| {
        writeln!(w, "{TABLE_HEADER}")?;
        rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;
    let rates = rate_rows(&jobs, &results, &exact);
    if !rates.is_empty() {
        write_with(&dir.join(RATES_FILE), |w| {
            writeln!(w, "problem,degree,variant,quantity,value_5,value_10,rate")?;
            rates.iter().try_for_each(|r| writeln!(w, "{r}"))
        })?;
    }
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        jobs: records,
    };
    let body = serde_json::to_string_pretty(&summary).expect("plain data serializes");
    write_with(&dir.join(SUMMARY_FILE), |w| writeln!(w, "{body}"))?;

    if !failures.is_empty() {
        let path = dir.join(ERROR_FILE);
        let body = serde_json::to_string_pretty(&failures).expect("plain data serializes");
        write_with(&path, |w| writeln!(w, "{body}"))?;
        return Err(CliError::Solve {
            count: failures.len(),
            file: path.display().to_string(),
        });
    }
    Ok(RunOutcome {
        output_dir: dir,
        table,
        jobs: jobs.len(),
    })
}
