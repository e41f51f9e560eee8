//! Experiment runner: configuration, job execution and artifact files.

pub mod config;
pub mod runner;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use splinebvp::bench::builtin_problems;
use splinebvp::io::fmt_f64;
use splinebvp::spline::{uniform_points, KnotGrid, PiecewisePolynomial};

pub use config::{ExperimentConfig, Overrides, OUTPUT_DIR_ENV};
pub use runner::{run, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{} solve(s) failed; see {}", .count, .file)]
    Solve { count: usize, file: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solve { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Everything needed to rebuild a solved spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub problem: String,
    pub degree: usize,
    pub seed: u64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Local power-basis coefficients, `degree + 1` per interval.
    pub coefficients: Vec<f64>,
    pub final_loss: f64,
}

impl SolutionFile {
    pub fn spline(&self) -> Result<PiecewisePolynomial, CliError> {
        let bad = |e: splinebvp::Error| CliError::Config(format!("invalid solution file: {e}"));
        let grid = KnotGrid::new(self.knots.clone()).map_err(bad)?;
        PiecewisePolynomial::from_flat(grid, self.degree, self.coefficients.clone()).map_err(bad)
    }
}

/// `x, s0, ..., s<k>` at `count` uniform points: derivatives up to the
/// second for cubics, up to the fourth for quintics.
pub fn write_spline_samples<W: Write>(mut out: W, spline: &PiecewisePolynomial, count: usize) -> std::io::Result<()> {
    let top = if spline.degree() >= 5 { 4 } else { 2 };
    let header: Vec<String> = std::iter::once("x".to_string())
        .chain((0..=top).map(|k| format!("s{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for x in uniform_points(spline.grid().a(), spline.grid().b(), count) {
        let mut row = vec![fmt_f64(x)];
        for k in 0..=top {
            row.push(fmt_f64(spline.eval(x, k).map_err(std::io::Error::other)?));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// The `list-problems` listing.
pub fn list_problems<W: Write>(mut out: W) -> std::io::Result<()> {
    writeln!(out, "name,order,degree,a,b,description")?;
    for bp in builtin_problems() {
        let (a, b) = bp.domain();
        writeln!(
            out,
            "{},{},{},{},{},\"{}\"",
            bp.name,
            bp.problem.order(),
            bp.degree,
            fmt_f64(a),
            fmt_f64(b),
            bp.description
        )?;
    }
    Ok(())
}

/// The `dump-spline` verb: samples of a saved solution on `out`.
pub fn dump_spline<W: Write>(out: W, solution: &Path, samples: usize) -> Result<(), CliError> {
    if samples < 2 {
        return Err(CliError::Config("need at least 2 samples".into()));
    }
    let text = std::fs::read_to_string(solution).map_err(CliError::io(solution))?;
    let file: SolutionFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", solution.display())))?;
    let spline = file.spline()?;
    write_spline_samples(out, &spline, samples).map_err(CliError::io(Path::new("<stdout>")))
}
