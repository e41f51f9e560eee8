//! Experiment configuration file.
//!
//! Knot counts in the file (`knots`, escalation schedules, `refine`) count
//! knot points; the solver works in intervals, one fewer.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use splinebvp::bench::{builtin, BUILTIN_NAMES};
use splinebvp::gradient::Norm;
use splinebvp::optimize::OptimizeOptions;
use splinebvp::solver::{KnotPolicy, SolverConfig, Strategy};
use splinebvp::spline::KnotMode;

use crate::CliError;

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SPLINEBVP_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KnotChoice {
    /// Whatever the problem's reference runs use.
    #[default]
    Problem,
    Uniform,
    Chebyshev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StrategyConfig {
    #[default]
    None,
    Escalate {
        /// Knot counts of the later stages.
        schedule: Vec<usize>,
        #[serde(default = "default_stage_iters")]
        iters_per_stage: usize,
    },
    Relocate {
        #[serde(default = "default_period")]
        warmup: usize,
        #[serde(default = "default_period")]
        period: usize,
        #[serde(default = "default_rounds")]
        rounds: usize,
        #[serde(default = "default_min_gap")]
        min_gap: f64,
        /// Knot count of a final uniform refinement stage.
        #[serde(default)]
        refine: Option<usize>,
    },
}

fn default_stage_iters() -> usize {
    30
}
fn default_period() -> usize {
    15
}
fn default_rounds() -> usize {
    3
}
fn default_min_gap() -> f64 {
    0.02
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitFlags {
    #[serde(default = "yes")]
    pub loss_history: bool,
    #[serde(default = "yes")]
    pub residuals: bool,
    #[serde(default = "yes")]
    pub samples: bool,
    #[serde(default = "yes")]
    pub solutions: bool,
}

fn yes() -> bool {
    true
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            loss_history: true,
            residuals: true,
            samples: true,
            solutions: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormChoice {
    #[default]
    L2,
    Linf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in problem name, or a list of names.
    pub problem: OneOrMany,
    /// Spline degree; defaults to each problem's reference degree.
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub knot_policy: KnotChoice,
    /// Knot counts to run.
    pub knots: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit: EmitFlags,
    #[serde(default = "default_collocation")]
    pub collocation: usize,
    #[serde(default)]
    pub norm: NormChoice,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Points for the error metrics.
    #[serde(default = "default_metric_samples")]
    pub metric_samples: usize,
    /// Points in the spline-sample CSV.
    #[serde(default = "default_spline_samples")]
    pub spline_samples: usize,
    /// Worker threads; 0 uses the available parallelism.
    #[serde(default)]
    pub workers: usize,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("splinebvp-out")
}
fn default_collocation() -> usize {
    100
}
fn default_max_iter() -> usize {
    OptimizeOptions::default().max_iter
}
fn default_metric_samples() -> usize {
    100
}
fn default_spline_samples() -> usize {
    400
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub knots: Option<Vec<usize>>,
    pub degree: Option<usize>,
    pub workers: Option<usize>,
}

/// One solve: problem, degree, knot count and seed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Job {
    pub problem: String,
    pub degree: usize,
    pub knots: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Flags first, then the environment (output directory only), then the file.
    pub fn apply(&mut self, over: &Overrides, env_output: Option<PathBuf>) {
        if let Some(dir) = over.output_dir.clone().or(env_output) {
            self.output_dir = dir;
        }
        if let Some(s) = &over.seeds {
            self.seeds = s.clone();
        }
        if let Some(k) = &over.knots {
            self.knots = k.clone();
        }
        if over.degree.is_some() {
            self.degree = over.degree;
        }
        if let Some(w) = over.workers {
            self.workers = w;
        }
    }

    pub fn problems(&self) -> Vec<String> {
        self.problem.to_vec()
    }

    /// Check everything that can be checked without solving, and expand
    /// the job list in output order.
    pub fn jobs(&self) -> Result<Vec<Job>, CliError> {
        let problems = self.problems();
        if problems.is_empty() {
            return Err(CliError::Config("no problem given".into()));
        }
        if self.knots.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Config("need at least one knot count and one seed".into()));
        }
        if self.spline_samples < 2 {
            return Err(CliError::Config("spline_samples must be at least 2".into()));
        }
        let mut jobs = Vec::new();
        for name in &problems {
            let Some(bp) = builtin(name) else {
                return Err(CliError::Config(format!(
                    "unknown problem '{name}'; valid problems: {}",
                    BUILTIN_NAMES.join(", ")
                )));
            };
            let degree = self.degree.unwrap_or(bp.degree);
            for &knots in &self.knots {
                let cfg = self.solver_config(name, knots, 0)?;
                cfg.validate(&bp.problem)
                    .map_err(|e| CliError::Config(format!("{name}, {knots} knots: {e}")))?;
                for &seed in &self.seeds {
                    jobs.push(Job {
                        problem: name.clone(),
                        degree,
                        knots,
                        seed,
                    });
                }
            }
        }
        jobs.sort();
        jobs.dedup();
        Ok(jobs)
    }

    pub fn solver_config(&self, problem: &str, knots: usize, seed: u64) -> Result<SolverConfig, CliError> {
        let bp = builtin(problem).ok_or_else(|| CliError::Config(format!("unknown problem '{problem}'")))?;
        let intervals = |k: usize, what: &str| {
            k.checked_sub(1)
                .filter(|&n| n >= 1)
                .ok_or_else(|| CliError::Config(format!("{what} must be at least 2 knots, got {k}")))
        };
        let knot_policy = match (self.knot_policy, bp.knot_mode) {
            (KnotChoice::Uniform, _) | (KnotChoice::Problem, KnotMode::Uniform) => KnotPolicy::Uniform,
            (KnotChoice::Chebyshev, _) | (KnotChoice::Problem, KnotMode::Chebyshev) => KnotPolicy::Chebyshev,
        };
        let strategy = match &self.strategy {
            StrategyConfig::None => Strategy::None,
            StrategyConfig::Escalate {
                schedule,
                iters_per_stage,
            } => Strategy::Escalate {
                schedule: schedule
                    .iter()
                    .map(|&k| intervals(k, "escalation stage"))
                    .collect::<Result<_, _>>()?,
                iters_per_stage: *iters_per_stage,
            },
            StrategyConfig::Relocate {
                warmup,
                period,
                rounds,
                min_gap,
                refine,
            } => Strategy::Relocate {
                warmup: *warmup,
                period: *period,
                rounds: *rounds,
                min_gap: *min_gap,
                refine: refine.map(|k| intervals(k, "refine")).transpose()?,
            },
        };
        Ok(SolverConfig {
            degree: self.degree.unwrap_or(bp.degree),
            knot_policy,
            n: intervals(knots, "knots")?,
            collocation_count: self.collocation,
            norm: match self.norm {
                NormChoice::L2 => Norm::L2,
                NormChoice::Linf => Norm::Linf,
            },
            seed,
            strategy,
            optimizer: OptimizeOptions {
                max_iter: self.max_iter,
                ..OptimizeOptions::default()
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> ExperimentConfig {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse(r#"{"problem": "bvp1", "knots": [5, 10]}"#);
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.strategy, StrategyConfig::None);
        assert_eq!(c.spline_samples, 400);
        let cfg = c.solver_config("bvp1", 10, 3).unwrap();
        assert_eq!(cfg.n, 9);
        assert_eq!(cfg.degree, 3);
        assert_eq!(c.jobs().unwrap().len(), 2);
    }

    #[test]
    fn strategy_counts_are_knots() {
        let c = parse(
            r#"{"problem": ["bvp1_long"], "knots": [9],
                "strategy": {"kind": "relocate", "refine": 19}}"#,
        );
        let cfg = c.solver_config("bvp1_long", 9, 0).unwrap();
        assert_eq!(cfg.n, 8);
        assert!(matches!(cfg.strategy, Strategy::Relocate { refine: Some(18), rounds: 3, .. }));
    }

    #[test]
    fn unknown_problem_lists_choices() {
        let c = parse(r#"{"problem": "bvp9", "knots": [5]}"#);
        let msg = c.jobs().unwrap_err().to_string();
        assert!(msg.contains("bvp9") && msg.contains("bvp1, bvp2"), "{msg}");
    }

    #[test]
    fn flags_beat_environment_beats_file() {
        let mut c = parse(r#"{"problem": "bvp1", "knots": [5], "output_dir": "file"}"#);
        c.apply(&Overrides::default(), Some("env".into()));
        assert_eq!(c.output_dir, PathBuf::from("env"));
        let over = Overrides {
            output_dir: Some("flag".into()),
            seeds: Some(vec![4, 2]),
            ..Default::default()
        };
        c.apply(&over, Some("env".into()));
        assert_eq!(c.output_dir, PathBuf::from("flag"));
        assert_eq!(c.seeds, vec![4, 2]);
    }

    #[test]
    fn jobs_are_sorted() {
        let c = parse(r#"{"problem": ["bvp2", "bvp1"], "knots": [10, 5], "seeds": [2, 1]}"#);
        let jobs = c.jobs().unwrap();
        assert_eq!(jobs.len(), 8);
        assert!(jobs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(jobs[0].problem, "bvp1");
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"problem": "bvp1", "knots": [5], "typo": 1}"#).is_err());
        let c = parse(r#"{"problem": "bvp1", "knots": [1]}"#);
        assert!(matches!(c.jobs(), Err(CliError::Config(_))));
        let c = parse(r#"{"problem": "beam4", "knots": [5], "degree": 3}"#);
        assert!(matches!(c.jobs(), Err(CliError::Config(_))));
    }
}
