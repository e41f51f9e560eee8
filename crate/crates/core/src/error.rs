use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid domain: need a < b and n >= 1 (got a = {a}, b = {b}, n = {n})")]
    InvalidDomain { a: f64, b: f64, n: usize },

    #[error("knots must be strictly increasing (violated at index {index})")]
    UnsortedKnots { index: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported spline degree {0} (only 3 and 5)")]
    Degree(usize),

    #[error("degenerate knot geometry (smallest spacing {min_spacing:e}): {detail}")]
    DegenerateGeometry { min_spacing: f64, detail: String },

    #[error("x = {x} lies outside the spline domain [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },

    #[error("derivative order {order} exceeds spline degree {degree}")]
    DerivativeOrder { order: usize, degree: usize },

    #[error("singular system (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("boundary coupling failed for {variant}: {source}")]
    Boundary {
        variant: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("boundary condition {which} has vanishing derivative with respect to u' at the solved point")]
    DegenerateBoundary { which: &'static str },

    #[error("alpha sensitivity system is singular at endpoint {endpoint}")]
    SingularSensitivity { endpoint: &'static str },

    #[error("non-finite loss when perturbing component {component}")]
    NonFiniteEvaluation { component: usize },

    #[error("operator is not finite at probe point x = {x}")]
    NonFiniteOperator { x: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("logarithm of non-positive error {value} for n = {n}")]
    LogDomain { n: usize, value: f64 },

    #[error("reference norm {norm:e} too small for relative error")]
    DivisionGuard { norm: f64 },

    #[error("solve failed at optimizer evaluation {evaluation}: {source}")]
    Solve {
        evaluation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("loss is not finite at the initial point after {attempts} seeds")]
    NonFiniteInitialLoss { attempts: usize },
}
