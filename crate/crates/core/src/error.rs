use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: expected {}", expected.join(" or "))]
    Syntax { position: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("domain error: {func}({arg})")]
    Domain { func: &'static str, arg: f64 },
    #[error("non-finite value during evaluation")]
    NonFinite,

    #[error("degenerate critical point at {location:?} (eigenvalue {eigenvalue:e})")]
    DegenerateCriticalPoint { location: Vec<f64>, eigenvalue: f64 },
    #[error("Newton iteration did not converge from any seed")]
    NoConvergence,
    #[error("gradient flow left the enlarged box at {0:?}")]
    FlowDiverged(Vec<f64>),
    #[error("gradient flow stagnated at a saddle near {0:?}")]
    StagnatedAtSaddle(Vec<f64>),
    #[error("could not refine a saddle between minima {0} and {1}")]
    SaddleRefinementFailed(usize, usize),
    #[error("no communicating saddle for pair ({0}, {1})")]
    MissingSaddle(usize, usize),
    #[error("landscape must have exactly two minima, found {0}")]
    NotTwoWells(usize),

    #[error("quadrature under-resolved: relative error estimate {0:e}")]
    QuadratureUnderResolved(f64),
    #[error("epsilon {0} is out of range")]
    EpsilonOutOfRange(f64),
    #[error("box does not contain the critical points with the required margin")]
    BoxTooSmall,

    #[error("argument must be positive: {0}")]
    NonPositiveArgument(f64),
    #[error("argument out of range: {0}")]
    OutOfRange(f64),
    #[error("function values must be non-negative")]
    NegativeFunction,

    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("vectors are not orthogonal (inner product {0:e})")]
    NotOrthogonal(f64),
    #[error("matrix path is singular at sample {0}")]
    Singular(usize),
    #[error("path tangent at the saddle is not the unstable eigenvector (|cos| = {0})")]
    SaddleTangentMismatch(f64),
    #[error("transport tube self-intersects: radius of curvature {c_gamma} below {threshold}")]
    PathSelfIntersecting { c_gamma: f64, threshold: f64 },

    #[error("no admissible delta for the critical point at {0:?}")]
    DeltaInfeasible(Vec<f64>),
    #[error("drift inequality violated at {} points, worst {worst:e} at {at:?}", count)]
    DriftViolated { count: usize, worst: f64, at: Vec<f64> },

    #[error("eigensolver failed: {0}")]
    EigensolveFailed(String),
    #[error("grid too coarse: gap changed by {0:.3} under refinement")]
    GridTooCoarse(f64),
    #[error("step size {dt} exceeds stability limit {limit}")]
    StepSizeTooLarge { dt: f64, limit: f64 },
    #[error("trajectory escaped the enlarged box at step {0}")]
    Escape(u64),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
