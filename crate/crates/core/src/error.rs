use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("variable x{index} out of range for dimension {n}")]
    VariableOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("polynomial degree {degree} exceeds available moment order {order}")]
    DegreeExceeded { degree: u32, order: u32 },
    #[error("weights must be nonnegative and sum to 1 (sum = {sum})")]
    InvalidWeights { sum: f64 },
    #[error("point {index} has dimension {found}, expected {expected}")]
    PointDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("moment matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("even moment of order {order} is not positive ({value:e})")]
    NonPositiveMoment { order: u32, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelaxationError {
    #[error("relaxation order {r} too small: 2r < deg f = {degree}")]
    OrderTooSmall { r: u32, degree: u32 },
    #[error("box radius must be positive and at most {max} (got {radius})")]
    InvalidRadius { radius: f64, max: f64 },
    #[error("relaxation order {r} exceeds the supported maximum {max}")]
    OrderTooLarge { r: u32, max: u32 },
    #[error("tolerance {0:e} outside [1e-10, 1e-4]")]
    InvalidTolerance(f64),
    #[error("dual multiplier for the budget must be nonnegative (got {0})")]
    NegativeLambda(f64),
    #[error("Gram matrix is {found}x{found}, basis has {expected} elements")]
    GramDimension { expected: usize, found: usize },
    #[error("moment sequence has {found} entries, relaxation needs {expected}")]
    SequenceShape { expected: usize, found: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("factorization breakdown at iteration {iteration}: {what}")]
    Factorization { iteration: usize, what: &'static str },
    #[error("starting point is not strictly feasible")]
    InfeasibleStart,
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("polynomial is negative at {point:?} (value {value:e})")]
    NegativeInput { point: Vec<f64>, value: f64 },
    #[error("schedule exhausted: best λ_M = {best_lambda:e} exceeds target {target:e}")]
    ScheduleExhausted { best_lambda: f64, target: f64 },
    #[error("Gram matrix is indefinite beyond tolerance (min eigenvalue {min_eig:e})")]
    Indefinite { min_eig: f64 },
    #[error("epsilon must be positive (got {0})")]
    InvalidEpsilon(f64),
    #[error("empty schedule")]
    EmptySchedule,
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KktError {
    #[error("{which} is not convex: Hessian eigenvalue {eigenvalue:e} at {witness:?}")]
    NotConvex {
        which: String,
        witness: Vec<f64>,
        eigenvalue: f64,
    },
    #[error("Slater point violates constraint g{index} (value {value:e})")]
    SlaterViolated { index: usize, value: f64 },
    #[error("barrier method did not converge: stationarity {stationarity:e}, gap {gap:e}")]
    NoConvergence { stationarity: f64, gap: f64 },
    #[error("objective is negative on the feasible set at {point:?} (value {value:e})")]
    NegativeOnFeasibleSet { point: Vec<f64>, value: f64 },
    #[error("expected {expected} multipliers, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("multiplier {index} is negative ({value})")]
    NegativeMultiplier { index: usize, value: f64 },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}
