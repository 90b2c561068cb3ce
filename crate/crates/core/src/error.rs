use nalgebra::DVector;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("degenerate quadratic form: smallest |eigenvalue| {smallest:.3e} below tolerance {tolerance:.3e}")]
    DegenerateForm { smallest: f64, tolerance: f64 },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("zero vector has no cone class")]
    ZeroVector,

    #[error("null pivot at vector {index}: |(w,w)| = {value:.3e}")]
    NullPivot { index: usize, value: f64 },

    #[error("input vectors are linearly dependent (vector {index})")]
    LinearlyDependent { index: usize },

    #[error("form restricted to the subspace is degenerate")]
    DegenerateSubspace,

    #[error("operator is not J-separated: {0}")]
    NotSeparated(String),

    #[error("operator is singular")]
    Singular,

    #[error("form is negative somewhere on the null cone (value {value:.3e})")]
    NotNonnegativeOnNullCone { witness: DVector<f64>, value: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("section is not transverse to the flow (|n.X| = {0:.3e})")]
    NonTransverseSection(f64),

    #[error("not converged: drift {drift:.3e} exceeds {tolerance:.3e}")]
    NotConverged { drift: f64, tolerance: f64 },

    #[error("point outside the domain of the form field")]
    OutsideDomain,

    #[error("point is not an equilibrium (|X| = {0:.3e})")]
    NotEquilibrium(f64),

    #[error("vector field vanishes at the point")]
    SingularPoint,

    #[error("flow direction is not admissible: J(X) = {0:.3e}")]
    NonAdmissibleDirection(f64),

    #[error("operator is not hyperbolic (min |Re eig| = {0:.3e})")]
    NotHyperbolic(f64),

    #[error("index mismatch: requested {requested}, operator has {actual} stable eigenvalues")]
    IndexMismatch { requested: usize, actual: usize },

    #[error("no certificate: {0}")]
    NoCertificate(String),

    #[error("periodic orbit is suspect: {0}")]
    SuspectOrbit(String),

    #[error("transported subspaces collapsed at t = {t} (angle {angle:.3e})")]
    SplitCollapse { t: f64, angle: f64 },

    #[error("not separated on step {step} (t = {t})")]
    NotSeparatedOnStep { step: usize, t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
