use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the layer that raises them; [`UqError::class`]
/// maps them onto the coarse categories the command-line front-end turns
/// into exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum UqError {
    // model construction and validation
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chain is reducible: {closed_classes} closed communicating classes")]
    Reducible { closed_classes: usize },
    #[error("stationary weight of state {state} is not strictly positive")]
    NonPositive { state: usize },
    #[error("stationary measure was computed for a different model")]
    MeasureMismatch,
    #[error("truncation at N={n} leaves tail mass {tail:e} above tolerance {tol:e}")]
    TruncationTooSmall { n: usize, tail: f64, tol: f64 },
    #[error("dimension {0} exceeds the dense-storage limit")]
    DimensionTooLarge(usize),
    #[error("state space of {0} states exceeds the dense-storage limit")]
    StateSpaceTooLarge(usize),
    #[error("graph is disconnected")]
    Disconnected,

    // variational layer
    #[error("lambda evaluation returned NaN at c = {0}")]
    EvaluationFailure(f64),
    #[error("entropy level {eta} exceeds the supremum {sup} reachable by tilting")]
    EtaUnreachable { eta: f64, sup: f64 },
    #[error("observable is constant on the support")]
    ConstantObservable,

    // functional-inequality layer
    #[error("eigen-decomposition failed: {0}")]
    EigenFailure(String),
    #[error("symmetrized generator has no spectral gap")]
    ZeroGap,
    #[error("generator is not reversible with respect to the stationary measure (residual {0:e})")]
    NotReversible(f64),
    #[error("Poisson equation is singular")]
    SingularPoisson,
    #[error("Liapunov condition violated at state {state} (slack {slack:e})")]
    LiapunovViolated { state: usize, slack: f64 },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("potential leaves the F-Sobolev domain at state {0}")]
    DomainViolation(usize),
    #[error("parameter constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("insufficient decay samples: {0}")]
    InsufficientSamples(String),
    #[error("observable {0} shows no decay")]
    NonDecaying(usize),

    // entropy rates
    #[error("support mismatch at ({0}, {1})")]
    SupportMismatch(usize, usize),
    #[error("measure is not invariant for the alternative model (residual {0:e})")]
    NotInvariant(f64),

    // simulation
    #[error("simulated path left the ball of radius {cap:e} at step {step}")]
    SimulationBlowup { step: usize, cap: f64 },

    // bound assembly
    #[error("no certified lambda method applies: {0}")]
    NoCertifiedMethod(String),
}

/// Coarse failure category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Model,
    Numeric,
    NoMethod,
}

impl UqError {
    pub fn class(&self) -> ErrorClass {
        use UqError::*;
        match self {
            InvalidModel(_)
            | DimensionMismatch { .. }
            | Reducible { .. }
            | NonPositive { .. }
            | MeasureMismatch
            | TruncationTooSmall { .. }
            | DimensionTooLarge(_)
            | StateSpaceTooLarge(_)
            | Disconnected
            | SupportMismatch(..)
            | NotInvariant(_) => ErrorClass::Model,
            NoCertifiedMethod(_) => ErrorClass::NoMethod,
            _ => ErrorClass::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, UqError>;
