use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{qubits} qubits exceeds the cap of {cap} for {what}")]
    DimensionCap {
        what: &'static str,
        qubits: usize,
        cap: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("not a projector (residual {residual:.3e})")]
    NotProjector { residual: f64 },
    #[error("not a density matrix: {0}")]
    NotDensity(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("numerical overflow: {0}")]
    Overflow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outside validity window: {0}")]
    OutsideWindow(String),
    #[error("audit violation at step {step}: {detail}")]
    AuditViolation { step: usize, detail: String },
    #[error("positivity violated: minimum eigenvalue {0:.3e}")]
    Positivity(f64),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
