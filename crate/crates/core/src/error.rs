use thiserror::Error;

/// Errors produced anywhere in the integration pipeline.
///
/// Each variant maps to a stable numeric code (see [`Error::code`]) shared by the
/// CLI exit status and the C ABI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("approximation order {0} is outside the supported range 1..=7")]
    OrderOutOfRange(usize),

    #[error("no symmetric triangle rule of polynomial degree {0} (supported: 2, 4, ..., 14)")]
    UnsupportedDegree(usize),

    #[error("order mismatch: expected p={expected}, found p={found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("inverted element{}: det = {det:e} at xi = ({:.6}, {:.6}, {:.6})",
        element.map(|e| format!(" {e}")).unwrap_or_default(), xi[0], xi[1], xi[2])]
    InvertedElement {
        element: Option<usize>,
        xi: [f64; 3],
        det: f64,
    },

    #[error("incompressible material (poisson ratio 0.5) is not supported")]
    IncompressibleMaterial,

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shared memory exhausted: {required} bytes needed per work-group, {available} available")]
    SharedMemoryExhausted { required: usize, available: usize },

    #[error("capacity error: one element matrix needs {needed} bytes, max allocation is {limit}")]
    Capacity { needed: usize, limit: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("verification failed: {failed} of {total} checks did not pass")]
    VerificationFailed { failed: usize, total: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable code. Zero is reserved for success.
    pub fn code(&self) -> i32 {
        match self {
            Error::OrderOutOfRange(_) => 10,
            Error::UnsupportedDegree(_) => 11,
            Error::OrderMismatch { .. } => 12,
            Error::InvertedElement { .. } => 20,
            Error::IncompressibleMaterial => 30,
            Error::InvalidMaterial(_) => 31,
            Error::Config(_) => 40,
            Error::SharedMemoryExhausted { .. } => 41,
            Error::Capacity { .. } => 42,
            Error::ContractViolation(_) => 50,
            Error::MeshGeneration(_) => 60,
            Error::VerificationFailed { .. } => 80,
            Error::Io(_) => 70,
            Error::Json(_) => 71,
            Error::Csv(_) => 72,
        }
    }

    /// Short identifier paired with [`Error::code`], e.g. for JSON reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OrderOutOfRange(_) => "order_out_of_range",
            Error::UnsupportedDegree(_) => "unsupported_degree",
            Error::OrderMismatch { .. } => "order_mismatch",
            Error::InvertedElement { .. } => "inverted_element",
            Error::IncompressibleMaterial => "incompressible_material",
            Error::InvalidMaterial(_) => "invalid_material",
            Error::Config(_) => "config",
            Error::SharedMemoryExhausted { .. } => "shared_memory_exhausted",
            Error::Capacity { .. } => "capacity",
            Error::ContractViolation(_) => "contract_violation",
            Error::MeshGeneration(_) => "mesh_generation",
            Error::VerificationFailed { .. } => "verification_failed",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn with_element(self, id: usize) -> Self {
        match self {
            Error::InvertedElement { xi, det, .. } => Error::InvertedElement {
                element: Some(id),
                xi,
                det,
            },
            other => other,
        }
    }
}
