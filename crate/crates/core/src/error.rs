use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported manifold dimension d={0} (only d=2 is implemented)")]
    UnsupportedDimension(usize),

    #[error("invalid degree range: {0}")]
    InvalidDegreeRange(String),

    #[error("invalid harmonic index (n={n}, j={j})")]
    InvalidIndex { n: usize, j: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error(
        "degree {n}: autoregressive polynomial has a root of modulus {modulus:.6} (must exceed 1)"
    )]
    NonstationaryDegree { n: usize, modulus: f64 },

    #[error(
        "degree {n}: moving-average polynomial has a root of modulus {modulus:.6} (must exceed 1)"
    )]
    NoninvertibleDegree { n: usize, modulus: f64 },

    #[error("degree {n}: autoregressive and moving-average polynomials share a root")]
    CommonRoot { n: usize },

    #[error("degree {n}: innovation eigenvalue must be positive, got {value}")]
    NonpositiveInnovation { n: usize, value: f64 },

    #[error("LRD exponent out of range: {0}")]
    RangeViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate bandwidth B_T={bandwidth} for T={t}")]
    DegenerateBandwidth { bandwidth: f64, t: usize },

    #[error("no Fourier frequency inside the window |ω| <= {half_width} for T={t}")]
    EmptyWindow { half_width: f64, t: usize },

    #[error("null calibration requested under an LRD model (use the srd_part mode to calibrate its SRD factor)")]
    CalibrationUnderAlternative,

    #[error("projected variance is zero for direction {0}")]
    ZeroVarianceDirection(String),

    #[error("at least {needed} replications required, got {got}")]
    InsufficientReplications { needed: usize, got: usize },

    #[error("invalid smoothing kernel: {0}")]
    InvalidKernel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by invalid user input (bad config, arguments
    /// or models) rather than failures while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::EmptyWindow { .. } | Error::ZeroVarianceDirection(_)
        )
    }
}
