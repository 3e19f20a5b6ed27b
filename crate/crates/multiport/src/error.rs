//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix entries must be finite: {0}")]
    NonFinite(String),

    #[error("matrix is not Hermitian: max |C - C^dag| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not unitary: max |U^dag U - I| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("port index {port} out of range for {n_modes} modes (ports are 1-based)")]
    PortOutOfRange { port: usize, n_modes: usize },

    #[error("ports must be distinct, got ({a}, {b})")]
    PortsNotDistinct { a: usize, b: usize },

    #[error(
        "visibility undefined for input ({in_a},{in_b}) -> output ({out_a},{out_b}): \
         classical coincidence probability is zero"
    )]
    UndefinedVisibility {
        in_a: usize,
        in_b: usize,
        out_a: usize,
        out_b: usize,
    },

    #[error("missing intensity record for input {input}, output {output}")]
    MissingRecord { input: usize, output: usize },

    #[error(
        "intensity record for input {input}, output {output} is too small to \
         divide by (mean = {mean:.3e})"
    )]
    DegenerateDenominator {
        input: usize,
        output: usize,
        mean: f64,
    },

    #[error("fraction weights must be all positive or all zero, got a mix")]
    MixedWeights,

    #[error("fit did not converge within the iteration budget (best objective {objective:.3e})")]
    FitDidNotConverge {
        objective: f64,
        best: Box<crate::characterize::FitResult>,
    },

    #[error("fit is underdetermined: {have} usable data points, need at least {need}")]
    Underdetermined { have: usize, need: usize },

    #[error(
        "visibilities for input pair ({a},{b}) do not depend on the inner-arm phase; \
         choose an input pair that splits an outer arm (1 or 4) and an inner arm (2 or 3)"
    )]
    PhaseInsensitiveInput { a: usize, b: usize },

    #[error("dip fit failed: {0}")]
    DipFitFailed(String),

    #[error("duplicate scan for input ({in_a},{in_b}), output ({out_a},{out_b})")]
    DuplicateScan {
        in_a: usize,
        in_b: usize,
        out_a: usize,
        out_b: usize,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: schema and file-format problems are
    /// usage errors (2), everything else is a computational failure (1).
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Schema(_) | Error::Json(_) => 2,
            _ => 1,
        }
    }
}
