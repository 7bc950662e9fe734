use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("constraint `{constraint}` violated at {point:?}: value {value:e} exceeds bound {bound:e}")]
    ConstraintViolation { constraint: String, point: Vec<f64>, value: f64, bound: f64 },

    #[error("localization failed: no radius down to {floor:e} satisfies the gradient bound")]
    Localization { floor: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("ansatz level {level}: {message}")]
    Ansatz { level: usize, message: String },

    #[error("solver failed at step {step} (s = {s}): {message}")]
    Solver { step: usize, s: f64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("store error: {0}")]
    Store(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ForgeError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ForgeError {
    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        ForgeError::Stage { stage, source: Box::new(self) }
    }
}

impl ForgeError {
    /// True for configuration and parameter errors, which map to a usage exit status.
    pub fn is_usage(&self) -> bool {
        match self {
            ForgeError::Config(_) | ForgeError::InvalidParams(_) => true,
            ForgeError::Stage { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, ForgeError>;
