use thiserror::Error;

pub type Result<T> = std::result::Result<T, SfError>;

#[derive(Debug, Error)]
pub enum SfError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("log-likelihood underflow at row {row}")]
    Underflow { row: usize },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("boundary inference: {0}")]
    BoundaryInference(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("perfect separation in probit fit: {0}")]
    Separation(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SfError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SfError::Config(_) => 2,
            SfError::Data(_) | SfError::Io(_) => 3,
            SfError::NonConvergence(_) | SfError::Separation(_) => 4,
            SfError::Domain(_)
            | SfError::Degenerate(_)
            | SfError::Underflow { .. }
            | SfError::BoundaryInference(_)
            | SfError::Singular(_) => 5,
        }
    }

    /// Prefixes the message with `context`, keeping the variant.
    pub fn context(self, context: &str) -> SfError {
        let wrap = |m: String| format!("{context}: {m}");
        match self {
            SfError::Domain(m) => SfError::Domain(wrap(m)),
            SfError::Degenerate(m) => SfError::Degenerate(wrap(m)),
            SfError::NonConvergence(m) => SfError::NonConvergence(wrap(m)),
            SfError::BoundaryInference(m) => SfError::BoundaryInference(wrap(m)),
            SfError::Singular(m) => SfError::Singular(wrap(m)),
            SfError::Separation(m) => SfError::Separation(wrap(m)),
            SfError::Data(m) => SfError::Data(wrap(m)),
            SfError::Config(m) => SfError::Config(wrap(m)),
            other => other,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SfError::Domain(_) => "domain",
            SfError::Degenerate(_) => "degenerate",
            SfError::Underflow { .. } => "underflow",
            SfError::NonConvergence(_) => "non_convergence",
            SfError::BoundaryInference(_) => "boundary_inference",
            SfError::Singular(_) => "singular",
            SfError::Separation(_) => "separation",
            SfError::Data(_) => "data",
            SfError::Config(_) => "config",
            SfError::Io(_) => "io",
        }
    }
}
