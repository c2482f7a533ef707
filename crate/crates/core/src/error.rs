use thiserror::Error;

/// Errors shared by the analytic and sampling layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the set on which the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature failed to reach its tolerance.
    #[error("integration error: {0}")]
    Integration(String),

    /// Root bracketing or iteration failed to converge.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// Numeric transform inversion failed its self-consistency test.
    #[error("inversion error: {0}")]
    Inversion(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// A sampled structure exceeded the configured budget.
    #[error("size error: {0}")]
    Size(String),

    /// Importance weights collapsed below the effective-sample-size floor.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// Statistic requested on an empty sample.
    #[error("empty sample: {0}")]
    EmptySample(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn convergence(msg: impl Into<String>) -> Self {
        Error::Convergence(msg.into())
    }
}
