use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid medium profile: {0}")]
    InvalidProfile(String),

    #[error("kernel evaluated at the origin")]
    SingularPoint,

    #[error("quadrature did not converge for offset {offset:?}: estimated error {estimate:.3e}")]
    QuadratureNotConverged { offset: [isize; 3], estimate: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular value decomposition failed: {0}")]
    Svd(String),

    #[error("singular pivot at grid point {point:?}, component {component}")]
    SingularPivot { point: [usize; 3], component: usize },

    #[error("dense system is singular (condition estimate {condition:.3e})")]
    SingularDense { condition: f64 },

    #[error("dense system of size {size} exceeds the guard of {limit} unknowns")]
    SizeGuard { size: usize, limit: usize },

    #[error("GMRES breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
