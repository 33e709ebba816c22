use thiserror::Error;

use crate::solver::DiscreteSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Averages over growing regions did not settle.
    #[error("averages did not stabilize: last value {estimate:.6e}, tail spread {spread:.3e} > tolerance {tolerance:.3e}")]
    NonConvergent {
        estimate: f64,
        spread: f64,
        tolerance: f64,
    },

    #[error("almost periodic extraction did not converge: {0}")]
    NoConvergence(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("resonant frequency matrix: integer vector {m:?} gives a zero combined frequency")]
    Resonant { m: Vec<i64> },

    #[error("ergodicity violation: spatial/ensemble gap {gap:.3e} exceeds tolerance {tolerance:.3e}")]
    ErgodicityViolation { gap: f64, tolerance: f64 },

    #[error("ellipticity violation: lower margin {lower:.3e}, upper margin {upper:.3e} (allowed {allowed:.3e})")]
    EllipticityViolation { lower: f64, upper: f64, allowed: f64 },

    #[error("modulus of continuity violated: worst ratio {ratio:.6}")]
    ModulusViolation { ratio: f64 },

    #[error("coefficient at {position:?} has no nonnegative decomposition on the stencil: {detail}")]
    NonMonotoneDecomposition { position: Vec<f64>, detail: String },

    #[error("solver hit the iteration cap (residual {:.3e} after {} iterations)", best.residual_norm, best.iterations)]
    MaxIterExceeded { best: Box<DiscreteSolution> },

    #[error("pseudo-time iteration lost max-norm stability at step {step}")]
    Unstable { step: usize },

    #[error("grids do not match")]
    GridMismatch,

    #[error("effective table does not cover the query {query:?}")]
    TableRangeExceeded { query: Vec<f64> },

    #[error("successive delta readouts do not contract (ratio {ratio:.3} < 1.2)")]
    NotContracting { ratio: f64 },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// Validation problems (bad input or configuration) as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::Resonant { .. } | Error::Io(_) => {
                true
            }
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
