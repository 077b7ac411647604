use std::fmt;

use thiserror::Error;

use crate::model::EmpiricalVector;

/// A single violated model invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("edge set is not symmetric: {0}")]
    AsymmetricEdges(String),
    #[error("jump graph is not irreducible: {0}")]
    ReducibleJumpGraph(String),
    #[error("interaction matrix is not symmetric: W({row},{col}) != W({col},{row})")]
    AsymmetricW { row: usize, col: usize },
    #[error("bad block proportions: {0}")]
    BadProportions(String),
    #[error("bad block sizes: {0}")]
    BadSizes(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("operation needs finite block sizes but the model has none")]
    MissingFiniteSizes,
    #[error("not a probability vector: {0}")]
    NotProbability(String),
}

/// Every violation found while validating a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<ModelError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} model violation(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

impl ValidationErrors {
    pub fn contains(&self, pred: impl Fn(&ModelError) -> bool) -> bool {
        self.0.iter().any(pred)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
    #[error("flip is inconsistent with the configuration: {0}")]
    InconsistentFlip(String),
    #[error("state space too large for exact enumeration: K^N = {0:.3e} exceeds {1}")]
    TooLarge(f64, u64),
    #[error("integration step too large: entry {entry:.3e} at t = {time}")]
    StepTooLarge { time: f64, entry: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point on the simplex boundary: entry {0:.3e}")]
    BoundaryPoint(f64),
    #[error("self-consistency iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NonConvergence {
        last: EmpiricalVector,
        residual: f64,
        iterations: usize,
    },
    #[error("not a fixed point: residual {0:.3e}")]
    NotAFixedPoint(f64),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
