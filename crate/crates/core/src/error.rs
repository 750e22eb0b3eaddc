//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Expression evaluation hit a point outside its domain of definition.
    #[error("domain error: {reason} at point {point:?}")]
    Domain { reason: String, point: Vec<f64> },

    #[error("derivative order {requested} exceeds supported order {supported} for '{name}'")]
    DerivativeOrder {
        name: String,
        requested: usize,
        supported: usize,
    },

    #[error("variable set mismatch: expected {expected}, got {got}")]
    VarMismatch { expected: String, got: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing time function '{0}'")]
    MissingTimeFunction(String),

    #[error("Lie bracket result leaves the representable coefficient class: {0}")]
    BracketNotRepresentable(String),

    #[error("no closed-form flow known for generator '{0}'")]
    NoClosedFormFlow(String),

    #[error("transformation '{0}' has no closed-form expression substitute for fields")]
    NotExpressible(String),

    #[error("degenerate sample configuration after {0} attempts")]
    DegenerateSamples(usize),

    #[error("mode ({0}, {1}) outside the truncation")]
    ModeOutsideTruncation(i32, i32),

    #[error("state violates the fixed-subspace constraints (distance {0:.3e})")]
    NotInSubspace(f64),

    #[error("fixed subspace is not invariant under the dynamics (violation {violation:.3e} along {direction})")]
    SubspaceNotInvariant { violation: f64, direction: String },

    #[error("non-finite state encountered at t = {0}")]
    BlowUp(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
