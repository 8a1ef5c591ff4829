use thiserror::Error;

/// Errors raised by the numerical and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model kind `{kind}` has no tail function G")]
    NoTailFunction { kind: &'static str },

    #[error("field has no value at t={t}, x={x:?}")]
    MissingSite { t: usize, x: Vec<i32> },

    #[error("size guard exceeded: {what} ({size} > {limit})")]
    SizeGuard {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("root bracket not found: {0}")]
    Bracket(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
