use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed distribution spec. `pos` is a byte offset into the input.
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("parameter {param} = {value} out of range (expected {expected})")]
    ParamOutOfRange {
        param: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// The percolation engines need 0 < P[R = 0] < 1.
    #[error("P[R = 0] = {p0} must lie strictly between 0 and 1")]
    DegenerateRadius { p0: f64 },

    #[error("tree degree d = {0} must be at least 2")]
    InvalidDegree(u32),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: u64, residual: f64 },

    #[error("invalid stop policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid environment (line {line}): {msg}")]
    InvalidEnvironment { line: usize, msg: String },

    #[error("j_max = {j_max} does not cover the first full tail period; need j_max >= {required}")]
    JmaxTooSmall { j_max: u64, required: u64 },

    #[error("block length n must be at least 1")]
    InvalidBlockLength,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
