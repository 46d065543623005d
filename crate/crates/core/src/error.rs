use thiserror::Error;

/// Errors raised by constructors and evaluators in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input data does not satisfy the type's invariants (normalization,
    /// negativity, dimensions, indices).
    #[error("validation error: {0}")]
    Validation(String),

    /// A mathematically undefined request (zero support where a ratio or log
    /// is needed, out-of-range index, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// `p` has mass where `q` has none, so a ratio p_i / q_i is unbounded.
    #[error("support violation at index {index}: p = {p_value} but q = 0")]
    SupportViolation { index: usize, p_value: f64 },

    /// The battery window, shifted by the largest quantized work value,
    /// leaves the range 0..=n.
    #[error("battery too small: window {lo}..={hi} shifted by {a_max} leaves 0..={n}")]
    BatteryTooSmall {
        lo: u32,
        hi: u32,
        a_max: u32,
        n: u32,
    },

    /// (n - N) must be even so the window endpoints are integers.
    #[error("parity violation: n = {n} and N = {big_n} must have the same parity")]
    Parity { n: u32, big_n: u32 },

    #[error("work grid is empty")]
    EmptyGrid,

    /// A theorem's hypotheses are not met by the supplied data.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The simplex solver did not terminate or lost numerical control.
    #[error("solver error: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
