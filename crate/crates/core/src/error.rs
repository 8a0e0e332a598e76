use thiserror::Error;

/// Errors raised by grid construction, the solvers and the fixed-point map.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical breakdown: zero pivot in tridiagonal row {row}")]
    NumericalBreakdown { row: usize },

    #[error("J collapsed to {value:e} in cell {cell} at t = {t}")]
    JCollapse { cell: usize, t: f64, value: f64 },

    #[error("non-finite value in field `{field}` at t = {t}")]
    NonFinite { field: &'static str, t: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(
        "fixed-point iteration did not contract after {halvings} window halvings \
         (last window {window:e}, last ratios {ratios:?})"
    )]
    NonContraction {
        halvings: usize,
        window: f64,
        ratios: Vec<f64>,
    },
}

impl Error {
    /// Solver-fatal errors (J collapse, non-finite state) as opposed to bad input.
    pub fn is_solver_fatal(&self) -> bool {
        matches!(self, Error::JCollapse { .. } | Error::NonFinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
