use thiserror::Error;

/// Errors raised by the symbol engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("truncation parameters differ: {0}")]
    ParamMismatch(String),

    #[error("function has nonzero mean {mean:e} (tolerance {tol:e})")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("leading coefficient is not invertible: {0}")]
    NotInvertible(String),

    #[error("order constraint violated: {0}")]
    Order(String),

    #[error("valuation constraint violated: {0}")]
    Valuation(String),

    #[error("growth condition violated at monomial {monomial}: ceiling {ceiling} exceeds {bound}")]
    Growth {
        monomial: String,
        ceiling: i32,
        bound: i32,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("flow blew up at t = {t}: coefficient bound {norm:e} exceeds {bound:e}")]
    BlowUp { t: f64, norm: f64, bound: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
