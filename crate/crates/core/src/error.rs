//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("speed c = {c} is below the minimal speed {c_min}")]
    SubcriticalSpeed { c: f64, c_min: f64 },
    #[error("no admissible window: {0}")]
    NoWindow(String),
    #[error("divergence at t = {t}, last state {state:?}")]
    Divergence { t: f64, state: Vec<f64> },
    #[error("non-finite field value at t = {t}")]
    FieldEvaluation { t: f64 },
    #[error("no sign change on [{a}, {b}]: f(a) = {fa}, f(b) = {fb}")]
    Bracket { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("shooting failed: {0}; try a smaller eps or a tighter tolerance")]
    StiffShooting(String),
    #[error("kernel moment diverges: {0}")]
    Moment(String),
    #[error("sandwich breached by {excess:e} at t = {t}")]
    InvarianceBreach { t: f64, excess: f64 },
}

impl Error {
    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::Unsupported(_)
                | Error::Model(_)
                | Error::SubcriticalSpeed { .. }
                | Error::NoWindow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
