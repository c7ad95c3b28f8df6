use thiserror::Error;

use crate::bands::BandStructure;
use crate::construct::Candidate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Not every band edge could be bracketed; `partial` holds what was found.
    #[error("band isolation failed: {reason}")]
    BandIsolationFailure { reason: String, partial: Box<BandStructure> },

    #[error("quadrature did not converge (estimated error {error_estimate:e})")]
    QuadratureFailure { error_estimate: f64 },

    #[error(
        "construction budget exceeded at stage {stage}: best candidate has period {} with certificate gap {:e}",
        best.potential.period(),
        best.certificate.gap()
    )]
    ConstructionBudgetExceeded { stage: usize, best: Box<Candidate> },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {x}")))
    }
}
