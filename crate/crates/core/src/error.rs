use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A discrete iteration produced a non-finite coordinate.
    #[error("iteration diverged at k = {iteration}")]
    Diverged { iteration: usize },

    /// The integrated state became non-finite.
    #[error("integration diverged at t = {t}")]
    IntegrationDiverged { t: f64 },

    /// Adaptive step size fell below the minimum allowed step.
    #[error("step size underflow at t = {t} (h = {step:e}); system is too stiff for the explicit integrator")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("singular system: {0}")]
    Singular(&'static str),

    /// The primal-dual gap came out clearly negative, meaning the supplied
    /// exact solution does not belong to the problem.
    #[error("negative primal-dual gap {0:e}; exact solution is inconsistent with the problem")]
    NegativeGap(f64),

    #[error("need at least {required} usable entries to fit a rate, found {usable}")]
    InsufficientData { usable: usize, required: usize },

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for the numerical blow-up variants.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. }
                | Error::IntegrationDiverged { .. }
                | Error::StepSizeUnderflow { .. }
        )
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
