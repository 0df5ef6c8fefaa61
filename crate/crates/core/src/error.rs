use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {x} lies below the branch point -1/e; no real principal-branch value")]
    Domain { x: f64 },

    #[error("Lambert W iteration did not reach the residual tolerance for x = {x}")]
    LambertNonConvergence { x: f64 },

    #[error("hazard is singular at m = 0 for shape k = {k} < 1")]
    SingularHazard { k: f64 },

    #[error("closed-support probability undefined: {0}")]
    ClosedSupportDomain(String),

    #[error("adaptive quadrature stopped with error estimate {estimate:e}")]
    QuadratureFailure { estimate: f64 },

    #[error("no interior optimum: {0}")]
    NoInteriorOptimum(String),

    #[error("degenerate objective: {0}")]
    DegenerateObjective(String),

    #[error("second-order condition fails at m* = {m_star} (margin {margin:e})")]
    SecondOrderViolation { m_star: f64, margin: f64 },

    #[error("comparative statics refused: W = {w} is within 1e-9 of a denominator singularity")]
    StaticsUnstable { w: f64 },

    #[error("invalid parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    Spec(String),
}

impl Error {
    /// Stable machine-readable name used in CSV/JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } | Error::ClosedSupportDomain(_) => "DomainError",
            Error::LambertNonConvergence { .. } => "LambertNonConvergence",
            Error::SingularHazard { .. } => "SingularHazard",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::NoInteriorOptimum(_) => "NoInteriorOptimum",
            Error::DegenerateObjective(_) => "DegenerateObjective",
            Error::SecondOrderViolation { .. } => "SecondOrderViolation",
            Error::StaticsUnstable { .. } => "StaticsUnstable",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::Spec(_) => "SpecError",
        }
    }

    /// True for outcomes that describe the economics of a valid problem
    /// rather than bad input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::NoInteriorOptimum(_)
                | Error::DegenerateObjective(_)
                | Error::SecondOrderViolation { .. }
                | Error::StaticsUnstable { .. }
        )
    }
}
