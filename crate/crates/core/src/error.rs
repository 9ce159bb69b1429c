use thiserror::Error;

/// Errors raised anywhere in the transport pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("non-finite value in {component}")]
    NonFinite { component: &'static str },

    #[error("energy drift {drift:.3e} exceeds tolerance {tol:.3e} at t = {time}")]
    DriftExceeded { drift: f64, tol: f64, time: f64 },

    #[error("integration exceeded {0} steps")]
    MaxStepsExceeded(usize),

    #[error("step size underflow at t = {0}")]
    StepSizeUnderflow(f64),

    #[error("no section crossing within {max_time} time units")]
    NoEventWithinMaxTime { max_time: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no bracketed root of the Lagrange quintic in (0, 1)")]
    QuinticNoRoot,

    #[error("degenerate equilibrium: {0}")]
    Degenerate(String),

    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),

    #[error("continuation failed at energy index {index}: {source}")]
    ContinuationFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("target energy {target} is not above the saddle energy {saddle}")]
    EnergyBelowSaddle { target: f64, saddle: f64 },

    #[error("saddle is not an index-1 saddle")]
    NotIndex1,

    #[error("orbit is not hyperbolic: {0}")]
    NonHyperbolic(String),

    #[error("every tube seed timed out before reaching the section")]
    AllSeedsIncomplete,

    #[error("cuts are not comparable: {0}")]
    SectionMismatch(String),

    #[error("connection refinement diverged: {0}")]
    RefinementDiverged(String),

    #[error("connection does not approach its periodic orbit: {0}")]
    AsymptoticsFailed(String),

    #[error("energy mismatch: {0}")]
    EnergyMismatch(String),

    #[error("wrap count {wraps} below minimum {min}")]
    WrapsTooSmall { wraps: usize, min: usize },

    #[error("invalid walk: {0}")]
    InvalidWalk(String),

    #[error("shadow solve diverged at joint {joint}: residual {residual:.3e}")]
    ShadowDiverged { joint: usize, residual: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Variant name, stable across releases; used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "InvalidModel",
            Error::NonFinite { .. } => "NonFinite",
            Error::DriftExceeded { .. } => "DriftExceeded",
            Error::MaxStepsExceeded(_) => "MaxStepsExceeded",
            Error::StepSizeUnderflow(_) => "StepSizeUnderflow",
            Error::NoEventWithinMaxTime { .. } => "NoEventWithinMaxTime",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::QuinticNoRoot => "QuinticNoRoot",
            Error::Degenerate(_) => "Degenerate",
            Error::NewtonDiverged(_) => "NewtonDiverged",
            Error::ContinuationFailed { .. } => "ContinuationFailed",
            Error::EnergyBelowSaddle { .. } => "EnergyBelowSaddle",
            Error::NotIndex1 => "NotIndex1",
            Error::NonHyperbolic(_) => "NonHyperbolic",
            Error::AllSeedsIncomplete => "AllSeedsIncomplete",
            Error::SectionMismatch(_) => "SectionMismatch",
            Error::RefinementDiverged(_) => "RefinementDiverged",
            Error::AsymptoticsFailed(_) => "AsymptoticsFailed",
            Error::EnergyMismatch(_) => "EnergyMismatch",
            Error::WrapsTooSmall { .. } => "WrapsTooSmall",
            Error::InvalidWalk(_) => "InvalidWalk",
            Error::ShadowDiverged { .. } => "ShadowDiverged",
            Error::Json(_) => "Json",
        }
    }

    /// Whether the error reflects bad input rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_) | Error::InvalidConfig(_) | Error::InvalidWalk(_) | Error::WrapsTooSmall { .. } | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
