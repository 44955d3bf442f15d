use thiserror::Error;

use crate::distributions::{DistributionSpec, Family};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {family} parameter `{name}` = {value}")]
    InvalidParameter {
        family: Family,
        name: &'static str,
        value: f64,
    },
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("{family} fit: {reason}")]
    Fit {
        family: Family,
        reason: FitFailure,
        /// Best iterate reached before giving up, when the optimizer got that far.
        best: Option<Box<DistributionSpec>>,
    },
    #[error("family selection failed: every candidate fit failed")]
    Selection,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("calibration residual {residual:.4} above threshold {threshold}")]
    Calibration {
        residual: f64,
        threshold: f64,
        best: Box<DistributionSpec>,
    },
    #[error("invalid quartile target ({q1}, {q2}, {q3})")]
    InvalidTarget { q1: f64, q2: f64, q3: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("could not draw a positive amplitude from {0} after 64 attempts")]
    ResampleExhausted(Family),
    #[error("cluster {0} has no angular information on its first path")]
    MissingAngles(usize),
    #[error("no cluster survives the beam filter")]
    EmptyChannel,
    #[error("no tap survives the noise floor")]
    EmptySeries,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitFailure {
    #[error("all samples are identical")]
    Degenerate,
    #[error("sample {0} lies outside the family's support")]
    OutsideSupport(f64),
    #[error("non-finite sample")]
    NonFinite,
    #[error("no feasible starting point")]
    Infeasible,
    #[error("optimizer did not converge within {0} evaluations")]
    NonConvergence(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}
