use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown preset '{0}' (expected cp, hp, f or cap)")]
    UnknownPreset(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

/// The vector field cannot be evaluated at the given state.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("domain exit: {0}")]
pub struct DomainExit(pub &'static str);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeedError {
    #[error("seed displacement must lie in [1e-10, 1e-3], got {0}")]
    Delta(f64),
    #[error("shoot coefficients: {0}")]
    Coefficients(&'static str),
    #[error("locus: {0}")]
    Locus(String),
    #[error("projection onto the locus did not converge (residual {0:e})")]
    Projection(f64),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at s = {s}")]
    StepUnderflow { s: f64, state: Vec<f64> },
    #[error("initial state: {0}")]
    InitialState(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{0}")]
    Regime(String),
    #[error("trajectory did not reach the maximal volume orbit (fbar = {0})")]
    NoMaxVolumeOrbit(f64),
    #[error("no sign change of the orbit-slice quantity in range")]
    NoSignChange,
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
