use thiserror::Error;

use crate::chain::Frame;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain configuration: {0}")]
    InvalidChain(String),

    #[error("invalid reservoir: {0}")]
    InvalidReservoir(String),

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("trajectory is in the {found:?} frame, expected {expected:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("the Markovian reservoir has no memory kernel")]
    NoKernel,

    #[error("matrix is not a valid density: eigenvalue {eigenvalue:e} below tolerance")]
    InvalidDensity { eigenvalue: f64 },

    #[error("numerical inconsistency in {measure}: bracket {bracket:e} is negative")]
    NegativeBracket { measure: &'static str, bracket: f64 },

    #[error("environment population {value:e} left [0, 1] by more than the clamp tolerance")]
    Clamping { value: f64 },

    #[error("population of site {site} never falls to half its initial value within the window")]
    NoHalfLife { site: usize },

    #[error("ODE step size collapsed to {step:e} at t = {t}")]
    StepSizeCollapse { t: f64, step: f64 },

    #[error("self-convergence gate failed: halving dt changed populations by {max_change:e} (limit {limit:e})")]
    ConvergenceGate { max_change: f64, limit: f64 },

    #[error("Laplace inversion failed: {0}")]
    Inversion(String),

    #[error("denominator of F1(s) vanishes near s = {s}")]
    PoleProximity { s: num_complex::Complex64 },

    #[error("incomplete gamma evaluation failed: {0}")]
    SpecialFunction(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed run directory: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
